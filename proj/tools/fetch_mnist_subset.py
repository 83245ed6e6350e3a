#!/usr/bin/env python3
"""Write a 5000-image MNIST subset as IDX files.

The subset is the one bundled with the mlxtend wheel (500 training images per
digit, 28x28, label in the last CSV column). Only the wheel is downloaded; the
package is never installed.

    python3 tools/fetch_mnist_subset.py [--out data/mnist5k] [--wheel PATH]
"""
import argparse
import glob
import gzip
import os
import struct
import subprocess
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def find_wheel(explicit):
    if explicit:
        return explicit
    tmp = tempfile.mkdtemp()
    subprocess.run(["pip", "download", "--no-deps", "mlxtend", "-d", tmp],
                   check=True)
    return glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/mnist5k")
    ap.add_argument("--wheel")
    args = ap.parse_args()

    rows = gzip.decompress(zipfile.ZipFile(find_wheel(args.wheel)).read(MEMBER))
    images, labels = bytearray(), bytearray()
    for line in rows.decode().splitlines():
        values = [int(v) for v in line.split(",")]
        assert len(values) == 785
        images.extend(values[:-1])
        labels.append(values[-1])
    n = len(labels)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(images)
    with open(os.path.join(args.out, "labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels)
    print(f"wrote {n} images to {args.out}")


if __name__ == "__main__":
    main()

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "churn/feature_pool.hpp"

namespace churn {

struct SynthOptions {
  std::size_t base_features = 10;
  std::size_t degree = 5;
  std::size_t generating_features = 50;
  std::size_t train_samples = 10000;
  std::size_t test_samples = 2000;
  double noise_sd = 0.0;
};

/// Gaussian inputs with a target that is an exact linear combination of
/// randomly chosen pool monomials.
struct RegressionDataset {
  Matrix train_x;
  Vector train_y;
  Matrix test_x;
  Vector test_y;
  std::vector<FeatureDescriptor> generating;
  std::vector<double> coefficients;
};

RegressionDataset synth_regression(std::uint64_t seed, const SynthOptions& options = {});

class IdxError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, Truncated, TrailingBytes, CountMismatch };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Images flattened row-major, intensities byte/255.
struct RawImages {
  Matrix images;
  std::vector<int> labels;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return labels.size(); }
};

/// Parses an IDX3 unsigned-byte image file and the matching IDX1 label file.
RawImages load_idx(const std::string& images_path, const std::string& labels_path);

/// In-memory variants of load_idx, used by the file loader.
Matrix parse_idx_images(const std::vector<std::uint8_t>& bytes, std::size_t& rows,
                        std::size_t& cols);
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

/// Writes IDX files (used for fixtures and the subset converter's output).
void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& labels,
               std::size_t count, std::size_t rows, std::size_t cols);

enum class Reduction { CenterCrop, Area };

Reduction parse_reduction(const std::string& name);
std::string to_string(Reduction r);

struct ImageDataset {
  Matrix images;  // N x (width*height), [0,1]
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t size() const { return labels.size(); }
};

/// Area-weighted resampling of one row-major image.
Vector resample_area(const Eigen::Ref<const Vector>& image, std::size_t src_rows,
                     std::size_t src_cols, std::size_t dst_rows, std::size_t dst_cols);

/// Removes the same number of border pixels on every side.
Vector center_crop(const Eigen::Ref<const Vector>& image, std::size_t src_rows,
                   std::size_t src_cols, std::size_t dst_rows, std::size_t dst_cols);

/// Label-stratified draw of `n` images followed by resizing to side x side.
ImageDataset reduce_mnist(const RawImages& raw, std::size_t n, std::uint64_t seed,
                          Reduction method = Reduction::Area, std::size_t side = 20);

/// Seeded shuffle, first `train_n` to train; each part keeps source order.
std::pair<ImageDataset, ImageDataset> split_dataset(const ImageDataset& data,
                                                    std::size_t train_n, std::uint64_t seed);

}  // namespace churn

#include "churn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>

#include "churn/sampling.hpp"

namespace churn {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_header(const std::vector<std::uint8_t>& bytes, std::uint32_t magic,
                  std::size_t header, const char* what) {
  if (bytes.size() < 4)
    throw IdxError(IdxError::Kind::Truncated, std::string(what) + ": file shorter than magic");
  const auto got = read_be32(bytes, 0);
  if (got != magic) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: bad magic 0x%08x, expected 0x%08x", what, got, magic);
    throw IdxError(IdxError::Kind::BadMagic, buf);
  }
  if (bytes.size() < header)
    throw IdxError(IdxError::Kind::Truncated,
                   std::string(what) + ": header truncated, expected " + std::to_string(header) +
                       " bytes, got " + std::to_string(bytes.size()));
}

void check_payload(std::size_t expected, std::size_t actual, const char* what) {
  if (actual < expected)
    throw IdxError(IdxError::Kind::Truncated, std::string(what) + ": truncated, expected " +
                                                  std::to_string(expected) + " bytes, got " +
                                                  std::to_string(actual));
  if (actual > expected)
    throw IdxError(IdxError::Kind::TrailingBytes,
                   std::string(what) + ": " + std::to_string(actual - expected) +
                       " bytes after the payload");
}

// Source-pixel weights covering output cell `o` when `src` pixels map onto `dst`.
std::vector<std::pair<std::size_t, double>> area_weights(std::size_t o, std::size_t src,
                                                         std::size_t dst) {
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  const double lo = static_cast<double>(o) * scale;
  const double hi = lo + scale;
  std::vector<std::pair<std::size_t, double>> w;
  for (auto i = static_cast<std::size_t>(std::floor(lo)); i < src && static_cast<double>(i) < hi;
       ++i) {
    const double overlap = std::min(hi, static_cast<double>(i + 1)) -
                           std::max(lo, static_cast<double>(i));
    if (overlap > 0.0) w.emplace_back(i, overlap / scale);
  }
  return w;
}

}  // namespace

RegressionDataset synth_regression(std::uint64_t seed, const SynthOptions& options) {
  std::mt19937_64 rng(seed);
  const auto n = options.base_features;
  const auto total = options.train_samples + options.test_samples;
  Matrix x(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = gauss(rng);

  const auto pool = generate_multinomial_pool(n, options.degree);
  if (options.generating_features > pool.size())
    throw std::invalid_argument("more generating features than pool entries");
  std::vector<std::size_t> all(pool.size());
  std::iota(all.begin(), all.end(), 0);
  auto chosen = draw_without_replacement(std::move(all), options.generating_features, rng);

  RegressionDataset data;
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Vector y = Vector::Zero(x.rows());
  for (auto idx : chosen) {
    data.generating.push_back(pool[idx]);
    data.coefficients.push_back(coef(rng));
    y += data.coefficients.back() * evaluate_column(pool[idx], x);
  }
  if (options.noise_sd > 0.0) {
    std::normal_distribution<double> noise(0.0, options.noise_sd);
    for (auto& v : y) v += noise(rng);
  }

  const auto tr = static_cast<Eigen::Index>(options.train_samples);
  const auto te = static_cast<Eigen::Index>(options.test_samples);
  data.train_x = x.topRows(tr);
  data.test_x = x.bottomRows(te);
  data.train_y = y.head(tr);
  data.test_y = y.tail(te);
  return data;
}

Matrix parse_idx_images(const std::vector<std::uint8_t>& bytes, std::size_t& rows,
                        std::size_t& cols) {
  check_header(bytes, kImageMagic, 16, "images");
  const std::size_t count = read_be32(bytes, 4);
  rows = read_be32(bytes, 8);
  cols = read_be32(bytes, 12);
  const std::size_t pixels = rows * cols;
  check_payload(16 + count * pixels, bytes.size(), "images");
  Matrix images(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t p = 0; p < pixels; ++p)
      images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          bytes[16 + i * pixels + p] / 255.0;
  return images;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  check_header(bytes, kLabelMagic, 8, "labels");
  const std::size_t count = read_be32(bytes, 4);
  check_payload(8 + count, bytes.size(), "labels");
  return {bytes.begin() + 8, bytes.end()};
}

RawImages load_idx(const std::string& images_path, const std::string& labels_path) {
  RawImages raw;
  raw.images = parse_idx_images(slurp(images_path), raw.rows, raw.cols);
  raw.labels = parse_idx_labels(slurp(labels_path));
  if (raw.labels.size() != static_cast<std::size_t>(raw.images.rows()))
    throw IdxError(IdxError::Kind::CountMismatch,
                   std::to_string(raw.images.rows()) + " images but " +
                       std::to_string(raw.labels.size()) + " labels");
  return raw;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& labels,
               std::size_t count, std::size_t rows, std::size_t cols) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw IdxError(IdxError::Kind::Io, "cannot write IDX files");
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(count));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

Reduction parse_reduction(const std::string& name) {
  if (name == "crop") return Reduction::CenterCrop;
  if (name == "area") return Reduction::Area;
  throw std::invalid_argument("unknown reduction '" + name + "' (expected crop or area)");
}

std::string to_string(Reduction r) { return r == Reduction::CenterCrop ? "crop" : "area"; }

Vector resample_area(const Eigen::Ref<const Vector>& image, std::size_t src_rows,
                     std::size_t src_cols, std::size_t dst_rows, std::size_t dst_cols) {
  if (static_cast<std::size_t>(image.size()) != src_rows * src_cols)
    throw std::invalid_argument("image size does not match its shape");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dst_rows * dst_cols));
  for (std::size_t r = 0; r < dst_rows; ++r) {
    const auto wr = area_weights(r, src_rows, dst_rows);
    for (std::size_t c = 0; c < dst_cols; ++c) {
      const auto wc = area_weights(c, src_cols, dst_cols);
      double v = 0.0;
      for (auto [i, a] : wr)
        for (auto [j, b] : wc) v += a * b * image[static_cast<Eigen::Index>(i * src_cols + j)];
      out[static_cast<Eigen::Index>(r * dst_cols + c)] = v;
    }
  }
  return out;
}

Vector center_crop(const Eigen::Ref<const Vector>& image, std::size_t src_rows,
                   std::size_t src_cols, std::size_t dst_rows, std::size_t dst_cols) {
  if (static_cast<std::size_t>(image.size()) != src_rows * src_cols)
    throw std::invalid_argument("image size does not match its shape");
  if (dst_rows > src_rows || dst_cols > src_cols)
    throw std::invalid_argument("crop larger than source image");
  const auto top = (src_rows - dst_rows) / 2;
  const auto left = (src_cols - dst_cols) / 2;
  Vector out(static_cast<Eigen::Index>(dst_rows * dst_cols));
  for (std::size_t r = 0; r < dst_rows; ++r)
    for (std::size_t c = 0; c < dst_cols; ++c)
      out[static_cast<Eigen::Index>(r * dst_cols + c)] =
          image[static_cast<Eigen::Index>((r + top) * src_cols + c + left)];
  return out;
}

ImageDataset reduce_mnist(const RawImages& raw, std::size_t n, std::uint64_t seed,
                          Reduction method, std::size_t side) {
  if (n == 0 || n > raw.size())
    throw std::invalid_argument("cannot draw " + std::to_string(n) + " of " +
                                std::to_string(raw.size()) + " images");
  std::mt19937_64 rng(seed);
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < raw.size(); ++i) by_label[raw.labels[i]].push_back(i);

  // Largest-remainder allocation of n across labels.
  std::vector<std::pair<int, std::size_t>> quota;
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (const auto& [label, members] : by_label) {
    const double exact = static_cast<double>(n) * static_cast<double>(members.size()) /
                         static_cast<double>(raw.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quota.emplace_back(label, base);
    remainders.emplace_back(exact - static_cast<double>(base), label);
    assigned += base;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned)
    for (auto& [label, q] : quota)
      if (label == remainders[k].second) ++q;

  std::vector<std::size_t> chosen;
  for (const auto& [label, q] : quota) {
    auto picked = draw_without_replacement(by_label[label], q, rng);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  std::sort(chosen.begin(), chosen.end());

  ImageDataset out;
  out.width = out.height = side;
  out.images.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(side * side));
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    Vector src = raw.images.row(static_cast<Eigen::Index>(chosen[k])).transpose();
    out.images.row(static_cast<Eigen::Index>(k)) =
        (method == Reduction::Area ? resample_area(src, raw.rows, raw.cols, side, side)
                                   : center_crop(src, raw.rows, raw.cols, side, side))
            .transpose();
    out.labels.push_back(raw.labels[chosen[k]]);
  }
  return out;
}

std::pair<ImageDataset, ImageDataset> split_dataset(const ImageDataset& data,
                                                    std::size_t train_n, std::uint64_t seed) {
  if (train_n == 0 || train_n >= data.size())
    throw std::invalid_argument("train size must lie in [1, N)");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  order = draw_without_replacement(std::move(order), order.size(), rng);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_n));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(train_n), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto take = [&](const std::vector<std::size_t>& idx) {
    ImageDataset part;
    part.width = data.width;
    part.height = data.height;
    part.images.resize(static_cast<Eigen::Index>(idx.size()), data.images.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      part.images.row(static_cast<Eigen::Index>(k)) = data.images.row(static_cast<Eigen::Index>(idx[k]));
      part.labels.push_back(data.labels[idx[k]]);
    }
    return part;
  };
  return {take(train_idx), take(test_idx)};
}

}  // namespace churn

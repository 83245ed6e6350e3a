#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace churn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Constant-one feature; supplies the intercept.
struct Bias {
  auto operator<=>(const Bias&) const = default;
};

/// Monomial x1^a1 * ... * xn^an over the base coordinates.
struct MultinomialTerm {
  std::vector<std::uint8_t> exponents;

  int degree() const;
  auto operator<=>(const MultinomialTerm&) const = default;
};

struct RawPixel {
  std::uint32_t index = 0;
  auto operator<=>(const RawPixel&) const = default;
};

/// Product of two pixel intensities; canonical form has first < second.
struct PixelPair {
  std::uint32_t first = 0;
  std::uint32_t second = 0;
  auto operator<=>(const PixelPair&) const = default;
};

struct PixelSquare {
  std::uint32_t index = 0;
  auto operator<=>(const PixelSquare&) const = default;
};

using FeatureDescriptor =
    std::variant<Bias, MultinomialTerm, RawPixel, PixelPair, PixelSquare>;

/// Thrown for malformed pool parameters, descriptors or sample dimensions.
class FeatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Builds a canonical pair (smaller position first); rejects i == j.
PixelPair make_pixel_pair(std::uint32_t i, std::uint32_t j);

/// `1`, `x1^2*x3`, `px(4)`, `px(4)^2`, `px(4,9)`.  Coordinates are 1-based
/// in multinomial names and 0-based pixel positions otherwise.
std::string to_string(const FeatureDescriptor& desc);

/// Inverse of to_string.  `base_dim` fixes the exponent-vector length of
/// multinomial terms.
FeatureDescriptor parse_descriptor(std::string_view text, std::size_t base_dim);

struct FeaturePool {
  std::vector<FeatureDescriptor> descriptors;
  std::size_t base_dim = 0;

  std::size_t size() const { return descriptors.size(); }
  const FeatureDescriptor& operator[](std::size_t i) const { return descriptors[i]; }
};

/// All monomials of total degree 0..d in n variables, graded by degree and,
/// within a degree, lexicographically descending in the exponent vector
/// (x1 before x2, x1^2 before x1*x2).  Size is C(n+d, d).
FeaturePool generate_multinomial_pool(std::size_t n, std::size_t d);

/// Raw pixels, then squares, then every unordered pair, all for positions
/// sorted ascending.  `image_size` is the flattened image dimension.
FeaturePool generate_pixel_pool(std::span<const std::uint32_t> kept_pixels,
                                std::size_t image_size);

/// Value of one feature on one raw sample.
double evaluate_feature(const FeatureDescriptor& desc, std::span<const double> sample);

/// Column of one feature over all rows of `samples` (rows are raw samples).
Vector evaluate_column(const FeatureDescriptor& desc, const Matrix& samples);

/// samples x features design matrix; column j is features[j].
Matrix evaluate_design_matrix(std::span<const FeatureDescriptor> features,
                              const Matrix& samples);

/// Sample standard deviation (divisor N-1) of each column.
Vector column_deviations(const Matrix& columns);

/// Deviation of a single column.
double sample_deviation(const Eigen::Ref<const Vector>& column);

/// Minimal prefix of the deviation-descending order (ties: lower index first)
/// whose deviations sum to at least `coverage` of the total.  The result is
/// returned in that deviation order.
std::vector<std::size_t> select_by_deviation(std::span<const double> deviations,
                                             double coverage);

/// select_by_deviation over the column deviations of `columns`.
std::vector<std::size_t> deviation_filter(const Matrix& columns, double coverage);

/// Keeps every raw pixel of `pool` and applies the deviation filter to the
/// derived (square and pair) features evaluated on `images`.
FeaturePool filter_derived_features(const FeaturePool& pool, const Matrix& images,
                                    double coverage);

/// Per-degree counts, index = degree.  Non-multinomial descriptors count
/// toward their polynomial degree in the pixel intensities.
std::vector<std::size_t> degree_histogram(const FeaturePool& pool);

}  // namespace churn

template <>
struct std::hash<churn::FeatureDescriptor> {
  std::size_t operator()(const churn::FeatureDescriptor& d) const noexcept;
};

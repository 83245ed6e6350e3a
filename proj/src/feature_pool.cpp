#include "churn/feature_pool.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace churn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_pixel(std::uint32_t index, std::size_t dim) {
  if (index >= dim)
    throw FeatureError("pixel position " + std::to_string(index) +
                       " outside sample of dimension " + std::to_string(dim));
}

std::uint32_t parse_uint(std::string_view s) {
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw FeatureError("bad integer '" + std::string(s) + "' in descriptor");
  return value;
}

// Appends every exponent vector of total degree `degree`, x1-heavy first.
void append_degree(std::size_t n, int degree, std::vector<std::uint8_t>& current,
                   std::size_t var, std::vector<FeatureDescriptor>& out) {
  if (var + 1 == n) {
    current[var] = static_cast<std::uint8_t>(degree);
    out.emplace_back(MultinomialTerm{current});
    current[var] = 0;
    return;
  }
  for (int a = degree; a >= 0; --a) {
    current[var] = static_cast<std::uint8_t>(a);
    append_degree(n, degree - a, current, var + 1, out);
  }
  current[var] = 0;
}

int feature_degree(const FeatureDescriptor& d) {
  return std::visit(overloaded{[](const Bias&) { return 0; },
                               [](const MultinomialTerm& t) { return t.degree(); },
                               [](const RawPixel&) { return 1; },
                               [](const PixelPair&) { return 2; },
                               [](const PixelSquare&) { return 2; }},
                    d);
}

}  // namespace

int MultinomialTerm::degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

PixelPair make_pixel_pair(std::uint32_t i, std::uint32_t j) {
  if (i == j) throw FeatureError("pixel pair needs two distinct positions");
  return i < j ? PixelPair{i, j} : PixelPair{j, i};
}

std::string to_string(const FeatureDescriptor& desc) {
  return std::visit(
      overloaded{
          [](const Bias&) { return std::string("1"); },
          [](const MultinomialTerm& t) {
            std::string out;
            for (std::size_t v = 0; v < t.exponents.size(); ++v) {
              if (t.exponents[v] == 0) continue;
              if (!out.empty()) out += '*';
              out += 'x' + std::to_string(v + 1);
              if (t.exponents[v] > 1) out += '^' + std::to_string(t.exponents[v]);
            }
            return out.empty() ? std::string("1") : out;
          },
          [](const RawPixel& p) { return "px(" + std::to_string(p.index) + ")"; },
          [](const PixelPair& p) {
            return "px(" + std::to_string(p.first) + "," + std::to_string(p.second) + ")";
          },
          [](const PixelSquare& p) { return "px(" + std::to_string(p.index) + ")^2"; }},
      desc);
}

FeatureDescriptor parse_descriptor(std::string_view text, std::size_t base_dim) {
  if (text == "1") return Bias{};
  if (text.starts_with("px(")) {
    auto close = text.find(')');
    if (close == std::string_view::npos) throw FeatureError("unterminated pixel descriptor");
    auto inner = text.substr(3, close - 3);
    auto tail = text.substr(close + 1);
    auto comma = inner.find(',');
    if (comma != std::string_view::npos) {
      if (!tail.empty()) throw FeatureError("trailing text after pixel pair");
      auto a = parse_uint(inner.substr(0, comma));
      auto b = parse_uint(inner.substr(comma + 1));
      if (a >= b) throw FeatureError("pixel pair not in canonical order");
      return PixelPair{a, b};
    }
    auto idx = parse_uint(inner);
    if (tail.empty()) return RawPixel{idx};
    if (tail == "^2") return PixelSquare{idx};
    throw FeatureError("bad pixel descriptor '" + std::string(text) + "'");
  }

  MultinomialTerm term{std::vector<std::uint8_t>(base_dim, 0)};
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('*', pos);
    if (end == std::string_view::npos) end = text.size();
    auto factor = text.substr(pos, end - pos);
    if (factor.size() < 2 || factor[0] != 'x')
      throw FeatureError("bad monomial factor '" + std::string(factor) + "'");
    auto caret = factor.find('^');
    auto var = parse_uint(factor.substr(1, caret == std::string_view::npos ? factor.npos
                                                                            : caret - 1));
    std::uint32_t power =
        caret == std::string_view::npos ? 1 : parse_uint(factor.substr(caret + 1));
    if (var == 0 || var > base_dim)
      throw FeatureError("variable x" + std::to_string(var) + " outside base dimension " +
                         std::to_string(base_dim));
    if (power == 0 || term.exponents[var - 1] != 0 || power > 255)
      throw FeatureError("bad exponent in '" + std::string(text) + "'");
    term.exponents[var - 1] = static_cast<std::uint8_t>(power);
    pos = end + 1;
  }
  return term;
}

FeaturePool generate_multinomial_pool(std::size_t n, std::size_t d) {
  if (n == 0) throw FeatureError("multinomial pool needs at least one base feature");
  if (d == 0) throw FeatureError("multinomial pool needs degree at least 1");
  if (d > 255) throw FeatureError("degree too large");
  FeaturePool pool;
  pool.base_dim = n;
  pool.descriptors.emplace_back(Bias{});
  std::vector<std::uint8_t> current(n, 0);
  for (int degree = 1; degree <= static_cast<int>(d); ++degree)
    append_degree(n, degree, current, 0, pool.descriptors);
  return pool;
}

FeaturePool generate_pixel_pool(std::span<const std::uint32_t> kept_pixels,
                                std::size_t image_size) {
  if (kept_pixels.empty()) throw FeatureError("pixel pool needs at least one pixel");
  std::vector<std::uint32_t> sorted(kept_pixels.begin(), kept_pixels.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw FeatureError("duplicate pixel position in pixel pool");
  for (auto p : sorted) check_pixel(p, image_size);

  FeaturePool pool;
  pool.base_dim = image_size;
  const auto k = sorted.size();
  pool.descriptors.reserve(2 * k + k * (k - 1) / 2);
  for (auto p : sorted) pool.descriptors.emplace_back(RawPixel{p});
  for (auto p : sorted) pool.descriptors.emplace_back(PixelSquare{p});
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      pool.descriptors.emplace_back(PixelPair{sorted[a], sorted[b]});
  return pool;
}

double evaluate_feature(const FeatureDescriptor& desc, std::span<const double> sample) {
  const auto dim = sample.size();
  return std::visit(
      overloaded{
          [](const Bias&) { return 1.0; },
          [&](const MultinomialTerm& t) {
            if (t.exponents.size() != dim)
              throw FeatureError("monomial over " + std::to_string(t.exponents.size()) +
                                 " variables evaluated on sample of dimension " +
                                 std::to_string(dim));
            double value = 1.0;
            for (std::size_t v = 0; v < dim; ++v)
              for (int a = 0; a < t.exponents[v]; ++a) value *= sample[v];
            return value;
          },
          [&](const RawPixel& p) {
            check_pixel(p.index, dim);
            return sample[p.index];
          },
          [&](const PixelPair& p) {
            check_pixel(p.second, dim);
            return sample[p.first] * sample[p.second];
          },
          [&](const PixelSquare& p) {
            check_pixel(p.index, dim);
            return sample[p.index] * sample[p.index];
          }},
      desc);
}

Vector evaluate_column(const FeatureDescriptor& desc, const Matrix& samples) {
  const auto dim = static_cast<std::size_t>(samples.cols());
  const auto rows = samples.rows();
  Vector column(rows);
  std::visit(overloaded{
                 [&](const Bias&) { column.setOnes(); },
                 [&](const MultinomialTerm& t) {
                   if (t.exponents.size() != dim)
                     throw FeatureError("monomial over " +
                                        std::to_string(t.exponents.size()) +
                                        " variables evaluated on samples of dimension " +
                                        std::to_string(dim));
                   column.setOnes();
                   for (std::size_t v = 0; v < dim; ++v)
                     for (int a = 0; a < t.exponents[v]; ++a)
                       column.array() *= samples.col(static_cast<Eigen::Index>(v)).array();
                 },
                 [&](const RawPixel& p) {
                   check_pixel(p.index, dim);
                   column = samples.col(p.index);
                 },
                 [&](const PixelPair& p) {
                   check_pixel(p.second, dim);
                   column = samples.col(p.first).cwiseProduct(samples.col(p.second));
                 },
                 [&](const PixelSquare& p) {
                   check_pixel(p.index, dim);
                   column = samples.col(p.index).cwiseAbs2();
                 }},
             desc);
  return column;
}

Matrix evaluate_design_matrix(std::span<const FeatureDescriptor> features,
                              const Matrix& samples) {
  Matrix design(samples.rows(), static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j)
    design.col(static_cast<Eigen::Index>(j)) = evaluate_column(features[j], samples);
  return design;
}

double sample_deviation(const Eigen::Ref<const Vector>& column) {
  const auto n = column.size();
  if (n < 2) throw FeatureError("deviation needs at least 2 samples");
  const double mean = column.mean();
  return std::sqrt((column.array() - mean).square().sum() / static_cast<double>(n - 1));
}

Vector column_deviations(const Matrix& columns) {
  if (columns.rows() < 2) throw FeatureError("deviation needs at least 2 samples");
  Vector s(columns.cols());
  for (Eigen::Index j = 0; j < columns.cols(); ++j) s[j] = sample_deviation(columns.col(j));
  return s;
}

std::vector<std::size_t> select_by_deviation(std::span<const double> deviations,
                                             double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0))
    throw FeatureError("coverage must lie in (0, 1]");
  std::vector<std::size_t> order(deviations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return deviations[a] > deviations[b];
  });
  // Summing in sorted order makes the full positive prefix hit the total exactly.
  double total = 0.0;
  for (auto j : order) total += deviations[j];
  const double target = coverage * total;

  std::vector<std::size_t> kept;
  if (total <= 0.0) return kept;
  double running = 0.0;
  for (auto j : order) {
    if (running >= target) break;
    kept.push_back(j);
    running += deviations[j];
  }
  return kept;
}

std::vector<std::size_t> deviation_filter(const Matrix& columns, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0))
    throw FeatureError("coverage must lie in (0, 1]");
  Vector s = column_deviations(columns);
  return select_by_deviation(std::span<const double>(s.data(), s.size()), coverage);
}

FeaturePool filter_derived_features(const FeaturePool& pool, const Matrix& images,
                                    double coverage) {
  if (images.rows() < 2) throw FeatureError("deviation needs at least 2 samples");
  std::vector<std::size_t> derived;
  std::vector<double> deviations;
  FeaturePool out;
  out.base_dim = pool.base_dim;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (std::holds_alternative<RawPixel>(pool[i])) {
      out.descriptors.push_back(pool[i]);
    } else {
      derived.push_back(i);
      deviations.push_back(sample_deviation(evaluate_column(pool[i], images)));
    }
  }
  auto kept = select_by_deviation(deviations, coverage);
  std::sort(kept.begin(), kept.end());
  for (auto k : kept) out.descriptors.push_back(pool[derived[k]]);
  return out;
}

std::vector<std::size_t> degree_histogram(const FeaturePool& pool) {
  std::vector<std::size_t> hist;
  for (const auto& d : pool.descriptors) {
    auto deg = static_cast<std::size_t>(feature_degree(d));
    if (hist.size() <= deg) hist.resize(deg + 1, 0);
    ++hist[deg];
  }
  return hist;
}

}  // namespace churn

std::size_t std::hash<churn::FeatureDescriptor>::operator()(
    const churn::FeatureDescriptor& d) const noexcept {
  std::size_t h = d.index() * 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  std::visit(
      [&](const auto& alt) {
        using T = std::decay_t<decltype(alt)>;
        if constexpr (std::is_same_v<T, churn::MultinomialTerm>) {
          for (auto e : alt.exponents) mix(e);
        } else if constexpr (std::is_same_v<T, churn::PixelPair>) {
          mix(alt.first);
          mix(alt.second);
        } else if constexpr (std::is_same_v<T, churn::RawPixel> ||
                             std::is_same_v<T, churn::PixelSquare>) {
          mix(alt.index);
        }
      },
      d);
  return h;
}

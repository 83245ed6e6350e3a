// Acceptance checks.  `acceptance` runs every criterion; `acceptance 3 8`
// runs a selection.  One PASS/FAIL line per criterion; exit status 1 if any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "churn/bench.hpp"
#include "churn/feature_pool.hpp"
#include "churn/models.hpp"
#include "churn/usefulness.hpp"
#include "churn_oracle.hpp"
#include "oracles.hpp"

using namespace churn;
using namespace churn::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::size_t binomial(std::size_t n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::set<std::vector<std::uint8_t>> enumerate_exponents(std::size_t n, std::size_t d) {
  std::set<std::vector<std::uint8_t>> out;
  std::vector<std::uint8_t> e(n, 0);
  for (;;) {
    if (std::accumulate(e.begin(), e.end(), std::size_t{0}) <= d) out.insert(e);
    std::size_t i = 0;
    while (i < n && e[i] == d) e[i++] = 0;
    if (i == n) break;
    ++e[i];
  }
  return out;
}

Verdict pool_combinatorics() {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  const auto big = generate_multinomial_pool(10, 5).size();
  if (big != 3003) v.pass = false;
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 8; ++n)
    for (std::size_t d = 1; d <= 5; ++d) {
      const auto pool = generate_multinomial_pool(n, d);
      std::set<std::vector<std::uint8_t>> seen;
      for (const auto& f : pool.descriptors)
        seen.insert(std::holds_alternative<Bias>(f) ? std::vector<std::uint8_t>(n, 0)
                                                    : std::get<MultinomialTerm>(f).exponents);
      if (pool.size() != binomial(n + d, d) || seen.size() != pool.size() ||
          seen != enumerate_exponents(n, d))
        v.pass = false;
      ++checked;
    }
  const double secs = seconds_since(t0);
  if (secs >= 1.0) v.pass = false;
  v.detail = "|P(10,5)|=" + std::to_string(big) + ", " + std::to_string(checked) +
             " (n,d) pairs enumerated, " + fmt(secs, 3) + " s";
  return v;
}

Verdict gradients() {
  std::mt19937_64 rng(2024);
  double worst_reg = 0.0, worst_mlp = 0.0;
  for (int t = 0; t < 20; ++t) {
    auto r = random_regression(rng, 6 + t % 5, 2 + t % 4);
    const Vector analytic = mse_gradient(r.model, r.batch);
    const Matrix fd = numeric_gradient(
        [&](const Matrix& th) { return scalar_mse(th.col(0), r.batch); }, r.model.theta);
    worst_reg = std::max(worst_reg, relative_error(analytic, fd));

    auto m = random_mlp(rng, 5 + t % 4, 2 + t % 3, 2 + t % 3, 2 + t % 3, t % 2 ? 0.9 : 0.0);
    const auto g = mlp_gradients(m.model, m.batch);
    const auto n = mlp_numeric_gradients(m.model, m.batch);
    worst_mlp = std::max({worst_mlp, relative_error(g.w_in, n.w_in),
                          relative_error(g.b_in, n.b_in), relative_error(g.w_out, n.w_out),
                          relative_error(g.b_out, n.b_out)});
  }
  return {worst_reg <= 1e-6 && worst_mlp <= 1e-4,
          "worst relative error regression " + fmt(worst_reg, 3) + " (<= 1e-6), mlp " +
              fmt(worst_mlp, 3) + " (<= 1e-4), 20 instances each"};
}

Verdict churn_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t steps = 0, failures = 0;
  std::string first;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    MicroRun run(1000 + seed);
    const auto out = run.run();
    steps += out.steps;
    if (!out.ok) {
      if (failures++ == 0) first = "seed " + std::to_string(1000 + seed) + ": " + out.failure;
    }
  }
  const double secs = seconds_since(t0);
  Verdict v{failures == 0 && secs < 60.0,
            "500 micro-runs, " + std::to_string(steps) + " steps checked, " +
                std::to_string(failures) + " mismatches, " + fmt(secs, 3) + " s"};
  if (!first.empty()) v.detail += "; first: " + first;
  return v;
}

Verdict usefulness() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  bool zero_ok = true;
  for (int t = 0; t < 100; ++t) {
    auto r = random_regression(rng, 8 + t % 13, 2 + t % 7);
    const auto cols = r.model.theta.size();
    r.model.theta[t % cols] = 0.0;
    const auto scores = regression_usefulness_all(r.model, r.batch);
    for (Eigen::Index i = 0; i < cols; ++i) {
      const double expect = brute_force_usefulness(r.model, r.batch, static_cast<std::size_t>(i));
      const double got = scores[static_cast<std::size_t>(i)].value;
      if (r.model.theta[i] == 0.0) {
        if (got != 0.0) zero_ok = false;
        continue;
      }
      worst = std::max(worst, std::abs(got - expect) / std::max(std::abs(expect), 1e-300));
    }
  }
  return {worst <= 1e-12 && zero_ok,
          "worst relative deviation " + fmt(worst, 3) + " over 100 instances (<= 1e-12), zero "
          "weights score zero: " + (zero_ok ? "yes" : "no")};
}

struct FinalLosses {
  double train = 0.0;
  double test = 0.0;
  double accuracy = 0.0;
  std::size_t iterations = 0;
};

FinalLosses final_of(const TrialOutcome& out) {
  const auto& r = out.metrics.records.back();
  return {r.train_loss, r.test_loss, r.test_accuracy, r.iterations};
}

std::vector<FinalLosses> run_seeds(const ExperimentConfig& config, const char* label) {
  std::shared_ptr<const RawImages> cache;
  std::vector<FinalLosses> out;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    out.push_back(final_of(run_trial(config, seed, cache)));
    std::cout << "    " << label << " seed " << seed << ": train " << fmt(out.back().train)
              << ", test " << fmt(out.back().test) << ", accuracy " << fmt(out.back().accuracy)
              << ", " << out.back().iterations << " iterations, " << fmt(seconds_since(t0), 3)
              << " s\n"
              << std::flush;
  }
  return out;
}

Verdict generalization_gap() {
  constexpr std::size_t budget = 33750;
  auto churn_cfg = preset(ExperimentKind::Regression);
  churn_cfg.churn.iteration_budget = budget;
  auto base_cfg = preset(ExperimentKind::BaselineRegression);
  base_cfg.churn.iteration_budget = budget;

  const auto t0 = std::chrono::steady_clock::now();
  const auto churn_runs = run_seeds(churn_cfg, "churn");
  const auto base_runs = run_seeds(base_cfg, "baseline");
  bool pass = true;
  std::string churn_ratios, base_ratios;
  for (std::size_t s = 0; s < 5; ++s) {
    const double cr = churn_runs[s].test / churn_runs[s].train;
    const double br = base_runs[s].test / base_runs[s].train;
    if (!(cr <= 2.0) || !(br >= 3.0)) pass = false;
    if (churn_runs[s].iterations != budget || base_runs[s].iterations != budget) pass = false;
    churn_ratios += (s ? " " : "") + fmt(cr, 3);
    base_ratios += (s ? " " : "") + fmt(br, 3);
  }
  return {pass, "test/train ratios churn [" + churn_ratios + "] (<= 2), baseline [" +
                    base_ratios + "] (>= 3), " + std::to_string(budget) +
                    " iterations each, " + fmt(seconds_since(t0), 3) + " s"};
}

bool have_mnist() {
  const auto cfg = preset(ExperimentKind::MnistH20);
  return fs::exists(cfg.images_path) && fs::exists(cfg.labels_path);
}

double mean_accuracy(const std::vector<FinalLosses>& runs) {
  double s = 0.0;
  for (const auto& r : runs) s += r.accuracy;
  return s / static_cast<double>(runs.size());
}

Verdict mnist_accuracy() {
  if (!have_mnist()) return {false, "MNIST subset not found under data/mnist5k"};
  const auto t0 = std::chrono::steady_clock::now();
  const double mean = mean_accuracy(run_seeds(preset(ExperimentKind::MnistH20), "h20"));
  return {mean >= 0.90, "mean test accuracy " + fmt(mean) + " over 5 seeds (>= 0.90), " +
                            fmt(seconds_since(t0), 3) + " s"};
}

Verdict mnist_superiority() {
  if (!have_mnist()) return {false, "MNIST subset not found under data/mnist5k"};
  constexpr std::size_t budget = 3000;
  auto churn_cfg = preset(ExperimentKind::MnistH5);
  churn_cfg.churn.iteration_budget = budget;
  auto base_cfg = preset(ExperimentKind::BaselineMlp);
  base_cfg.churn.hidden = 5;
  base_cfg.churn.lambda = 1.0;
  base_cfg.churn.iteration_budget = budget;

  const auto t0 = std::chrono::steady_clock::now();
  const double churn_mean = mean_accuracy(run_seeds(churn_cfg, "churn h5"));
  const double base_mean = mean_accuracy(run_seeds(base_cfg, "baseline h5"));
  const double margin = 100.0 * (churn_mean - base_mean);
  return {margin >= 1.0, "mean test accuracy churn " + fmt(100 * churn_mean) + "% vs baseline " +
                             fmt(100 * base_mean) + "%, margin " + fmt(margin, 3) +
                             " pp (>= 1), at most " + std::to_string(budget) +
                             " iterations each, " + fmt(seconds_since(t0), 3) + " s"};
}

// Independent recomputation: N-1 standard deviation per column, stable sort
// descending, shortest prefix reaching the coverage share.
std::set<std::uint32_t> reference_survivors(const Matrix& images, double coverage) {
  const auto n = images.rows();
  std::vector<double> dev(static_cast<std::size_t>(images.cols()));
  for (Eigen::Index c = 0; c < images.cols(); ++c) {
    double mean = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) mean += images(r, c);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) ss += (images(r, c) - mean) * (images(r, c) - mean);
    dev[static_cast<std::size_t>(c)] = std::sqrt(ss / static_cast<double>(n - 1));
  }
  std::vector<std::uint32_t> order(dev.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return dev[a] > dev[b]; });
  const double total = std::accumulate(dev.begin(), dev.end(), 0.0);
  std::set<std::uint32_t> kept;
  double sum = 0.0;
  for (auto idx : order) {
    if (sum >= coverage * total) break;
    kept.insert(idx);
    sum += dev[idx];
  }
  return kept;
}

Verdict filter_survivors() {
  if (!have_mnist()) return {false, "MNIST subset not found under data/mnist5k"};
  const auto cfg = preset(ExperimentKind::MnistH20);
  const auto raw = load_idx(cfg.images_path, cfg.labels_path);
  bool pass = true, prefix = true;
  std::string counts;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto reduced = reduce_mnist(raw, cfg.subset, seed, cfg.reduction, cfg.side);
    const auto [train, test] = split_dataset(reduced, cfg.train_size, seed);
    const auto kept = kept_pixel_positions(train.images, cfg.coverage);
    const std::set<std::uint32_t> got(kept.begin(), kept.end());
    const auto expect = reference_survivors(train.images, cfg.coverage);
    if (got != expect) pass = prefix = false;
    const auto k = static_cast<long>(kept.size());
    if (std::abs(k - 287) > 10 || train.images.cols() != 400) pass = false;
    counts += (seed ? " " : "") + std::to_string(kept.size());
  }
  return {pass, "400 -> [" + counts + "] survivors on seeds 0-4 (287 +- 10), minimal "
                "deviation-sorted prefix: " + (prefix ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  std::vector<std::pair<ExperimentKind, std::size_t>> cases{
      {ExperimentKind::Regression, 2000},
      {ExperimentKind::BaselineRegression, 500},
  };
  if (have_mnist()) {
    cases.push_back({ExperimentKind::MnistH20, 400});
    cases.push_back({ExperimentKind::BaselineMlp, 100});
  }
  const fs::path root = fs::temp_directory_path() / "churn_acceptance_determinism";
  fs::remove_all(root);
  bool pass = true;
  std::string names;
  for (const auto& [kind, budget] : cases) {
    auto cfg = preset(kind);
    cfg.churn.iteration_budget = budget;
    std::string bytes[2];
    for (int rep = 0; rep < 2; ++rep) {
      std::shared_ptr<const RawImages> cache;
      const auto dir = root / (to_string(kind) + "-" + std::to_string(rep));
      write_trial(cfg, run_trial(cfg, 7, cache), dir.string());
      bytes[rep] = slurp(dir / "metrics.csv");
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    if (!same) pass = false;
    names += (names.empty() ? "" : ", ") + to_string(kind) + (same ? " identical" : " DIFFER");
  }
  fs::remove_all(root);
  return {pass, "metrics.csv twice with seed 7: " + names};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria{
      {1, {"pool combinatorics", pool_combinatorics}},
      {2, {"gradient correctness", gradients}},
      {3, {"churn-loop oracle", churn_oracle}},
      {4, {"usefulness oracle", usefulness}},
      {5, {"regression generalization gap", generalization_gap}},
      {6, {"H=20 MNIST accuracy", mnist_accuracy}},
      {7, {"H=5 churn beats raw-pixel baseline", mnist_superiority}},
      {8, {"deviation filter", filter_survivors}},
      {9, {"end-to-end determinism", determinism}},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (!criteria.count(n)) {
      std::cerr << "unknown criterion: " << argv[i] << "\n";
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty())
    for (const auto& [n, c] : criteria) selected.push_back(n);

  int failed = 0;
  for (int n : selected) {
    const auto& [name, check] = criteria.at(n);
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << n << " " << name << ": " << v.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

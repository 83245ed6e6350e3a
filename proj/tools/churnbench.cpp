#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "churn/bench.hpp"
#include "churn/metrics_io.hpp"

namespace {

using namespace churn;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> budget_iters;
  std::optional<double> budget_ms;
  std::optional<std::string> out;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Base seed");
    cmd->add_option("--trials", trials, "Number of trials (seeds base..base+trials-1)");
    auto* iters = cmd->add_option("--budget-iters", budget_iters, "Total iteration budget");
    auto* ms = cmd->add_option("--budget-ms", budget_ms, "Wall-clock budget in milliseconds");
    iters->excludes(ms);
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--set", sets, "Override a config key, key=value (repeatable)");
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.base_seed = *seed;
    if (trials) c.trials = *trials;
    if (budget_iters) {
      c.churn.iteration_budget = *budget_iters;
      c.churn.wall_clock_budget_ms = 0.0;
    }
    if (budget_ms) {
      c.churn.wall_clock_budget_ms = *budget_ms;
      c.churn.iteration_budget = 0;
    }
    if (out) c.output_dir = *out;
  }
};

int run_config(const std::string& path, ExperimentKind fallback, std::optional<ExperimentKind> required,
               const Overrides& ov) {
  auto config = load_config(path, fallback);
  if (required && config.experiment != *required)
    throw ConfigError(path + ": experiment is " + to_string(config.experiment) + ", expected " +
                      to_string(*required));
  ov.apply(config);
  config.validate();
  run_experiment(config, std::cout);
  return 0;
}

void print_pool_info(const PoolInfo& info, bool pixels) {
  if (pixels) {
    std::cout << "kept pixels:      " << info.kept_pixels << '\n'
              << "derived before:   " << info.derived_before << '\n'
              << "derived after:    " << info.derived_after << '\n';
  }
  std::cout << "pool size:        " << info.pool_size << '\n' << "degree histogram:";
  for (std::size_t d = 0; d < info.degree_histogram.size(); ++d)
    std::cout << ' ' << d << ':' << info.degree_histogram[d];
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Churn training benchmarks"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  ov.attach(run);

  auto* bmlp = app.add_subcommand("baseline-mlp", "Train the raw-pixel MLP without churn");
  bmlp->add_option("config", config_path, "Config file")->required();
  ov.attach(bmlp);

  auto* breg = app.add_subcommand("baseline-regression", "Train on the whole multinomial pool");
  breg->add_option("config", config_path, "Config file")->required();
  ov.attach(breg);

  std::vector<std::string> dirs;
  std::string report_csv;
  auto* cmp = app.add_subcommand("compare", "Compare run directories");
  cmp->add_option("dirs", dirs, "Run directories")->required();
  cmp->add_option("--csv", report_csv, "Write the comparison CSV here");

  std::size_t n = 0, d = 0;
  std::string pixel_config;
  auto* pool = app.add_subcommand("pool-info", "Print pool statistics");
  auto* n_opt = pool->add_option("--n", n, "Base variables");
  auto* d_opt = pool->add_option("--degree,-d", d, "Maximum degree");
  auto* pix_opt = pool->add_option("--pixels", pixel_config, "Image experiment config file");
  n_opt->needs(d_opt);
  d_opt->needs(n_opt);
  pix_opt->excludes(n_opt);
  pix_opt->excludes(d_opt);
  std::optional<std::uint64_t> pool_seed;
  pool->add_option("--seed", pool_seed, "Seed for subsetting and the split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return run_config(config_path, ExperimentKind::Regression, std::nullopt, ov);
    if (*bmlp)
      return run_config(config_path, ExperimentKind::BaselineMlp, ExperimentKind::BaselineMlp, ov);
    if (*breg)
      return run_config(config_path, ExperimentKind::BaselineRegression,
                        ExperimentKind::BaselineRegression, ov);
    if (*cmp) {
      auto report = compare_runs(dirs);
      print_report(report, std::cout);
      if (!report_csv.empty()) write_report_csv(report, report_csv);
      return 0;
    }
    if (*pool) {
      if (!pixel_config.empty()) {
        auto config = load_config(pixel_config, ExperimentKind::MnistH20);
        if (!config.is_classification()) throw ConfigError("--pixels needs an image experiment");
        const auto seed = pool_seed.value_or(config.base_seed);
        const auto raw = load_idx(config.images_path, config.labels_path);
        auto reduced = reduce_mnist(raw, config.subset, seed, config.reduction, config.side);
        auto split = split_dataset(reduced, config.train_size, seed);
        print_pool_info(pixel_pool_info(split.first, config.coverage, config.derived_coverage), true);
      } else {
        if (!*n_opt) throw ConfigError("pool-info needs --n and --degree, or --pixels");
        print_pool_info(multinomial_pool_info(n, d), false);
      }
      return 0;
    }
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const IdxError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

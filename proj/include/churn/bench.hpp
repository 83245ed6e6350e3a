#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "churn/churn_engine.hpp"
#include "churn/data_io.hpp"

namespace churn {

enum class ExperimentKind { Regression, MnistH20, MnistH5, BaselineRegression, BaselineMlp };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& name);

/// Everything one experiment needs.  Defaults come from the experiment's
/// preset; a config file overrides individual keys.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Regression;
  ChurnConfig churn;

  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  std::string output_dir = "runs";
  std::size_t record_every = 0;  // baselines: iterations per metrics row (0: churn.iterations)

  // synthetic regression
  SynthOptions synth;
  bool standardize = true;

  // images
  std::string images_path = "data/mnist5k/images-idx3-ubyte";
  std::string labels_path = "data/mnist5k/labels-idx1-ubyte";
  std::size_t subset = 5000;
  std::size_t train_size = 4500;
  Reduction reduction = Reduction::Area;
  std::size_t side = 20;
  double coverage = 0.99;
  double derived_coverage = 0.99;
  bool seed_raw_pixels = true;

  bool is_baseline() const;
  bool is_classification() const;
  void validate() const;
};

ExperimentConfig preset(ExperimentKind kind);

/// Flat `key = value` lines, `#` comments.  `experiment` selects the preset
/// and must come before any other key; without it `fallback` is used.
/// Errors carry the line number.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>",
                              ExperimentKind fallback = ExperimentKind::Regression);
ExperimentConfig load_config(const std::string& path,
                             ExperimentKind fallback = ExperimentKind::Regression);

/// Applies one `key`/`value` pair; throws ConfigError on unknown keys or bad values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Prepared inputs for one trial.
struct TrialData {
  FeaturePool pool;
  std::unique_ptr<FeatureColumns> columns;
  Targets train;
  Targets test;
  std::vector<std::size_t> initial_features;
  std::size_t kept_pixels = 0;  // image experiments: deviation-filter survivors
};

/// Builds the pool, columns and targets for `seed`.  Image data is read
/// from disk once and cached in `raw_cache`.
TrialData prepare_trial(const ExperimentConfig& config, std::uint64_t seed,
                        std::shared_ptr<const RawImages>& raw_cache);

struct TrialOutcome {
  std::uint64_t seed = 0;
  RunMetrics metrics;
  FeaturePool pool;
  std::vector<std::size_t> final_active;
  AnyModel model;  // weights after the last record, aligned with final_active
};

TrialOutcome run_trial(const ExperimentConfig& config, std::uint64_t seed,
                       std::shared_ptr<const RawImages>& raw_cache);

/// Writes metrics.csv, timing.csv, summary.json and model.snapshot into `dir`.
void write_trial(const ExperimentConfig& config, const TrialOutcome& outcome,
                 const std::string& dir);

/// Runs trials base_seed .. base_seed+trials-1 into output_dir/seed-<s>.
std::vector<TrialOutcome> run_experiment(const ExperimentConfig& config, std::ostream& log);

struct ArmSummary {
  std::string name;
  std::string task;
  std::size_t trials = 0;
  double mean_train = 0.0;  // final train loss (regression) or accuracy
  double mean_test = 0.0;
  double mean_elapsed_ms = 0.0;
  double mean_iterations = 0.0;
};

struct TrialRow {
  std::string arm;
  std::uint64_t seed = 0;
  double train = 0.0;
  double test = 0.0;
  double elapsed_ms = 0.0;
  std::size_t iterations = 0;
};

struct ComparisonReport {
  std::vector<ArmSummary> arms;
  std::vector<TrialRow> trials;
};

/// Aggregates the summary.json files under each run directory.
ComparisonReport compare_runs(const std::vector<std::string>& run_dirs);

void print_report(const ComparisonReport& report, std::ostream& out);
void write_report_csv(const ComparisonReport& report, const std::string& path);

struct PoolInfo {
  std::size_t pool_size = 0;
  std::vector<std::size_t> degree_histogram;
  std::size_t kept_pixels = 0;       // image pools only
  std::size_t derived_before = 0;    // squares + pairs before filtering
  std::size_t derived_after = 0;
};

PoolInfo multinomial_pool_info(std::size_t n, std::size_t d);
PoolInfo pixel_pool_info(const ImageDataset& train, double coverage, double derived_coverage);

/// Deviation-filter survivors over the images, as ascending pixel positions.
std::vector<std::uint32_t> kept_pixel_positions(const Matrix& images, double coverage);

}  // namespace churn

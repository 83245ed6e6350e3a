#include "churn/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "churn/metrics_io.hpp"
#include "churn/spectral_gd.hpp"

namespace churn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Churn and model randomness must not replay the data generator's stream.
std::uint64_t algorithm_seed(std::uint64_t seed) { return splitmix64(seed); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ConfigError("bad value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean '" + value + "' for " + key);
}

std::vector<ScheduleEntry> parse_schedule(const std::string& value) {
  std::vector<ScheduleEntry> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("schedule entries look like step:eliminate, got '" + item + "'");
    out.push_back({parse_number<std::size_t>("schedule", trim(item.substr(0, colon))),
                   parse_number<std::size_t>("schedule", trim(item.substr(colon + 1)))});
  }
  return out;
}

double nan_if_missing(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nan("");
  return j[key].get<double>();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

StepRecord baseline_record(std::size_t index, std::size_t iterations) {
  StepRecord rec;
  rec.step = index;
  rec.iterations = iterations;
  return rec;
}

TrialOutcome run_baseline_regression(const ExperimentConfig& config, TrialData& data,
                                     std::uint64_t seed) {
  const auto& cc = config.churn;
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = data.pool.size();
  std::vector<std::size_t> all(p);
  std::iota(all.begin(), all.end(), 0);

  TrainBatch train, test;
  train.design.resize(static_cast<Eigen::Index>(data.columns->train_rows()),
                      static_cast<Eigen::Index>(p));
  test.design.resize(static_cast<Eigen::Index>(data.columns->test_rows()),
                     static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j)
    data.columns->fill(j, train.design.col(static_cast<Eigen::Index>(j)),
                       test.design.col(static_cast<Eigen::Index>(j)));
  train.targets = data.train.values;
  test.targets = data.test.values;

  std::mt19937_64 rng(algorithm_seed(seed));
  RegressionModel model = make_regression_model(p, cc.learning_rate, rng);
  const std::size_t every = config.record_every ? config.record_every : cc.iterations;
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  TrialOutcome out;
  out.seed = seed;
  auto& records = out.metrics.records;
  if (cc.wall_clock_budget_ms > 0.0) {
    std::size_t done = 0;
    for (;;) {
      const std::size_t chunk =
          cc.iteration_budget ? std::min(every, cc.iteration_budget - done) : every;
      train_regression(model, train, chunk);
      done += chunk;
      auto rec = baseline_record(records.size(), done);
      rec.train_loss = mse_loss(model, train);
      rec.test_loss = mse_loss(model, test);
      if (cc.iteration_budget && done >= cc.iteration_budget)
        rec.termination = Termination::IterationBudget;
      else if (elapsed() >= cc.wall_clock_budget_ms)
        rec.termination = Termination::WallClockBudget;
      rec.elapsed_ms = elapsed();
      records.push_back(rec);
      if (rec.termination != Termination::None) break;
    }
  } else {
    SpectralGradientDescent gd(train.design, train.targets);
    const Vector z0 = gd.to_eigenbasis(model.theta);
    const Matrix test_basis = test.design * gd.eigenvectors();  // X_test Q
    const double test_scale = 1.0 / (2.0 * static_cast<double>(test.design.rows()));
    Vector z = z0;
    for (std::size_t done = 0; done < cc.iteration_budget;) {
      done = std::min(done + every, cc.iteration_budget);
      z = gd.evolve(done, cc.learning_rate, z0);
      if (done >= cc.iteration_budget) model.theta = gd.from_eigenbasis(z);
      auto rec = baseline_record(records.size(), done);
      rec.train_loss = gd.loss_in_eigenbasis(z);
      rec.test_loss = (test_basis * z - test.targets).squaredNorm() * test_scale;
      if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.test_loss))
        throw DivergenceError(done, "baseline regression diverged by iteration " +
                                        std::to_string(done));
      if (done >= cc.iteration_budget) rec.termination = Termination::IterationBudget;
      rec.elapsed_ms = elapsed();
      records.push_back(rec);
    }
  }
  out.metrics.termination = records.back().termination;
  out.metrics.elapsed_ms = records.back().elapsed_ms;
  out.final_active = all;
  out.model = std::move(model);
  return out;
}

TrialOutcome run_baseline_mlp(const ExperimentConfig& config, TrialData& data,
                              std::uint64_t seed) {
  const auto& cc = config.churn;
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = data.pool.size();
  TrainBatch train, test;
  train.design.resize(static_cast<Eigen::Index>(data.columns->train_rows()),
                      static_cast<Eigen::Index>(p));
  test.design.resize(static_cast<Eigen::Index>(data.columns->test_rows()),
                     static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j)
    data.columns->fill(j, train.design.col(static_cast<Eigen::Index>(j)),
                       test.design.col(static_cast<Eigen::Index>(j)));
  train.labels = data.train.labels;
  test.labels = data.test.labels;

  std::mt19937_64 rng(algorithm_seed(seed));
  MlpModel model = make_mlp_model(p, cc.hidden, cc.classes, cc.lambda, cc.learning_rate, rng);
  const std::size_t every = config.record_every ? config.record_every : cc.iterations;
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  TrialOutcome out;
  out.seed = seed;
  auto& records = out.metrics.records;
  std::size_t done = 0;
  for (;;) {
    const std::size_t chunk =
        cc.iteration_budget ? std::min(every, cc.iteration_budget - done) : every;
    train_mlp(model, train, chunk);
    done += chunk;
    auto rec = baseline_record(records.size(), done);
    rec.train_loss = cross_entropy_loss(model, train);
    rec.train_accuracy = accuracy(model, train);
    rec.test_loss = cross_entropy_loss(model, test);
    rec.test_accuracy = accuracy(model, test);
    if (cc.iteration_budget && done >= cc.iteration_budget)
      rec.termination = Termination::IterationBudget;
    else if (cc.wall_clock_budget_ms > 0.0 && elapsed() >= cc.wall_clock_budget_ms)
      rec.termination = Termination::WallClockBudget;
    rec.elapsed_ms = elapsed();
    records.push_back(rec);
    if (rec.termination != Termination::None) break;
  }
  out.metrics.termination = records.back().termination;
  out.metrics.elapsed_ms = records.back().elapsed_ms;
  out.final_active.resize(p);
  std::iota(out.final_active.begin(), out.final_active.end(), 0);
  out.model = std::move(model);
  return out;
}

std::vector<fs::path> summaries_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (fs::exists(dir / "summary.json")) out.push_back(dir / "summary.json");
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && fs::exists(entry.path() / "summary.json"))
        out.push_back(entry.path() / "summary.json");
  std::sort(out.begin(), out.end());
  return out;
}

std::string arm_name(const fs::path& dir) {
  auto p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Regression: return "regression";
    case ExperimentKind::MnistH20: return "mnist-h20";
    case ExperimentKind::MnistH5: return "mnist-h5";
    case ExperimentKind::BaselineRegression: return "baseline-regression";
    case ExperimentKind::BaselineMlp: return "baseline-mlp";
  }
  return "regression";
}

ExperimentKind parse_experiment(const std::string& name) {
  for (auto k : {ExperimentKind::Regression, ExperimentKind::MnistH20, ExperimentKind::MnistH5,
                 ExperimentKind::BaselineRegression, ExperimentKind::BaselineMlp})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment '" + name + "'");
}

bool ExperimentConfig::is_baseline() const {
  return experiment == ExperimentKind::BaselineRegression ||
         experiment == ExperimentKind::BaselineMlp;
}

bool ExperimentConfig::is_classification() const {
  return churn.task == Task::Classification;
}

void ExperimentConfig::validate() const {
  if (trials == 0) throw ConfigError("trials must be at least 1");
  if (churn.iteration_budget == 0 && churn.wall_clock_budget_ms == 0.0 && is_baseline())
    throw ConfigError("baselines need an iteration or wall-clock budget");
  if (churn.wall_clock_budget_ms < 0.0) throw ConfigError("budget_ms must be positive");
  if (churn.iterations == 0) throw ConfigError("iterations must be positive");
  if (!(churn.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (is_classification()) {
    if (churn.hidden == 0) throw ConfigError("hidden must be at least 1");
    if (train_size == 0 || train_size >= subset)
      throw ConfigError("train_size must lie in [1, subset)");
    if (!(coverage > 0.0 && coverage <= 1.0) || !(derived_coverage > 0.0 && derived_coverage <= 1.0))
      throw ConfigError("coverage values must lie in (0, 1]");
  } else {
    if (synth.base_features == 0 || synth.degree == 0)
      throw ConfigError("base_features and degree must be positive");
    if (synth.train_samples == 0) throw ConfigError("train_samples must be positive");
    std::size_t pool_size = 1;
    for (std::size_t i = 1; i <= synth.degree; ++i)
      pool_size = pool_size * (synth.base_features + i) / i;
    if (synth.generating_features > pool_size)
      throw ConfigError("generating_features exceeds the pool size " + std::to_string(pool_size));
  }
}

ExperimentConfig preset(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  auto& cc = c.churn;
  switch (kind) {
    case ExperimentKind::Regression:
    case ExperimentKind::BaselineRegression:
      cc.task = Task::Regression;
      cc.stop_rule = StopRule::CandidateExhaustion;
      cc.active_size = 50;
      cc.iterations = 50;
      cc.eliminate = 10;
      cc.keep_best = 3;
      cc.schedule = {{100, 5}, {300, 1}};
      cc.learning_rate = 0.1;
      if (kind == ExperimentKind::BaselineRegression) {
        cc.learning_rate = 0.012;
        cc.iteration_budget = 33750;
      }
      break;
    case ExperimentKind::MnistH20:
    case ExperimentKind::MnistH5:
    case ExperimentKind::BaselineMlp:
      cc.task = Task::Classification;
      cc.stop_rule = StopRule::TrainAccuracy;
      cc.active_size = 400;
      cc.iterations = 20;
      cc.eliminate = 20;
      cc.keep_best = 3;
      cc.learning_rate = 1.0;
      cc.hidden = 20;
      cc.classes = 10;
      cc.lambda = 3.9;
      cc.accuracy_threshold = 0.965;
      if (kind == ExperimentKind::MnistH5) {
        cc.hidden = 5;
        cc.lambda = 2.0;
        cc.accuracy_threshold = 0.97;
      }
      if (kind == ExperimentKind::BaselineMlp) {
        cc.lambda = 3.0;
        cc.iteration_budget = 200;
      }
      break;
  }
  return c;
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto& cc = c.churn;
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] {
    try {
      std::size_t used = 0;
      double v = std::stod(value, &used);
      if (used != value.size()) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + value + "' for " + key);
    }
  };
  if (key == "trials") c.trials = size();
  else if (key == "seed") c.base_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "output") c.output_dir = value;
  else if (key == "record_every") c.record_every = size();
  else if (key == "budget_iterations") cc.iteration_budget = size();
  else if (key == "budget_ms") cc.wall_clock_budget_ms = real();
  else if (key == "active_size") cc.active_size = size();
  else if (key == "iterations") cc.iterations = size();
  else if (key == "eliminate") cc.eliminate = size();
  else if (key == "keep_best") cc.keep_best = size();
  else if (key == "schedule") cc.schedule = parse_schedule(value);
  else if (key == "accuracy_threshold") cc.accuracy_threshold = real();
  else if (key == "max_steps") cc.max_steps = size();
  else if (key == "learning_rate") cc.learning_rate = real();
  else if (key == "lambda") cc.lambda = real();
  else if (key == "hidden") cc.hidden = size();
  else if (key == "classes") cc.classes = size();
  else if (key == "base_features") c.synth.base_features = size();
  else if (key == "degree") c.synth.degree = size();
  else if (key == "generating_features") c.synth.generating_features = size();
  else if (key == "train_samples") c.synth.train_samples = size();
  else if (key == "test_samples") c.synth.test_samples = size();
  else if (key == "noise_sd") c.synth.noise_sd = real();
  else if (key == "standardize") c.standardize = parse_bool(key, value);
  else if (key == "images") c.images_path = value;
  else if (key == "labels") c.labels_path = value;
  else if (key == "subset") c.subset = size();
  else if (key == "train_size") c.train_size = size();
  else if (key == "reduction") {
    try {
      c.reduction = parse_reduction(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "side") c.side = size();
  else if (key == "coverage") c.coverage = real();
  else if (key == "derived_coverage") c.derived_coverage = real();
  else if (key == "seed_raw_pixels") c.seed_raw_pixels = parse_bool(key, value);
  else throw ConfigError("unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source,
                              ExperimentKind fallback) {
  ExperimentConfig config = preset(fallback);
  bool any_key = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "experiment") {
        if (any_key) throw ConfigError("experiment must be the first key");
        config = preset(parse_experiment(value));
      } else {
        set_config_value(config, key, value);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    any_key = true;
  }
  return config;
}

ExperimentConfig load_config(const std::string& path, ExperimentKind fallback) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, path, fallback);
}

std::vector<std::uint32_t> kept_pixel_positions(const Matrix& images, double coverage) {
  auto kept = deviation_filter(images, coverage);
  std::vector<std::uint32_t> out(kept.begin(), kept.end());
  std::sort(out.begin(), out.end());
  return out;
}

TrialData prepare_trial(const ExperimentConfig& config, std::uint64_t seed,
                        std::shared_ptr<const RawImages>& raw_cache) {
  TrialData data;
  if (!config.is_classification()) {
    auto ds = synth_regression(seed, config.synth);
    data.pool = generate_multinomial_pool(config.synth.base_features, config.synth.degree);
    data.train.values = std::move(ds.train_y);
    data.test.values = std::move(ds.test_y);
    data.columns = std::make_unique<FeatureColumns>(data.pool, std::move(ds.train_x),
                                                    std::move(ds.test_x), config.standardize);
    return data;
  }

  if (!raw_cache) raw_cache = std::make_shared<RawImages>(load_idx(config.images_path, config.labels_path));
  auto reduced = reduce_mnist(*raw_cache, config.subset, seed, config.reduction, config.side);
  auto [train, test] = split_dataset(reduced, config.train_size, seed);
  const auto image_size = config.side * config.side;

  if (config.experiment == ExperimentKind::BaselineMlp) {
    data.pool.base_dim = image_size;
    for (std::uint32_t p = 0; p < image_size; ++p) data.pool.descriptors.emplace_back(RawPixel{p});
    data.kept_pixels = image_size;
  } else {
    const auto kept = kept_pixel_positions(train.images, config.coverage);
    data.kept_pixels = kept.size();
    data.pool = filter_derived_features(generate_pixel_pool(kept, image_size), train.images,
                                        config.derived_coverage);
    if (config.seed_raw_pixels)
      for (std::size_t i = 0; i < data.pool.size(); ++i)
        if (std::holds_alternative<RawPixel>(data.pool[i]) &&
            data.initial_features.size() < config.churn.active_size)
          data.initial_features.push_back(i);
  }
  data.train.labels = std::move(train.labels);
  data.test.labels = std::move(test.labels);
  data.columns = std::make_unique<FeatureColumns>(data.pool, std::move(train.images),
                                                  std::move(test.images), false);
  return data;
}

TrialOutcome run_trial(const ExperimentConfig& config, std::uint64_t seed,
                       std::shared_ptr<const RawImages>& raw_cache) {
  config.validate();
  TrialData data = prepare_trial(config, seed, raw_cache);
  TrialOutcome outcome;
  if (config.experiment == ExperimentKind::BaselineRegression)
    outcome = run_baseline_regression(config, data, seed);
  else if (config.experiment == ExperimentKind::BaselineMlp)
    outcome = run_baseline_mlp(config, data, seed);
  else {
    ChurnConfig cc = config.churn;
    cc.seed = algorithm_seed(seed);
    cc.initial_features = data.initial_features;
    auto result = config.is_classification()
                      ? run_classification(data.pool, cc, *data.columns, std::move(data.train),
                                           std::move(data.test))
                      : run_regression(data.pool, cc, *data.columns, std::move(data.train),
                                       std::move(data.test));
    outcome.seed = seed;
    outcome.metrics = std::move(result.metrics);
    outcome.final_active = std::move(result.state.active);
    outcome.model = std::move(result.state.model);
  }
  outcome.pool = std::move(data.pool);
  return outcome;
}

void write_trial(const ExperimentConfig& config, const TrialOutcome& outcome,
                 const std::string& dir) {
  fs::create_directories(dir);
  export_metrics(outcome.metrics, outcome.pool, (fs::path(dir) / "metrics.csv").string());
  write_timing(outcome.metrics, (fs::path(dir) / "timing.csv").string());

  const auto& last = outcome.metrics.records.back();
  json s;
  s["experiment"] = to_string(config.experiment);
  s["task"] = config.is_classification() ? "classification" : "regression";
  s["seed"] = outcome.seed;
  s["termination"] = to_string(outcome.metrics.termination);
  s["records"] = outcome.metrics.records.size();
  s["iterations"] = last.iterations;
  s["pool_size"] = outcome.pool.size();
  s["active_size"] = outcome.final_active.size();
  s["final_train_loss"] = finite_or_null(last.train_loss);
  s["final_test_loss"] = finite_or_null(last.test_loss);
  s["final_train_accuracy"] = finite_or_null(last.train_accuracy);
  s["final_test_accuracy"] = finite_or_null(last.test_accuracy);
  s["elapsed_ms"] = outcome.metrics.elapsed_ms;
  std::vector<std::string> active;
  for (auto i : outcome.final_active) active.push_back(to_string(outcome.pool[i]));
  s["final_features"] = active;
  std::ofstream out(fs::path(dir) / "summary.json");
  if (!out) throw std::runtime_error("cannot write summary in " + dir);
  out << s.dump(2) << '\n';

  std::vector<FeatureDescriptor> descriptors;
  for (auto i : outcome.final_active) descriptors.push_back(outcome.pool[i]);
  std::visit([&](const auto& m) {
    save_snapshot((fs::path(dir) / "model.snapshot").string(), m, descriptors);
  }, outcome.model);
}

std::vector<TrialOutcome> run_experiment(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  std::shared_ptr<const RawImages> raw;
  std::vector<TrialOutcome> outcomes;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const auto seed = config.base_seed + t;
    auto outcome = run_trial(config, seed, raw);
    const auto dir = (fs::path(config.output_dir) / ("seed-" + std::to_string(seed))).string();
    write_trial(config, outcome, dir);
    const auto& last = outcome.metrics.records.back();
    log << to_string(config.experiment) << " seed " << seed << ": "
        << outcome.metrics.records.size() << " records, " << last.iterations << " iterations, "
        << (config.is_classification() ? "test accuracy " + format_number(last.test_accuracy)
                                       : "train/test MSE " + format_number(last.train_loss) +
                                             " / " + format_number(last.test_loss))
        << ", " << to_string(outcome.metrics.termination) << " -> " << dir << '\n';
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

ComparisonReport compare_runs(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
  ComparisonReport report;
  for (const auto& dir : run_dirs) {
    const auto files = summaries_in(dir);
    if (files.empty()) throw std::runtime_error("no summary.json under " + dir);
    ArmSummary arm;
    arm.name = arm_name(dir);
    for (const auto& f : files) {
      std::ifstream in(f);
      json s;
      try {
        in >> s;
      } catch (const json::exception& e) {
        throw std::runtime_error(f.string() + ": " + e.what());
      }
      const auto task = s.at("task").get<std::string>();
      if (arm.task.empty()) arm.task = task;
      if (task != arm.task || (!report.arms.empty() && task != report.arms.front().task))
        throw std::runtime_error("incompatible summaries: " + f.string() + " is " + task);
      TrialRow row;
      row.arm = arm.name;
      row.seed = s.at("seed").get<std::uint64_t>();
      const bool cls = task == "classification";
      row.train = nan_if_missing(s, cls ? "final_train_accuracy" : "final_train_loss");
      row.test = nan_if_missing(s, cls ? "final_test_accuracy" : "final_test_loss");
      row.elapsed_ms = s.at("elapsed_ms").get<double>();
      row.iterations = s.at("iterations").get<std::size_t>();
      arm.mean_train += row.train;
      arm.mean_test += row.test;
      arm.mean_elapsed_ms += row.elapsed_ms;
      arm.mean_iterations += static_cast<double>(row.iterations);
      ++arm.trials;
      report.trials.push_back(row);
    }
    const auto n = static_cast<double>(arm.trials);
    arm.mean_train /= n;
    arm.mean_test /= n;
    arm.mean_elapsed_ms /= n;
    arm.mean_iterations /= n;
    report.arms.push_back(arm);
  }
  return report;
}

void print_report(const ComparisonReport& report, std::ostream& out) {
  const bool cls = !report.arms.empty() && report.arms.front().task == "classification";
  const int label_w = 30, col_w = 16;
  out << std::left << std::setw(label_w) << "";
  for (const auto& a : report.arms) out << std::right << std::setw(col_w) << a.name;
  out << '\n';
  auto row = [&](const std::string& label, auto value) {
    out << std::left << std::setw(label_w) << label;
    for (const auto& a : report.arms) out << std::right << std::setw(col_w) << value(a);
    out << '\n';
  };
  auto fixed = [](double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
  };
  if (cls) {
    row("Average Train Accuracy", [&](const ArmSummary& a) { return fixed(100 * a.mean_train, 2) + "%"; });
    row("Average Test Accuracy", [&](const ArmSummary& a) { return fixed(100 * a.mean_test, 2) + "%"; });
  } else {
    row("Average Training Cost (MSE)", [&](const ArmSummary& a) { return fixed(a.mean_train, 4); });
    row("Average Testing Cost (MSE)", [&](const ArmSummary& a) { return fixed(a.mean_test, 4); });
  }
  row("Average Training Time (ms)", [&](const ArmSummary& a) { return fixed(a.mean_elapsed_ms, 0); });
  row("Average Iterations", [&](const ArmSummary& a) { return fixed(a.mean_iterations, 0); });
  row("Trials", [&](const ArmSummary& a) { return std::to_string(a.trials); });
}

void write_report_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "arm,seed,train,test,elapsed_ms,iterations\n";
  for (const auto& r : report.trials)
    out << r.arm << ',' << r.seed << ',' << format_number(r.train) << ','
        << format_number(r.test) << ',' << format_number(r.elapsed_ms) << ',' << r.iterations
        << '\n';
  for (const auto& a : report.arms)
    out << a.name << ",mean," << format_number(a.mean_train) << ',' << format_number(a.mean_test)
        << ',' << format_number(a.mean_elapsed_ms) << ',' << format_number(a.mean_iterations)
        << '\n';
}

PoolInfo multinomial_pool_info(std::size_t n, std::size_t d) {
  auto pool = generate_multinomial_pool(n, d);
  return {pool.size(), degree_histogram(pool), 0, 0, 0};
}

PoolInfo pixel_pool_info(const ImageDataset& train, double coverage, double derived_coverage) {
  const auto kept = kept_pixel_positions(train.images, coverage);
  const auto full = generate_pixel_pool(kept, train.width * train.height);
  const auto filtered = filter_derived_features(full, train.images, derived_coverage);
  PoolInfo info;
  info.pool_size = filtered.size();
  info.degree_histogram = degree_histogram(filtered);
  info.kept_pixels = kept.size();
  info.derived_before = full.size() - kept.size();
  info.derived_after = filtered.size() - kept.size();
  return info;
}

}  // namespace churn

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "churn/feature_pool.hpp"
#include "churn/models.hpp"
#include "churn/sampling.hpp"
#include "churn/usefulness.hpp"

namespace churn {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// From step `step` on, `eliminate` features are switched per step.
struct ScheduleEntry {
  std::size_t step = 0;
  std::size_t eliminate = 0;
};

enum class StopRule { CandidateExhaustion, TrainAccuracy };

enum class Termination {
  None,
  CandidatesExhausted,
  AccuracyReached,
  IterationBudget,
  WallClockBudget,
  MaxSteps,
};

std::string to_string(Termination t);
Termination parse_termination(std::string_view text);

enum class Task { Regression, Classification };

struct ChurnConfig {
  Task task = Task::Regression;
  std::size_t active_size = 50;       // K
  std::size_t iterations = 50;        // I, per training period
  std::size_t eliminate = 10;         // e before the first schedule entry
  std::size_t keep_best = 3;          // m
  std::vector<ScheduleEntry> schedule;
  StopRule stop_rule = StopRule::CandidateExhaustion;
  double accuracy_threshold = 1.0;    // tau, TrainAccuracy only
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;          // 0: 10 * |P| / e
  std::size_t iteration_budget = 0;   // 0: unlimited
  double wall_clock_budget_ms = 0.0;  // 0: unlimited

  double learning_rate = 0.1;
  double lambda = 0.0;
  std::size_t hidden = 20;
  std::size_t classes = 10;

  /// Pool indices placed in the initial active set before the random fill.
  std::vector<std::size_t> initial_features;

  void validate(std::size_t pool_size) const;
  std::size_t elimination_count(std::size_t step) const;
  std::size_t effective_max_steps(std::size_t pool_size) const;
};

enum class Membership : std::uint8_t { Fresh, Active, Eliminated };

using AnyModel = std::variant<RegressionModel, MlpModel>;

/// Builds feature columns for the train and test samples.  With
/// `standardize`, every non-constant, non-bias column is shifted and scaled
/// by its training mean and standard deviation.
class FeatureColumns {
 public:
  FeatureColumns(const FeaturePool& pool, Matrix train_samples, Matrix test_samples,
                 bool standardize);

  void fill(std::size_t pool_index, Eigen::Ref<Vector> train_out,
            Eigen::Ref<Vector> test_out) const;

  std::size_t train_rows() const { return static_cast<std::size_t>(train_.rows()); }
  std::size_t test_rows() const { return static_cast<std::size_t>(test_.rows()); }
  const FeaturePool& pool() const { return *pool_; }

 private:
  const FeaturePool* pool_;
  Matrix train_;
  Matrix test_;
  bool standardize_;
};

struct Targets {
  Vector values;            // regression
  std::vector<int> labels;  // classification
};

struct ChurnState {
  std::vector<std::size_t> active;            // F, pool indices, aligned with weights
  std::vector<Membership> membership;         // per pool index
  std::vector<double> elimination_score;      // per pool index, valid when Eliminated
  std::vector<std::size_t> best_eliminated;   // B, ascending pool index
  std::size_t step = 0;                       // k
  std::size_t current_e = 0;
  std::size_t iterations_done = 0;
  std::mt19937_64 rng;
  AnyModel model;
  TrainBatch train;
  TrainBatch test;

  /// C = ((P \ F) \ F-bar) u B, ascending pool index.
  std::vector<std::size_t> candidates() const;
  std::vector<std::size_t> eliminated() const;
  std::size_t candidate_count() const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t iterations = 0;  // cumulative
  double train_loss = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::size_t eliminate = 0;
  std::size_t candidates = 0;
  std::vector<std::size_t> removed;     // pool indices
  std::vector<double> removed_scores;
  std::vector<std::size_t> inserted;    // pool indices
  double elapsed_ms = 0.0;
  Termination termination = Termination::None;
};

struct RunMetrics {
  std::vector<StepRecord> records;
  Termination termination = Termination::None;
  double elapsed_ms = 0.0;
};

using Scorer = std::function<std::vector<UsefulnessScore>(const ChurnState&)>;

/// Regression relative-loss-change or MLP column norm, by model type.
std::vector<UsefulnessScore> default_scores(const ChurnState& state);

struct ChurnContext {
  const FeaturePool& pool;
  const ChurnConfig& config;
  const FeatureColumns& columns;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

/// Seeded initial active set (forced features first, then a uniform draw
/// without replacement) and freshly initialized weights.
ChurnState init_state(const ChurnContext& ctx, Targets train, Targets test);

/// One training period followed, unless a stop condition holds, by one
/// feature switch.  A record with termination != None made no switch.
StepRecord churn_step(ChurnState& state, const ChurnContext& ctx,
                      const Scorer& scorer = default_scores);

/// Overwrites the weights at `positions`: zero for regression, uniform
/// +-1/sqrt(K) input columns for the MLP.  Everything else is untouched.
void splice_weights(AnyModel& model, std::span<const std::size_t> positions,
                    std::mt19937_64& rng);

struct RunResult {
  ChurnState state;
  RunMetrics metrics;
};

/// Runs churn steps until a termination record.
RunMetrics run_churn(ChurnState& state, const ChurnContext& ctx,
                     const Scorer& scorer = default_scores);

RunResult run_regression(const FeaturePool& pool, const ChurnConfig& config,
                         const FeatureColumns& columns, Targets train, Targets test);

RunResult run_classification(const FeaturePool& pool, const ChurnConfig& config,
                             const FeatureColumns& columns, Targets train, Targets test);

}  // namespace churn

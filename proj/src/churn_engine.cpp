#include "churn/churn_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace churn {

namespace {

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

bool has_test(const TrainBatch& test) { return test.design.rows() > 0; }

void evaluate(const ChurnState& state, StepRecord& rec) {
  if (const auto* reg = std::get_if<RegressionModel>(&state.model)) {
    rec.train_loss = mse_loss(*reg, state.train);
    if (has_test(state.test)) rec.test_loss = mse_loss(*reg, state.test);
  } else {
    const auto& mlp = std::get<MlpModel>(state.model);
    rec.train_loss = cross_entropy_loss(mlp, state.train);
    rec.train_accuracy = accuracy(mlp, state.train);
    if (has_test(state.test)) {
      rec.test_loss = cross_entropy_loss(mlp, state.test);
      rec.test_accuracy = accuracy(mlp, state.test);
    }
  }
}

void train_period(ChurnState& state, std::size_t iterations) {
  std::visit(
      [&](auto& model) {
        using M = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<M, RegressionModel>)
          train_regression(model, state.train, iterations);
        else
          train_mlp(model, state.train, iterations);
      },
      state.model);
  state.iterations_done += iterations;
}

void load_column(ChurnState& state, const FeatureColumns& columns, std::size_t position,
                 std::size_t pool_index) {
  const auto col = static_cast<Eigen::Index>(position);
  if (has_test(state.test))
    columns.fill(pool_index, state.train.design.col(col), state.test.design.col(col));
  else {
    Vector scratch(0);
    columns.fill(pool_index, state.train.design.col(col), scratch);
  }
}

// m highest elimination scores; ties go to the smaller pool index.
std::vector<std::size_t> best_of_eliminated(const ChurnState& state, std::size_t m) {
  std::vector<std::size_t> eliminated = state.eliminated();
  const auto keep = std::min(m, eliminated.size());
  std::partial_sort(eliminated.begin(), eliminated.begin() + static_cast<std::ptrdiff_t>(keep),
                    eliminated.end(), [&](std::size_t a, std::size_t b) {
                      const double sa = state.elimination_score[a];
                      const double sb = state.elimination_score[b];
                      return sa != sb ? sa > sb : a < b;
                    });
  eliminated.resize(keep);
  std::sort(eliminated.begin(), eliminated.end());
  return eliminated;
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::None: return "none";
    case Termination::CandidatesExhausted: return "candidates_exhausted";
    case Termination::AccuracyReached: return "accuracy_reached";
    case Termination::IterationBudget: return "iteration_budget";
    case Termination::WallClockBudget: return "wall_clock_budget";
    case Termination::MaxSteps: return "max_steps";
  }
  return "none";
}

Termination parse_termination(std::string_view text) {
  for (auto t : {Termination::None, Termination::CandidatesExhausted,
                 Termination::AccuracyReached, Termination::IterationBudget,
                 Termination::WallClockBudget, Termination::MaxSteps})
    if (to_string(t) == text) return t;
  throw ConfigError("unknown termination '" + std::string(text) + "'");
}

void ChurnConfig::validate(std::size_t pool_size) const {
  if (active_size == 0) throw ConfigError("active set size K must be positive");
  if (active_size > pool_size)
    throw ConfigError("active set size K = " + std::to_string(active_size) +
                      " exceeds pool size " + std::to_string(pool_size));
  if (iterations == 0) throw ConfigError("iterations per period must be positive");
  if (eliminate == 0 || eliminate > active_size)
    throw ConfigError("elimination count must lie in [1, K]");
  std::size_t prev_step = 0, prev_e = eliminate;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& s = schedule[i];
    if ((i > 0 && s.step <= prev_step) || s.step == 0)
      throw ConfigError("schedule steps must be positive and strictly increasing");
    if (s.eliminate >= prev_e || s.eliminate == 0)
      throw ConfigError("schedule elimination counts must be positive and strictly decreasing");
    prev_step = s.step;
    prev_e = s.eliminate;
  }
  if (stop_rule == StopRule::TrainAccuracy && !(accuracy_threshold >= 0.0 && accuracy_threshold <= 1.0))
    throw ConfigError("accuracy threshold must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (task == Task::Classification && (hidden == 0 || classes < 2))
    throw ConfigError("classification needs hidden >= 1 and classes >= 2");
  if (wall_clock_budget_ms < 0.0) throw ConfigError("wall-clock budget must be non-negative");
  if (initial_features.size() > active_size)
    throw ConfigError("more initial features than active slots");
  std::vector<std::size_t> forced = initial_features;
  std::sort(forced.begin(), forced.end());
  if (std::adjacent_find(forced.begin(), forced.end()) != forced.end())
    throw ConfigError("duplicate initial feature");
  if (!forced.empty() && forced.back() >= pool_size)
    throw ConfigError("initial feature index outside pool");
}

std::size_t ChurnConfig::elimination_count(std::size_t step) const {
  std::size_t e = eliminate;
  for (const auto& s : schedule)
    if (step >= s.step) e = s.eliminate;
  return e;
}

std::size_t ChurnConfig::effective_max_steps(std::size_t pool_size) const {
  return max_steps ? max_steps : std::max<std::size_t>(1, 10 * pool_size / eliminate);
}

FeatureColumns::FeatureColumns(const FeaturePool& pool, Matrix train_samples,
                               Matrix test_samples, bool standardize)
    : pool_(&pool),
      train_(std::move(train_samples)),
      test_(std::move(test_samples)),
      standardize_(standardize) {
  if (static_cast<std::size_t>(train_.cols()) != pool.base_dim)
    throw FeatureError("training samples do not match the pool's base dimension");
  if (test_.rows() > 0 && test_.cols() != train_.cols())
    throw FeatureError("test samples do not match the pool's base dimension");
}

void FeatureColumns::fill(std::size_t pool_index, Eigen::Ref<Vector> train_out,
                          Eigen::Ref<Vector> test_out) const {
  const auto& desc = pool_->descriptors.at(pool_index);
  train_out = evaluate_column(desc, train_);
  const bool want_test = test_out.size() > 0 && test_.rows() > 0;
  if (want_test) test_out = evaluate_column(desc, test_);
  if (!standardize_ || std::holds_alternative<Bias>(desc)) return;
  const double n = static_cast<double>(train_out.size());
  const double mean = train_out.mean();
  const double sd = std::sqrt((train_out.array() - mean).square().sum() / n);
  if (!(sd > 0.0)) return;
  train_out = (train_out.array() - mean) / sd;
  if (want_test) test_out = (test_out.array() - mean) / sd;
}

std::vector<std::size_t> ChurnState::candidates() const {
  std::vector<std::size_t> c;
  auto b = best_eliminated.begin();
  for (std::size_t i = 0; i < membership.size(); ++i) {
    while (b != best_eliminated.end() && *b < i) ++b;
    const bool in_best = b != best_eliminated.end() && *b == i;
    if (membership[i] == Membership::Fresh || in_best) c.push_back(i);
  }
  return c;
}

std::size_t ChurnState::candidate_count() const {
  const auto fresh = static_cast<std::size_t>(
      std::count(membership.begin(), membership.end(), Membership::Fresh));
  return fresh + best_eliminated.size();
}

std::vector<std::size_t> ChurnState::eliminated() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < membership.size(); ++i)
    if (membership[i] == Membership::Eliminated) out.push_back(i);
  return out;
}

std::vector<UsefulnessScore> default_scores(const ChurnState& state) {
  if (const auto* reg = std::get_if<RegressionModel>(&state.model))
    return regression_usefulness_all(*reg, state.train);
  return mlp_usefulness_all(std::get<MlpModel>(state.model));
}

ChurnState init_state(const ChurnContext& ctx, Targets train, Targets test) {
  const auto& config = ctx.config;
  const auto pool_size = ctx.pool.size();
  config.validate(pool_size);
  if (&ctx.columns.pool() != &ctx.pool) throw ConfigError("feature columns built for another pool");

  ChurnState state;
  state.rng.seed(config.seed);
  state.membership.assign(pool_size, Membership::Fresh);
  state.elimination_score.assign(pool_size, 0.0);
  state.current_e = config.elimination_count(0);

  state.active = config.initial_features;
  for (auto i : state.active) state.membership[i] = Membership::Active;
  std::vector<std::size_t> rest;
  rest.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i)
    if (state.membership[i] == Membership::Fresh) rest.push_back(i);
  for (auto i : draw_without_replacement(std::move(rest), config.active_size - state.active.size(),
                                         state.rng)) {
    state.active.push_back(i);
    state.membership[i] = Membership::Active;
  }

  const auto k = config.active_size;
  if (config.task == Task::Regression) {
    if (static_cast<std::size_t>(train.values.size()) != ctx.columns.train_rows())
      throw ConfigError("training targets do not match training samples");
    state.model = make_regression_model(k, config.learning_rate, state.rng);
  } else {
    if (train.labels.size() != ctx.columns.train_rows())
      throw ConfigError("training labels do not match training samples");
    state.model = make_mlp_model(k, config.hidden, config.classes, config.lambda,
                                 config.learning_rate, state.rng);
  }

  const auto kk = static_cast<Eigen::Index>(k);
  state.train.design.resize(static_cast<Eigen::Index>(ctx.columns.train_rows()), kk);
  state.train.targets = std::move(train.values);
  state.train.labels = std::move(train.labels);
  state.test.design.resize(static_cast<Eigen::Index>(ctx.columns.test_rows()), kk);
  state.test.targets = std::move(test.values);
  state.test.labels = std::move(test.labels);
  for (std::size_t pos = 0; pos < k; ++pos) load_column(state, ctx.columns, pos, state.active[pos]);
  return state;
}

void splice_weights(AnyModel& model, std::span<const std::size_t> positions,
                    std::mt19937_64& rng) {
  if (auto* reg = std::get_if<RegressionModel>(&model)) {
    for (auto p : positions) {
      if (p >= reg->feature_count()) throw ModelError("splice position out of range");
      reg->theta[static_cast<Eigen::Index>(p)] = 0.0;
    }
    return;
  }
  auto& mlp = std::get<MlpModel>(model);
  const double r = 1.0 / std::sqrt(static_cast<double>(mlp.feature_count()));
  std::uniform_real_distribution<double> u(-r, r);
  for (auto p : positions) {
    if (p >= mlp.feature_count()) throw ModelError("splice position out of range");
    auto col = mlp.w_in.col(static_cast<Eigen::Index>(p));
    for (Eigen::Index h = 0; h < col.size(); ++h) col[h] = u(rng);
  }
}

StepRecord churn_step(ChurnState& state, const ChurnContext& ctx, const Scorer& scorer) {
  const auto& config = ctx.config;
  StepRecord rec;
  rec.step = state.step;
  rec.eliminate = state.current_e;

  std::size_t period = config.iterations;
  if (config.iteration_budget) period = std::min(period, config.iteration_budget - state.iterations_done);
  train_period(state, period);
  rec.iterations = state.iterations_done;
  evaluate(state, rec);

  const auto c_count = state.candidate_count();
  rec.candidates = c_count;
  if (config.stop_rule == StopRule::TrainAccuracy && rec.train_accuracy >= config.accuracy_threshold)
    rec.termination = Termination::AccuracyReached;
  else if (config.iteration_budget && state.iterations_done >= config.iteration_budget)
    rec.termination = Termination::IterationBudget;
  else if (config.wall_clock_budget_ms > 0.0 &&
           elapsed_since(ctx.started) >= config.wall_clock_budget_ms)
    rec.termination = Termination::WallClockBudget;
  else if (state.step >= config.effective_max_steps(ctx.pool.size()))
    rec.termination = Termination::MaxSteps;
  else if (c_count <= state.current_e)
    rec.termination = Termination::CandidatesExhausted;
  if (rec.termination != Termination::None) {
    rec.elapsed_ms = elapsed_since(ctx.started);
    return rec;
  }

  const auto scores = scorer(state);
  auto positions = rank_for_elimination(scores, state.current_e);
  std::sort(positions.begin(), positions.end());
  for (auto pos : positions) {
    const auto feature = state.active[pos];
    rec.removed.push_back(feature);
    rec.removed_scores.push_back(scores[pos].value);
    state.membership[feature] = Membership::Eliminated;
    state.elimination_score[feature] = scores[pos].value;
  }
  state.best_eliminated = best_of_eliminated(state, config.keep_best);

  auto candidates = state.candidates();
  rec.candidates = candidates.size();
  auto drawn = draw_without_replacement(std::move(candidates), state.current_e, state.rng);
  for (std::size_t j = 0; j < drawn.size(); ++j) {
    const auto feature = drawn[j];
    state.membership[feature] = Membership::Active;
    state.active[positions[j]] = feature;
    rec.inserted.push_back(feature);
  }
  std::erase_if(state.best_eliminated, [&](std::size_t f) {
    return state.membership[f] == Membership::Active;
  });

  splice_weights(state.model, positions, state.rng);
  for (std::size_t j = 0; j < positions.size(); ++j)
    load_column(state, ctx.columns, positions[j], drawn[j]);

  state.step += 1;
  state.current_e = config.elimination_count(state.step);
  rec.elapsed_ms = elapsed_since(ctx.started);
  return rec;
}

RunMetrics run_churn(ChurnState& state, const ChurnContext& ctx, const Scorer& scorer) {
  RunMetrics metrics;
  for (;;) {
    metrics.records.push_back(churn_step(state, ctx, scorer));
    if (metrics.records.back().termination != Termination::None) break;
  }
  metrics.termination = metrics.records.back().termination;
  metrics.elapsed_ms = metrics.records.back().elapsed_ms;
  return metrics;
}

RunResult run_regression(const FeaturePool& pool, const ChurnConfig& config,
                         const FeatureColumns& columns, Targets train, Targets test) {
  if (config.task != Task::Regression || config.stop_rule != StopRule::CandidateExhaustion)
    throw ConfigError("regression runs need task=regression and stop at candidate exhaustion");
  ChurnContext ctx{pool, config, columns};
  RunResult result{init_state(ctx, std::move(train), std::move(test)), {}};
  result.metrics = run_churn(result.state, ctx);
  return result;
}

RunResult run_classification(const FeaturePool& pool, const ChurnConfig& config,
                             const FeatureColumns& columns, Targets train, Targets test) {
  if (config.task != Task::Classification || config.stop_rule != StopRule::TrainAccuracy)
    throw ConfigError("classification runs need task=classification and an accuracy stop rule");
  if (!config.schedule.empty())
    throw ConfigError("classification runs keep the elimination count constant");
  ChurnContext ctx{pool, config, columns};
  RunResult result{init_state(ctx, std::move(train), std::move(test)), {}};
  result.metrics = run_churn(result.state, ctx);
  return result;
}

}  // namespace churn

#pragma once

// Step-by-step set-algebra simulation of the churn loop, run in lockstep with
// the engine.  The oracle keeps F, F-bar and B as plain containers, derives
// the expected eliminations and candidate set itself, and accepts the
// engine's random draw only after checking it is a valid draw from its own C.

#include <algorithm>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "churn/churn_engine.hpp"

namespace churn::testing {

struct MicroOutcome {
  bool ok = true;
  std::string failure;
  std::size_t steps = 0;
};

/// Scores that depend only on (feature, step), with frequent ties.
inline double micro_score(std::size_t feature, std::size_t step, std::uint64_t salt) {
  std::uint64_t x = (feature + 1) * 0x9e3779b97f4a7c15ULL ^ (step + 7) * 0xbf58476d1ce4e5b9ULL ^ salt;
  x ^= x >> 31;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 29;
  return static_cast<double>(x % 6);
}

class MicroRun {
 public:
  explicit MicroRun(std::uint64_t seed) : rng_(seed), salt_(seed * 31 + 5) {
    std::uniform_int_distribution<int> coin(0, 1);
    classification_ = coin(rng_) == 1;
    if (classification_) build_pixels();
    else build_regression();
    config_.seed = seed;
    config_.iterations = 1 + rng_() % 3;
    config_.keep_best = rng_() % 3;
    const std::size_t p = pool_.size();
    config_.active_size = 2 + rng_() % std::min<std::size_t>(9, p - 2);
    const std::size_t e_max = std::min<std::size_t>({3, config_.active_size});
    config_.eliminate = 1 + rng_() % e_max;
    config_.schedule.clear();
    std::size_t k = 0;
    for (std::size_t e = config_.eliminate - 1; e >= 1 && rng_() % 2; --e) {
      k += 1 + rng_() % 4;
      config_.schedule.push_back({k, e});
    }
    config_.max_steps = 40;
    columns_ = std::make_unique<FeatureColumns>(pool_, train_x_, test_x_, false);
  }

  MicroOutcome run() {
    MicroOutcome out;
    ChurnContext ctx{pool_, config_, *columns_};
    ChurnState state = init_state(ctx, targets_train_, targets_test_);

    F_ = state.active;
    if (std::set<std::size_t>(F_.begin(), F_.end()).size() != config_.active_size)
      return fail(out, "initial active set is not K distinct features");
    visited_.insert(F_.begin(), F_.end());

    AnyModel before;
    Scorer scorer = [&](const ChurnState& s) {
      before = s.model;
      std::vector<UsefulnessScore> v;
      for (std::size_t pos = 0; pos < s.active.size(); ++pos)
        v.push_back({pos, micro_score(s.active[pos], s.step, salt_)});
      return v;
    };

    for (std::size_t step = 0;; ++step) {
      const std::size_t e = expected_e(step);
      if (state.current_e != e) return fail(out, "current_e off schedule", step);
      const auto c_top = oracle_candidates();
      const auto rec = churn_step(state, ctx, scorer);

      if (rec.termination != Termination::None) {
        const bool exhausted = c_top.size() <= e;
        if (rec.termination == Termination::CandidatesExhausted && !exhausted)
          return fail(out, "engine stopped with |C| > e", step);
        if (rec.termination == Termination::MaxSteps && step < config_.max_steps)
          return fail(out, "early max_steps", step);
        if (rec.termination != Termination::CandidatesExhausted &&
            rec.termination != Termination::MaxSteps &&
            rec.termination != Termination::AccuracyReached)
          return fail(out, "unexpected termination", step);
        if (rec.termination == Termination::AccuracyReached &&
            !(rec.train_accuracy >= config_.accuracy_threshold))
          return fail(out, "accuracy stop below threshold", step);
        if (!rec.removed.empty() || !rec.inserted.empty())
          return fail(out, "terminal record made a swap", step);
        if (!compare(state, out, step)) return out;
        out.steps = step;
        return out;
      }
      if (c_top.size() <= e && config_.stop_rule == StopRule::CandidateExhaustion)
        return fail(out, "engine continued although |C| <= e", step);

      // Eliminate the e lowest (score, position).
      std::vector<std::size_t> order(F_.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = micro_score(F_[a], step, salt_), sb = micro_score(F_[b], step, salt_);
        return sa != sb ? sa < sb : a < b;
      });
      std::vector<std::size_t> positions(order.begin(), order.begin() + static_cast<long>(e));
      std::sort(positions.begin(), positions.end());
      std::vector<std::size_t> removed;
      for (auto pos : positions) removed.push_back(F_[pos]);
      if (rec.removed != removed) return fail(out, "eliminated features differ", step);
      for (std::size_t j = 0; j < removed.size(); ++j)
        if (rec.removed_scores[j] != micro_score(removed[j], step, salt_))
          return fail(out, "eliminated scores differ", step);

      for (auto f : removed) Fbar_[f] = micro_score(f, step, salt_);
      rebuild_best();
      std::set<std::size_t> in_f;
      for (std::size_t pos = 0; pos < F_.size(); ++pos)
        if (!std::binary_search(positions.begin(), positions.end(), pos)) in_f.insert(F_[pos]);
      std::set<std::size_t> c;
      for (std::size_t f = 0; f < pool_.size(); ++f)
        if (!in_f.count(f) && !Fbar_.count(f)) c.insert(f);
      c.insert(B_.begin(), B_.end());
      if (rec.candidates != c.size()) return fail(out, "|C| differs", step);

      if (rec.inserted.size() != e) return fail(out, "wrong number of inserted features", step);
      std::set<std::size_t> drawn(rec.inserted.begin(), rec.inserted.end());
      if (drawn.size() != e) return fail(out, "duplicate inserted features", step);
      for (auto f : drawn)
        if (!c.count(f)) return fail(out, "inserted feature outside C", step);

      for (std::size_t j = 0; j < e; ++j) {
        const auto f = rec.inserted[j];
        F_[positions[j]] = f;
        visited_.insert(f);
        if (B_.count(f)) {
          B_.erase(f);
          Fbar_.erase(f);
        }
      }

      if (!check_carry_over(before, state.model, positions, out, step)) return out;
      if (!compare(state, out, step)) return out;
      if (visited_.size() > pool_.size()) return fail(out, "visited more than |P|", step);
    }
  }

  const ChurnConfig& config() const { return config_; }

 private:
  void build_regression() {
    static const std::pair<int, int> shapes[] = {{2, 3}, {2, 5}, {3, 2}, {3, 3}, {4, 2},
                                                 {4, 3}, {5, 2}, {6, 2}, {2, 7}};
    const auto [n, d] = shapes[rng_() % std::size(shapes)];
    pool_ = generate_multinomial_pool(n, d);
    std::uniform_real_distribution<double> g(-1.0, 1.0);
    train_x_ = Matrix(10, n);
    test_x_ = Matrix(4, n);
    for (Eigen::Index i = 0; i < train_x_.size(); ++i) train_x_.data()[i] = g(rng_);
    for (Eigen::Index i = 0; i < test_x_.size(); ++i) test_x_.data()[i] = g(rng_);
    targets_train_.values = Vector(10);
    for (auto& v : targets_train_.values) v = g(rng_);
    targets_test_.values = Vector::Zero(4);
    config_.task = Task::Regression;
    config_.stop_rule = StopRule::CandidateExhaustion;
    config_.learning_rate = 0.05;
  }

  void build_pixels() {
    std::vector<std::uint32_t> all{0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::shuffle(all.begin(), all.end(), rng_);
    std::vector<std::uint32_t> kept(all.begin(), all.begin() + 3 + rng_() % 4);
    pool_ = generate_pixel_pool(kept, 9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    train_x_ = Matrix(12, 9);
    test_x_ = Matrix(4, 9);
    for (Eigen::Index i = 0; i < train_x_.size(); ++i) train_x_.data()[i] = u(rng_);
    for (Eigen::Index i = 0; i < test_x_.size(); ++i) test_x_.data()[i] = u(rng_);
    for (int i = 0; i < 12; ++i) targets_train_.labels.push_back(i % 3);
    for (int i = 0; i < 4; ++i) targets_test_.labels.push_back(i % 3);
    config_.task = Task::Classification;
    config_.stop_rule = StopRule::TrainAccuracy;
    config_.accuracy_threshold = 1.0;
    config_.hidden = 2;
    config_.classes = 3;
    config_.lambda = 0.1;
    config_.learning_rate = 0.5;
  }

  std::size_t expected_e(std::size_t step) const {
    std::size_t e = config_.eliminate;
    for (const auto& s : config_.schedule)
      if (step >= s.step) e = s.eliminate;
    return e;
  }

  std::set<std::size_t> oracle_candidates() const {
    std::set<std::size_t> in_f(F_.begin(), F_.end()), c;
    for (std::size_t f = 0; f < pool_.size(); ++f)
      if (!in_f.count(f) && !Fbar_.count(f)) c.insert(f);
    c.insert(B_.begin(), B_.end());
    return c;
  }

  void rebuild_best() {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (const auto& [f, s] : Fbar_) ranked.push_back({-s, f});
    std::sort(ranked.begin(), ranked.end());
    B_.clear();
    for (std::size_t i = 0; i < ranked.size() && i < config_.keep_best; ++i)
      B_.insert(ranked[i].second);
  }

  bool compare(const ChurnState& s, MicroOutcome& out, std::size_t step) {
    if (s.active != F_) return fail(out, "F differs", step), false;
    std::vector<std::size_t> fbar;
    for (const auto& [f, score] : Fbar_) fbar.push_back(f);
    if (s.eliminated() != fbar) return fail(out, "F-bar differs", step), false;
    if (std::vector<std::size_t>(B_.begin(), B_.end()) != s.best_eliminated)
      return fail(out, "B differs", step), false;
    const auto c = oracle_candidates();
    if (std::vector<std::size_t>(c.begin(), c.end()) != s.candidates())
      return fail(out, "C differs", step), false;
    if (s.candidate_count() != c.size()) return fail(out, "|C| differs", step), false;
    for (auto f : F_)
      if (Fbar_.count(f)) return fail(out, "F and F-bar intersect", step), false;
    if (B_.size() > config_.keep_best) return fail(out, "|B| > m", step), false;
    for (std::size_t pos = 0; pos < F_.size(); ++pos) {
      Vector tr(s.train.design.rows()), te(s.test.design.rows());
      columns_->fill(F_[pos], tr, te);
      if (s.train.design.col(static_cast<Eigen::Index>(pos)) != tr)
        return fail(out, "design column not aligned with F", step), false;
    }
    return true;
  }

  bool check_carry_over(const AnyModel& before, const AnyModel& after,
                        const std::vector<std::size_t>& positions, MicroOutcome& out,
                        std::size_t step) {
    auto removed = [&](std::size_t p) {
      return std::binary_search(positions.begin(), positions.end(), p);
    };
    if (const auto* rb = std::get_if<RegressionModel>(&before)) {
      const auto& ra = std::get<RegressionModel>(after);
      for (std::size_t p = 0; p < F_.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(p);
        if (removed(p) ? ra.theta[i] != 0.0 : ra.theta[i] != rb->theta[i])
          return fail(out, "regression carry-over broken", step), false;
      }
      return true;
    }
    const auto& mb = std::get<MlpModel>(before);
    const auto& ma = std::get<MlpModel>(after);
    if (ma.b_in != mb.b_in || ma.w_out != mb.w_out || ma.b_out != mb.b_out)
      return fail(out, "MLP non-input blocks changed by splice", step), false;
    const double r = 1.0 / std::sqrt(static_cast<double>(F_.size()));
    for (std::size_t p = 0; p < F_.size(); ++p) {
      const auto i = static_cast<Eigen::Index>(p);
      if (removed(p)) {
        if (ma.w_in.col(i).cwiseAbs().maxCoeff() > r)
          return fail(out, "spliced MLP column outside +-1/sqrt(K)", step), false;
      } else if (ma.w_in.col(i) != mb.w_in.col(i)) {
        return fail(out, "MLP carry-over broken", step), false;
      }
    }
    return true;
  }

  MicroOutcome& fail(MicroOutcome& out, const std::string& what, std::size_t step = 0) {
    std::ostringstream s;
    s << what << " at step " << step << " (K=" << config_.active_size
      << ", e=" << config_.eliminate << ", m=" << config_.keep_best << ", |P|=" << pool_.size()
      << (classification_ ? ", mlp" : ", regression") << ")";
    out.ok = false;
    out.failure = s.str();
    return out;
  }

  std::mt19937_64 rng_;
  std::uint64_t salt_;
  bool classification_ = false;
  FeaturePool pool_;
  Matrix train_x_, test_x_;
  Targets targets_train_, targets_test_;
  ChurnConfig config_;
  std::unique_ptr<FeatureColumns> columns_;

  std::vector<std::size_t> F_;
  std::map<std::size_t, double> Fbar_;
  std::set<std::size_t> B_;
  std::set<std::size_t> visited_;
};

}  // namespace churn::testing

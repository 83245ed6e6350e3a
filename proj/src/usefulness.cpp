#include "churn/usefulness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace churn {

namespace {

void check_index(std::size_t i, std::size_t k) {
  if (i >= k)
    throw ModelError("active index " + std::to_string(i) + " out of range for " +
                     std::to_string(k) + " features");
}

// Zeroing weight w shifts the residual r to r - w x, so the loss moves by
// (w^2 |x|^2 - 2 w r.x) / 2M; expanded to avoid subtracting two losses.
double relative_change(const Vector& residual, const Eigen::Ref<const Vector>& column,
                       double weight) {
  if (weight == 0.0) return 0.0;
  const double m = static_cast<double>(residual.size());
  return std::abs(weight * column.squaredNorm() - 2.0 * column.dot(residual)) / (2.0 * m);
}

}  // namespace

UsefulnessScore regression_usefulness(const RegressionModel& model, const TrainBatch& batch,
                                      std::size_t i) {
  check_index(i, model.feature_count());
  Vector residual = batch.design * model.theta - batch.targets;
  const auto col = static_cast<Eigen::Index>(i);
  return {i, relative_change(residual, batch.design.col(col), model.theta[col])};
}

std::vector<UsefulnessScore> regression_usefulness_all(const RegressionModel& model,
                                                       const TrainBatch& batch) {
  Vector residual = batch.design * model.theta - batch.targets;
  std::vector<UsefulnessScore> scores(model.feature_count());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    scores[i] = {i, relative_change(residual, batch.design.col(col), model.theta[col])};
  }
  return scores;
}

UsefulnessScore mlp_usefulness(const MlpModel& model, std::size_t i) {
  check_index(i, model.feature_count());
  return {i, model.w_in.col(static_cast<Eigen::Index>(i)).norm()};
}

std::vector<UsefulnessScore> mlp_usefulness_all(const MlpModel& model) {
  std::vector<UsefulnessScore> scores(model.feature_count());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = mlp_usefulness(model, i);
  return scores;
}

std::vector<std::size_t> rank_for_elimination(std::span<const UsefulnessScore> scores,
                                              std::size_t count) {
  if (count > scores.size())
    throw ModelError("cannot eliminate " + std::to_string(count) + " of " +
                     std::to_string(scores.size()) + " features");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    if (scores[a].value != scores[b].value) return scores[a].value < scores[b].value;
    return scores[a].feature_index < scores[b].feature_index;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                    order.end(), less);
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(scores[order[k]].feature_index);
  return out;
}

}  // namespace churn

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "churn/models.hpp"

namespace churn {

struct UsefulnessScore {
  std::size_t feature_index = 0;  // position in the active set
  double value = 0.0;
};

/// |L(theta with coordinate i zeroed) - L(theta)| / |theta_i|, or 0 when
/// theta_i is 0.  Evaluated on `batch` via the residual, O(M) per feature.
UsefulnessScore regression_usefulness(const RegressionModel& model, const TrainBatch& batch,
                                      std::size_t i);

/// Scores for every active feature, sharing one residual computation.
std::vector<UsefulnessScore> regression_usefulness_all(const RegressionModel& model,
                                                       const TrainBatch& batch);

/// Euclidean norm of input column i.
UsefulnessScore mlp_usefulness(const MlpModel& model, std::size_t i);

std::vector<UsefulnessScore> mlp_usefulness_all(const MlpModel& model);

/// Active indices of the `count` lowest scores, lowest first; ties go to the
/// smaller index.
std::vector<std::size_t> rank_for_elimination(std::span<const UsefulnessScore> scores,
                                              std::size_t count);

}  // namespace churn

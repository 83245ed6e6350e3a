#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "churn/feature_pool.hpp"

namespace churn {

/// Raised when training produces a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Design matrix plus targets.  Regression batches fill `targets`,
/// classification batches fill `labels`.
struct TrainBatch {
  Matrix design;
  Vector targets;
  std::vector<int> labels;

  std::size_t size() const { return static_cast<std::size_t>(design.rows()); }
  std::size_t feature_count() const { return static_cast<std::size_t>(design.cols()); }
};

struct RegressionModel {
  Vector theta;
  double learning_rate = 0.1;

  std::size_t feature_count() const { return static_cast<std::size_t>(theta.size()); }
};

/// One hidden sigmoid layer, softmax output.
struct MlpModel {
  Matrix w_in;   // hidden x features
  Vector b_in;   // hidden
  Matrix w_out;  // classes x hidden
  Vector b_out;  // classes
  double lambda = 0.0;
  double learning_rate = 1.0;

  std::size_t feature_count() const { return static_cast<std::size_t>(w_in.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w_in.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(w_out.rows()); }
};

struct MlpGradients {
  Matrix w_in;
  Vector b_in;
  Matrix w_out;
  Vector b_out;
};

/// Theta ~ uniform(-0.5, 0.5).
RegressionModel make_regression_model(std::size_t features, double learning_rate,
                                      std::mt19937_64& rng);

/// Weights ~ uniform(-r, r) with r = 1/sqrt(fan-in); biases zero.
MlpModel make_mlp_model(std::size_t features, std::size_t hidden, std::size_t classes,
                        double lambda, double learning_rate, std::mt19937_64& rng);

// Regression --------------------------------------------------------------

/// (1/2M) * sum_i (theta . x_i - y_i)^2
double mse_loss(const RegressionModel& model, const TrainBatch& batch);

/// Gradient of mse_loss with respect to theta.
Vector mse_gradient(const RegressionModel& model, const TrainBatch& batch);

/// `iterations` full-batch gradient-descent steps from the model's current
/// weights.  Throws DivergenceError (1-based iteration) on a non-finite loss.
void train_regression(RegressionModel& model, const TrainBatch& batch,
                      std::size_t iterations);

// MLP ---------------------------------------------------------------------

Vector mlp_forward(const MlpModel& model, std::span<const double> feature_row);

/// Row-wise class probabilities for every sample of `design`.
Matrix mlp_predict(const MlpModel& model, const Matrix& design);

/// Mean negative log-likelihood + (lambda / 2M) * (|w_in|^2 + |w_out|^2).
double cross_entropy_loss(const MlpModel& model, const TrainBatch& batch);

MlpGradients mlp_gradients(const MlpModel& model, const TrainBatch& batch);

void train_mlp(MlpModel& model, const TrainBatch& batch, std::size_t iterations);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const MlpModel& model, const TrainBatch& batch);

// Snapshots -----------------------------------------------------------------

/// Text dump: a header line, one descriptor string per active feature, then
/// the weight blocks.  See README for the layout.
void save_snapshot(const std::string& path, const RegressionModel& model,
                   std::span<const FeatureDescriptor> active);
void save_snapshot(const std::string& path, const MlpModel& model,
                   std::span<const FeatureDescriptor> active);

struct RegressionSnapshot {
  RegressionModel model;
  std::vector<FeatureDescriptor> active;
};
struct MlpSnapshot {
  MlpModel model;
  std::vector<FeatureDescriptor> active;
};

RegressionSnapshot load_regression_snapshot(const std::string& path, std::size_t base_dim);
MlpSnapshot load_mlp_snapshot(const std::string& path, std::size_t base_dim);

}  // namespace churn

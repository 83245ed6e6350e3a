#include "churn/models.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace churn {

namespace {

void check_regression(const RegressionModel& model, const TrainBatch& batch) {
  if (batch.size() == 0) throw ModelError("empty batch");
  if (batch.feature_count() != model.feature_count())
    throw ModelError("design has " + std::to_string(batch.feature_count()) +
                     " columns, model has " + std::to_string(model.feature_count()) +
                     " weights");
  if (static_cast<std::size_t>(batch.targets.size()) != batch.size())
    throw ModelError("design rows and target count differ");
}

void check_classification(const MlpModel& model, const TrainBatch& batch) {
  if (batch.size() == 0) throw ModelError("empty batch");
  if (batch.feature_count() != model.feature_count())
    throw ModelError("design has " + std::to_string(batch.feature_count()) +
                     " columns, model has " + std::to_string(model.feature_count()) +
                     " input columns");
  if (batch.labels.size() != batch.size())
    throw ModelError("design rows and label count differ");
  for (int label : batch.labels)
    if (label < 0 || static_cast<std::size_t>(label) >= model.classes())
      throw ModelError("label " + std::to_string(label) + " out of range");
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

Matrix hidden_activations(const MlpModel& model, const Matrix& design) {
  Matrix z = design * model.w_in.transpose();
  z.rowwise() += model.b_in.transpose();
  return sigmoid(z);
}

Matrix output_logits(const MlpModel& model, const Matrix& hidden) {
  Matrix z = hidden * model.w_out.transpose();
  z.rowwise() += model.b_out.transpose();
  return z;
}

// Row-wise log-softmax.
Matrix log_softmax(Matrix z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double top = z.row(i).maxCoeff();
    z.row(i).array() -= top;
    z.row(i).array() -= std::log(z.row(i).array().exp().sum());
  }
  return z;
}

double regularizer(const MlpModel& model, std::size_t samples) {
  return model.lambda / (2.0 * static_cast<double>(samples)) *
         (model.w_in.squaredNorm() + model.w_out.squaredNorm());
}

double data_term(const Matrix& log_probs, const std::vector<int>& labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    sum -= log_probs(static_cast<Eigen::Index>(i), labels[i]);
  return sum / static_cast<double>(labels.size());
}

template <class Derived>
void write_block(std::ostream& out, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

Matrix read_block(std::istream& in, const char* name, Eigen::Index rows,
                  Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c))) throw ModelError(std::string("snapshot truncated in ") + name);
  return m;
}

void expect_key(std::istream& in, const std::string& key) {
  std::string got;
  if (!(in >> got) || got != key)
    throw ModelError("snapshot: expected '" + key + "', found '" + got + "'");
}

std::vector<FeatureDescriptor> read_features(std::istream& in, std::size_t base_dim) {
  std::size_t count = 0;
  expect_key(in, "features");
  in >> count;
  std::vector<FeatureDescriptor> active;
  std::string line;
  std::getline(in, line);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ModelError("snapshot truncated in feature list");
    active.push_back(parse_descriptor(line, base_dim));
  }
  return active;
}

std::ofstream open_snapshot(const std::string& path, const char* kind,
                            std::span<const FeatureDescriptor> active) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write snapshot " + path);
  out << std::setprecision(17);
  out << "churn-snapshot 1 " << kind << '\n';
  out << "features " << active.size() << '\n';
  for (const auto& d : active) out << to_string(d) << '\n';
  return out;
}

std::ifstream open_and_check(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read snapshot " + path);
  std::string magic, got;
  int version = 0;
  in >> magic >> version >> got;
  if (magic != "churn-snapshot" || version != 1 || got != kind)
    throw ModelError("snapshot " + path + " is not a version-1 " + kind + " snapshot");
  return in;
}

}  // namespace

RegressionModel make_regression_model(std::size_t features, double learning_rate,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  RegressionModel model;
  model.learning_rate = learning_rate;
  model.theta.resize(static_cast<Eigen::Index>(features));
  for (auto& t : model.theta) t = u(rng);
  return model;
}

MlpModel make_mlp_model(std::size_t features, std::size_t hidden, std::size_t classes,
                        double lambda, double learning_rate, std::mt19937_64& rng) {
  if (features == 0 || hidden == 0 || classes == 0)
    throw ModelError("MLP dimensions must be positive");
  auto fill = [&rng](Matrix& m, std::size_t fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-r, r);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, c) = u(rng);
  };
  MlpModel model;
  model.lambda = lambda;
  model.learning_rate = learning_rate;
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto k = static_cast<Eigen::Index>(classes);
  model.w_in.resize(h, static_cast<Eigen::Index>(features));
  model.w_out.resize(k, h);
  fill(model.w_in, features);
  fill(model.w_out, hidden);
  model.b_in = Vector::Zero(h);
  model.b_out = Vector::Zero(k);
  return model;
}

double mse_loss(const RegressionModel& model, const TrainBatch& batch) {
  check_regression(model, batch);
  Vector residual = batch.design * model.theta - batch.targets;
  return residual.squaredNorm() / (2.0 * static_cast<double>(batch.size()));
}

Vector mse_gradient(const RegressionModel& model, const TrainBatch& batch) {
  check_regression(model, batch);
  Vector residual = batch.design * model.theta - batch.targets;
  return batch.design.transpose() * residual / static_cast<double>(batch.size());
}

void train_regression(RegressionModel& model, const TrainBatch& batch,
                      std::size_t iterations) {
  check_regression(model, batch);
  const double m = static_cast<double>(batch.size());
  Vector residual(batch.design.rows());
  for (std::size_t it = 1; it <= iterations; ++it) {
    residual.noalias() = batch.design * model.theta;
    residual -= batch.targets;
    const double loss = residual.squaredNorm() / (2.0 * m);
    if (!std::isfinite(loss))
      throw DivergenceError(it, "regression loss became non-finite at iteration " +
                                    std::to_string(it));
    model.theta.noalias() -= (model.learning_rate / m) * (batch.design.transpose() * residual);
  }
  if (!model.theta.allFinite())
    throw DivergenceError(iterations, "regression weights became non-finite");
}

Vector mlp_forward(const MlpModel& model, std::span<const double> feature_row) {
  if (feature_row.size() != model.feature_count())
    throw ModelError("feature row has " + std::to_string(feature_row.size()) +
                     " entries, model expects " + std::to_string(model.feature_count()));
  Eigen::Map<const Vector> x(feature_row.data(), static_cast<Eigen::Index>(feature_row.size()));
  Vector z1 = model.w_in * x + model.b_in;
  Vector h = (1.0 + (-z1.array()).exp()).inverse().matrix();
  Vector z2 = model.w_out * h + model.b_out;
  z2.array() -= z2.maxCoeff();
  Vector p = z2.array().exp().matrix();
  return p / p.sum();
}

Matrix mlp_predict(const MlpModel& model, const Matrix& design) {
  if (static_cast<std::size_t>(design.cols()) != model.feature_count())
    throw ModelError("design column count does not match model input width");
  return log_softmax(output_logits(model, hidden_activations(model, design)))
      .array()
      .exp()
      .matrix();
}

double cross_entropy_loss(const MlpModel& model, const TrainBatch& batch) {
  check_classification(model, batch);
  Matrix log_probs = log_softmax(output_logits(model, hidden_activations(model, batch.design)));
  return data_term(log_probs, batch.labels) + regularizer(model, batch.size());
}

namespace {

// Shared forward/backward pass; returns the loss at the incoming weights.
double backprop(const MlpModel& model, const TrainBatch& batch, MlpGradients& grad) {
  const double m = static_cast<double>(batch.size());
  Matrix hidden = hidden_activations(model, batch.design);
  Matrix log_probs = log_softmax(output_logits(model, hidden));
  const double loss = data_term(log_probs, batch.labels) + regularizer(model, batch.size());

  Matrix delta_out = log_probs.array().exp().matrix();
  for (std::size_t i = 0; i < batch.size(); ++i)
    delta_out(static_cast<Eigen::Index>(i), batch.labels[i]) -= 1.0;
  delta_out /= m;

  grad.w_out.noalias() = delta_out.transpose() * hidden;
  grad.w_out += (model.lambda / m) * model.w_out;
  grad.b_out = delta_out.colwise().sum().transpose();

  Matrix delta_hidden = (delta_out * model.w_out).array() * hidden.array() *
                        (1.0 - hidden.array());
  grad.w_in.noalias() = delta_hidden.transpose() * batch.design;
  grad.w_in += (model.lambda / m) * model.w_in;
  grad.b_in = delta_hidden.colwise().sum().transpose();
  return loss;
}

}  // namespace

MlpGradients mlp_gradients(const MlpModel& model, const TrainBatch& batch) {
  check_classification(model, batch);
  MlpGradients grad;
  backprop(model, batch, grad);
  return grad;
}

void train_mlp(MlpModel& model, const TrainBatch& batch, std::size_t iterations) {
  check_classification(model, batch);
  MlpGradients grad;
  for (std::size_t it = 1; it <= iterations; ++it) {
    const double loss = backprop(model, batch, grad);
    if (!std::isfinite(loss))
      throw DivergenceError(it, "cross-entropy loss became non-finite at iteration " +
                                    std::to_string(it));
    const double lr = model.learning_rate;
    model.w_in -= lr * grad.w_in;
    model.b_in -= lr * grad.b_in;
    model.w_out -= lr * grad.w_out;
    model.b_out -= lr * grad.b_out;
  }
  if (!model.w_in.allFinite() || !model.w_out.allFinite())
    throw DivergenceError(iterations, "MLP weights became non-finite");
}

double accuracy(const MlpModel& model, const TrainBatch& batch) {
  check_classification(model, batch);
  Matrix logits = output_logits(model, hidden_activations(model, batch.design));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    if (best == batch.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

void save_snapshot(const std::string& path, const RegressionModel& model,
                   std::span<const FeatureDescriptor> active) {
  if (active.size() != model.feature_count())
    throw ModelError("snapshot feature list does not match weight count");
  auto out = open_snapshot(path, "regression", active);
  out << "learning_rate " << model.learning_rate << '\n';
  out << "theta\n";
  write_block(out, model.theta.transpose());
}

void save_snapshot(const std::string& path, const MlpModel& model,
                   std::span<const FeatureDescriptor> active) {
  if (active.size() != model.feature_count())
    throw ModelError("snapshot feature list does not match input width");
  auto out = open_snapshot(path, "mlp", active);
  out << "learning_rate " << model.learning_rate << '\n';
  out << "lambda " << model.lambda << '\n';
  out << "hidden " << model.hidden() << '\n';
  out << "classes " << model.classes() << '\n';
  out << "w_in\n";
  write_block(out, model.w_in);
  out << "b_in\n";
  write_block(out, model.b_in.transpose());
  out << "w_out\n";
  write_block(out, model.w_out);
  out << "b_out\n";
  write_block(out, model.b_out.transpose());
}

RegressionSnapshot load_regression_snapshot(const std::string& path, std::size_t base_dim) {
  auto in = open_and_check(path, "regression");
  RegressionSnapshot snap;
  snap.active = read_features(in, base_dim);
  expect_key(in, "learning_rate");
  in >> snap.model.learning_rate;
  expect_key(in, "theta");
  snap.model.theta =
      read_block(in, "theta", 1, static_cast<Eigen::Index>(snap.active.size())).transpose();
  return snap;
}

MlpSnapshot load_mlp_snapshot(const std::string& path, std::size_t base_dim) {
  auto in = open_and_check(path, "mlp");
  MlpSnapshot snap;
  snap.active = read_features(in, base_dim);
  const auto k = static_cast<Eigen::Index>(snap.active.size());
  Eigen::Index hidden = 0, classes = 0;
  expect_key(in, "learning_rate");
  in >> snap.model.learning_rate;
  expect_key(in, "lambda");
  in >> snap.model.lambda;
  expect_key(in, "hidden");
  in >> hidden;
  expect_key(in, "classes");
  in >> classes;
  expect_key(in, "w_in");
  snap.model.w_in = read_block(in, "w_in", hidden, k);
  expect_key(in, "b_in");
  snap.model.b_in = read_block(in, "b_in", 1, hidden).transpose();
  expect_key(in, "w_out");
  snap.model.w_out = read_block(in, "w_out", classes, hidden);
  expect_key(in, "b_out");
  snap.model.b_out = read_block(in, "b_out", 1, classes).transpose();
  return snap;
}

}  // namespace churn

#include "churn/spectral_gd.hpp"

#include <cmath>
#include <string>

#include <lapacke.h>

#include "churn/models.hpp"

namespace churn {

SpectralGradientDescent::SpectralGradientDescent(const Matrix& design, const Vector& targets) {
  if (design.rows() == 0) throw ModelError("empty batch");
  if (design.rows() != targets.size()) throw ModelError("design rows and target count differ");
  const double m = static_cast<double>(design.rows());
  const auto p = design.cols();

  eigenvectors_ = Matrix::Zero(p, p);
  eigenvectors_.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), 1.0 / m);
  eigenvalues_.resize(p);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(p),
                     eigenvectors_.data(), static_cast<lapack_int>(p), eigenvalues_.data());
  if (info != 0) throw ModelError("eigendecomposition failed, dsyevd info " + std::to_string(info));

  Vector rhs = design.transpose() * targets / m;
  projected_rhs_ = eigenvectors_.transpose() * rhs;
  target_energy_ = targets.squaredNorm() / (2.0 * m);
}

Vector SpectralGradientDescent::to_eigenbasis(const Vector& theta) const {
  if (theta.size() != eigenvalues_.size()) throw ModelError("weights have wrong length");
  return eigenvectors_.transpose() * theta;
}

Vector SpectralGradientDescent::from_eigenbasis(const Vector& z) const {
  return eigenvectors_ * z;
}

Vector SpectralGradientDescent::evolve(std::size_t steps, double learning_rate,
                                       const Vector& z0) const {
  const double t = static_cast<double>(steps);
  Vector z(z0.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double step = learning_rate * eigenvalues_[i];
    double decay, drive;  // (1 - step)^t and sum_{s<t} (1 - step)^s
    if (step == 0.0) {
      decay = 1.0;
      drive = t;
    } else if (step < 1.0) {
      const double log_factor = std::log1p(-step);
      decay = std::exp(t * log_factor);
      drive = -std::expm1(t * log_factor) / step;
    } else {
      decay = std::pow(1.0 - step, t);
      drive = (1.0 - decay) / step;
    }
    z[i] = decay * z0[i] + learning_rate * drive * projected_rhs_[i];
  }
  if (!z.allFinite())
    throw DivergenceError(steps, "regression weights became non-finite after " +
                                     std::to_string(steps) + " iterations");
  return z;
}

Vector SpectralGradientDescent::weights_after(std::size_t steps, double learning_rate,
                                              const Vector& initial) const {
  return from_eigenbasis(evolve(steps, learning_rate, to_eigenbasis(initial)));
}

double SpectralGradientDescent::loss(const Vector& theta) const {
  return loss_in_eigenbasis(to_eigenbasis(theta));
}

double SpectralGradientDescent::loss_in_eigenbasis(const Vector& z) const {
  const double quadratic = 0.5 * (eigenvalues_.array() * z.array().square()).sum();
  return quadratic - z.dot(projected_rhs_) + target_energy_;
}

}  // namespace churn

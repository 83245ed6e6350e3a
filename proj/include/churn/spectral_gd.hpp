#pragma once

#include <cstddef>

#include "churn/feature_pool.hpp"

namespace churn {

/// Closed-form full-batch gradient descent on the MSE loss.
///
/// For L(theta) = (1/2M)|X theta - y|^2 the GD map is affine,
/// theta <- theta - lr (G theta - b) with G = X'X/M and b = X'y/M, so in the
/// eigenbasis of G every coordinate evolves independently:
///   z_t = (1 - lr*l)^t z_0 + c (1 - (1 - lr*l)^t) / l.
/// After one eigendecomposition any iterate costs O(p^2), which makes long
/// runs over thousands of features affordable.  Iterates agree with
/// train_regression up to rounding.
class SpectralGradientDescent {
 public:
  SpectralGradientDescent(const Matrix& design, const Vector& targets);

  std::size_t dimension() const { return static_cast<std::size_t>(eigenvalues_.size()); }

  /// Weights after `steps` GD steps from `initial`.  Throws DivergenceError
  /// when the iterate is not finite.
  Vector weights_after(std::size_t steps, double learning_rate, const Vector& initial) const;

  /// Training MSE of `theta`, evaluated from the cached Gram quantities.
  double loss(const Vector& theta) const;

  /// Coordinates in the eigenbasis and back.
  Vector to_eigenbasis(const Vector& theta) const;
  Vector from_eigenbasis(const Vector& z) const;
  const Matrix& eigenvectors() const { return eigenvectors_; }

  /// weights_after expressed in eigen-coordinates, O(p) per call.
  Vector evolve(std::size_t steps, double learning_rate, const Vector& z0) const;

  /// Training MSE for eigen-coordinates `z`, O(p).
  double loss_in_eigenbasis(const Vector& z) const;

  const Vector& eigenvalues() const { return eigenvalues_; }

 private:
  Matrix eigenvectors_;   // columns of Q
  Vector eigenvalues_;    // ascending
  Vector projected_rhs_;  // Q' b
  double target_energy_ = 0.0;  // y'y / 2M
};

}  // namespace churn

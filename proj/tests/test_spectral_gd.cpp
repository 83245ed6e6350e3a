#include <doctest.h>

#include <random>

#include "churn/spectral_gd.hpp"
#include "oracles.hpp"

using namespace churn;
using namespace churn::testing;

TEST_CASE("closed form agrees with iterative gradient descent") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = random_regression(rng, 40, 6);
    SpectralGradientDescent gd(inst.batch.design, inst.batch.targets);
    const Vector start = inst.model.theta;
    std::size_t done = 0;
    for (std::size_t steps : {1, 7, 50, 300}) {
      train_regression(inst.model, inst.batch, steps - done);
      done = steps;
      Vector closed = gd.weights_after(steps, inst.model.learning_rate, start);
      CHECK(relative_error(closed, inst.model.theta) < 1e-9);
      CHECK(gd.loss(closed) == doctest::Approx(mse_loss(inst.model, inst.batch)).epsilon(1e-9));
    }
  }
}

TEST_CASE("eigen-coordinate helpers compose") {
  std::mt19937_64 rng(22);
  auto inst = random_regression(rng, 30, 5);
  SpectralGradientDescent gd(inst.batch.design, inst.batch.targets);
  CHECK(gd.dimension() == 5);
  Vector z = gd.to_eigenbasis(inst.model.theta);
  CHECK(relative_error(gd.from_eigenbasis(z), inst.model.theta) < 1e-12);
  CHECK(gd.loss_in_eigenbasis(z) ==
        doctest::Approx(scalar_mse(inst.model.theta, inst.batch)).epsilon(1e-10));
  Vector w = gd.from_eigenbasis(gd.evolve(25, 0.05, z));
  CHECK(relative_error(w, gd.weights_after(25, 0.05, inst.model.theta)) < 1e-12);
  CHECK((gd.eigenvalues().array() >= -1e-12).all());
}

TEST_CASE("rank-deficient designs keep null-space components") {
  TrainBatch b;
  b.design = Matrix(4, 2);
  b.design << 1, 2, 2, 4, 3, 6, 4, 8;
  b.targets = Vector::LinSpaced(4, 1, 4);
  RegressionModel m{Vector(2), 0.01};
  m.theta << 0.3, -0.2;
  SpectralGradientDescent gd(b.design, b.targets);
  Vector closed = gd.weights_after(200, 0.01, m.theta);
  train_regression(m, b, 200);
  CHECK(relative_error(closed, m.theta) < 1e-9);
}

TEST_CASE("too large a step diverges") {
  std::mt19937_64 rng(23);
  auto inst = random_regression(rng, 20, 4);
  SpectralGradientDescent gd(inst.batch.design, inst.batch.targets);
  const double lr = 50.0 / gd.eigenvalues().maxCoeff();
  CHECK_THROWS_AS(gd.weights_after(100000, lr, inst.model.theta), DivergenceError);
}

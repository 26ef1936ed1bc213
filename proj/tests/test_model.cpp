#include <doctest.h>

#include "otfpf/model.hpp"
#include "oracles.hpp"

using namespace otfpf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("simulate_truth_obs: no noise, no drift keeps the state at m0") {
  const VectorXd m0 = Eigen::Vector2d(1.5, -0.5);
  const LinearGaussianModel model(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2),
                                  MatrixXd::Zero(2, 1), m0, SymMatrix::zero(2));
  const PathRecord path = simulate_truth_obs(model, TimeGrid(0.1, 50), 42);
  for (int k = 0; k <= 50; ++k)
    CHECK((path.x.row(k).transpose() - m0).norm() == 0.0);
}

TEST_CASE("simulate_truth_obs: observation noise has variance R/dt per rate") {
  // dz/dt - H x = sqrt(R/dt) * white noise.
  const double sigma = 0.8, dt = 0.01;
  const int steps = 100000;
  const LinearGaussianModel model(
      MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1),
      sigma * sigma * MatrixXd::Identity(2, 2), VectorXd::Zero(2),
      SymMatrix::identity(2));
  const PathRecord path = simulate_truth_obs(model, TimeGrid(dt, steps), 7);
  MatrixXd resid(steps, 2);
  for (int k = 0; k < steps; ++k)
    resid.row(k) = path.dz.row(k) / dt - path.x.row(k);
  const MatrixXd cov =
      resid.transpose() * resid / double(steps);  // mean is 0 by the model
  const MatrixXd expected = sigma * sigma / dt * MatrixXd::Identity(2, 2);
  CHECK((cov - expected).norm() <= 0.05 * expected.norm());
}

TEST_CASE("simulate_truth_obs: static model gives Z1 | X0 ~ N(X0, s^2 I)") {
  // Pooled chi-square over many seeds, two-sided at the 1% level.
  const int d = 2, n_seeds = 10000;
  const double sigma = 1.0;
  const LinearGaussianModel model(
      MatrixXd::Zero(d, d), MatrixXd::Identity(d, d), MatrixXd::Zero(d, 1),
      sigma * sigma * MatrixXd::Identity(d, d), VectorXd::Zero(d),
      SymMatrix(sigma * sigma * MatrixXd::Identity(d, d)));
  const TimeGrid grid(0.01, 100);
  double stat = 0.0;
  for (int trial = 0; trial < n_seeds; ++trial) {
    const PathRecord path = simulate_truth_obs(model, grid, 11, trial);
    const VectorXd z1 = path.dz.colwise().sum().transpose();
    const VectorXd x0 = path.x.row(0).transpose();
    stat += (z1 - x0).squaredNorm() / (sigma * sigma);
  }
  const double dof = double(n_seeds) * d;
  CHECK(std::abs(stat - dof) <= 2.5758 * std::sqrt(2.0 * dof));
}

TEST_CASE("simulate_truth_obs: bit-reproducible, trial streams independent") {
  const auto model = oracles::random_model(300, 0, 2);
  const TimeGrid grid(0.05, 20);
  const PathRecord p1 = simulate_truth_obs(model, grid, 123, 4);
  const PathRecord p2 = simulate_truth_obs(model, grid, 123, 4);
  CHECK(p1.x == p2.x);
  CHECK(p1.dz == p2.dz);
  const PathRecord p3 = simulate_truth_obs(model, grid, 123, 5);
  CHECK(p1.x != p3.x);
  const PathRecord p4 = simulate_truth_obs(model, grid, 124, 4);
  CHECK(p1.x != p4.x);
}

TEST_CASE("simulate_truth_obs: deterministic drift follows exp(A t) to O(dt)") {
  const double a = -0.7, x0 = 2.0, t_end = 1.0;
  MatrixXd am(1, 1);
  am << a;
  VectorXd m0(1);
  m0 << x0;
  const LinearGaussianModel model(am, MatrixXd::Identity(1, 1),
                                  MatrixXd::Zero(1, 1), m0, SymMatrix::zero(1));
  auto end_error = [&](double dt) {
    const auto steps = static_cast<int64_t>(std::llround(t_end / dt));
    const PathRecord path = simulate_truth_obs(model, TimeGrid(dt, steps), 1);
    return std::abs(path.x(steps, 0) - x0 * std::exp(a * t_end));
  };
  CHECK(end_error(1e-3) <= 1e-3);
  CHECK(end_error(1e-3) / end_error(5e-4) == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("model validation") {
  MatrixXd bad_r(1, 1);
  bad_r << -1.0;
  CHECK_THROWS_AS(LinearGaussianModel(MatrixXd::Zero(1, 1),
                                      MatrixXd::Identity(1, 1),
                                      MatrixXd::Zero(1, 1), bad_r,
                                      VectorXd::Zero(1), SymMatrix::identity(1)),
                  ConfigError);
  CHECK_THROWS_AS(LinearGaussianModel(MatrixXd::Zero(2, 2),
                                      MatrixXd::Identity(3, 3),
                                      MatrixXd::Zero(2, 1), VectorXd::Zero(2),
                                      SymMatrix::identity(2)),
                  ConfigError);
  CHECK_THROWS_AS(TimeGrid(0.0, 10), ConfigError);
  CHECK_THROWS_AS(TimeGrid(0.1, 0), ConfigError);
}

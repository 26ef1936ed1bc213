#include "otfpf/kalman.hpp"

#include "otfpf/errors.hpp"

namespace otfpf {

SymMatrix riccati_rk4_step(const LinearGaussianModel& model,
                           const SymMatrix& cov, double dt) {
  const Eigen::MatrixXd k1 = ricc_rhs(model, cov).mat();
  const Eigen::MatrixXd k2 =
      ricc_rhs(model, SymMatrix(cov.mat() + 0.5 * dt * k1)).mat();
  const Eigen::MatrixXd k3 =
      ricc_rhs(model, SymMatrix(cov.mat() + 0.5 * dt * k2)).mat();
  const Eigen::MatrixXd k4 =
      ricc_rhs(model, SymMatrix(cov.mat() + dt * k3)).mat();
  return SymMatrix(cov.mat() + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

GaussianBelief kalman_step(const LinearGaussianModel& model,
                           const GaussianBelief& belief,
                           const Eigen::VectorXd& dz, double dt) {
  const Eigen::MatrixXd gain = kalman_gain(model, belief.cov);
  GaussianBelief next;
  next.mean = belief.mean + model.a() * belief.mean * dt +
              gain * (dz - model.h() * belief.mean * dt);
  next.cov = riccati_rk4_step(model, belief.cov, dt);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(next.cov.mat(),
                                                    Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!next.mean.allFinite() || !es.eigenvalues().allFinite() ||
      es.eigenvalues().minCoeff() < -1e-8 * lmax)
    throw NumericalBlowup(
        "kalman_step: covariance lost PSD; reduce the step size");
  return next;
}

SteadyState solve_are(const LinearGaussianModel& model) {
  const int d = model.state_dim();
  SymMatrix sigma = SymMatrix::identity(d);
  const double a_scale = model.a().norm();
  const double hh_scale = model.ht_rinv_h().norm();

  constexpr int64_t kMaxSteps = 10'000'000;
  bool converged = false;
  for (int64_t it = 0; it < kMaxSteps; ++it) {
    const double res = ricc_rhs(model, sigma).mat().norm();
    if (res <= 1e-10 * (1.0 + sigma.mat().norm())) {
      converged = true;
      break;
    }
    // Step size from the local Lipschitz scale keeps RK4 stable.
    const double dt =
        1.0 / (1.0 + 2.0 * a_scale + 2.0 * sigma.mat().norm() * hh_scale);
    sigma = riccati_rk4_step(model, sigma, dt);
    if (!sigma.mat().allFinite())
      throw AREDivergence("solve_are: Riccati flow diverged");
  }
  if (!converged)
    throw AREDivergence("solve_are: iteration cap reached; the model is "
                        "likely not detectable/stabilizable");

  const Eigen::MatrixXd closed_loop =
      model.a() - sigma.mat() * model.ht_rinv_h();
  Eigen::EigenSolver<Eigen::MatrixXd> es(closed_loop, false);
  const double lambda0 = -es.eigenvalues().real().maxCoeff();
  if (!(lambda0 > 0.0))
    throw AREDivergence("solve_are: closed loop A - Sigma_inf H^T R^{-1} H "
                        "is not Hurwitz");
  return SteadyState{sigma, lambda0};
}

}  // namespace otfpf

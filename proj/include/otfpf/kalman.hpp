#pragma once

#include <Eigen/Dense>

#include "otfpf/matrix_eq.hpp"
#include "otfpf/model.hpp"

namespace otfpf {

// Gaussian state of the exact filter (conditional mean and covariance).
struct GaussianBelief {
  Eigen::VectorXd mean;
  SymMatrix cov;
};

// Steady state of the covariance equation: ARE solution and the spectral
// stability margin lambda0 of A - Sigma_inf H^T R^{-1} H.
struct SteadyState {
  SymMatrix sigma_inf;
  double lambda0 = 0.0;
};

// Kalman gain K = Sigma H^T R^{-1}; shared by the exact filter and all
// particle filter variants.
inline Eigen::MatrixXd kalman_gain(const LinearGaussianModel& model,
                                   const SymMatrix& cov) {
  return cov.mat() * model.ht_rinv();
}

// One RK4 step of dS/dt = Ricc(S).
SymMatrix riccati_rk4_step(const LinearGaussianModel& model,
                           const SymMatrix& cov, double dt);

// One filter step: mean by Euler with the gain frozen over the step,
//   m' = m + A m dt + K (dz - H m dt),
// covariance by one RK4 step of the Riccati equation.
// Throws NumericalBlowup if the covariance loses positive semidefiniteness.
GaussianBelief kalman_step(const LinearGaussianModel& model,
                           const GaussianBelief& belief,
                           const Eigen::VectorXd& dz, double dt);

// Solves Ricc(Sigma) = 0 by integrating the differential Riccati equation
// from the identity until the residual drops below 1e-10 relative, and
// computes lambda0 from the closed-loop spectrum.  Throws AREDivergence if
// the iteration cap is reached or the closed loop is not Hurwitz (the model
// is then likely not detectable/stabilizable).
SteadyState solve_are(const LinearGaussianModel& model);

}  // namespace otfpf

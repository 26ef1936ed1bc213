#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "otfpf/sym_matrix.hpp"

namespace otfpf {

// Linear-Gaussian hidden Markov model
//   dX_t = A X_t dt + sigma_b dB_t,          X_0 ~ N(m0, sigma0)
//   dZ_t = H X_t dt + R^{1/2} dW_t
// with B, W independent standard Wiener processes.
class LinearGaussianModel {
 public:
  LinearGaussianModel(Eigen::MatrixXd a, Eigen::MatrixXd h,
                      Eigen::MatrixXd sigma_b, Eigen::MatrixXd r,
                      Eigen::VectorXd m0, SymMatrix sigma0);

  // r defaults to the identity.
  LinearGaussianModel(Eigen::MatrixXd a, Eigen::MatrixXd h,
                      Eigen::MatrixXd sigma_b, Eigen::VectorXd m0,
                      SymMatrix sigma0);

  int state_dim() const { return static_cast<int>(a_.rows()); }
  int obs_dim() const { return static_cast<int>(h_.rows()); }
  int noise_dim() const { return static_cast<int>(sigma_b_.cols()); }

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& h() const { return h_; }
  const Eigen::MatrixXd& sigma_b() const { return sigma_b_; }
  const Eigen::MatrixXd& r() const { return r_; }
  const Eigen::VectorXd& m0() const { return m0_; }
  const SymMatrix& sigma0() const { return sigma0_; }

  // Cached products.
  const Eigen::MatrixXd& sigma_big() const { return sigma_big_; }  // sigma_b sigma_b^T
  const Eigen::MatrixXd& r_inv() const { return r_inv_; }
  const Eigen::MatrixXd& r_sqrt() const { return r_sqrt_; }
  const Eigen::MatrixXd& ht_rinv() const { return ht_rinv_; }      // H^T R^{-1}
  const Eigen::MatrixXd& ht_rinv_h() const { return ht_rinv_h_; }  // H^T R^{-1} H

 private:
  void validate_and_cache();

  Eigen::MatrixXd a_, h_, sigma_b_, r_;
  Eigen::VectorXd m0_;
  SymMatrix sigma0_;
  Eigen::MatrixXd sigma_big_, r_inv_, r_sqrt_, ht_rinv_, ht_rinv_h_;
};

// Uniform time grid t_k = k dt, k = 0..steps.
struct TimeGrid {
  double dt = 0.0;
  int64_t steps = 0;

  TimeGrid(double dt_, int64_t steps_) : dt(dt_), steps(steps_) {
    if (!(dt > 0.0)) throw ConfigError("TimeGrid: dt must be positive");
    if (steps <= 0) throw ConfigError("TimeGrid: steps must be positive");
  }
  double t(int64_t k) const { return static_cast<double>(k) * dt; }
  double horizon() const { return t(steps); }
};

// One simulated truth/observation path on a grid.
// x has steps+1 rows, dz has steps rows; dz[k] covers [t_k, t_{k+1}).
struct PathRecord {
  Eigen::MatrixXd x;
  Eigen::MatrixXd dz;
  uint64_t seed = 0;
};

// Euler-Maruyama simulation of the model on the grid.  All noise comes from
// counter-based substreams keyed by (seed, dim_tag, trial), so the result is
// bit-reproducible and paths for different trials are independent.
PathRecord simulate_truth_obs(const LinearGaussianModel& model,
                              const TimeGrid& grid, uint64_t seed,
                              uint64_t trial = 0);

}  // namespace otfpf

#pragma once

#include <string>

#include <Eigen/Dense>

#include "otfpf/kalman.hpp"
#include "otfpf/matrix_eq.hpp"
#include "otfpf/model.hpp"
#include "otfpf/rng.hpp"

namespace otfpf {

// The four interacting-particle filters.  All of them share the empirical
// gain K = Sigma^(N) H^T R^{-1}; they differ in how the deviation from the
// empirical mean is driven.
enum class FilterVariant {
  StochasticFPF,           // noisy particles, half-sum innovation
  DeterministicOptimalFPF, // sqrtRicc drift, no noise (needs SPD Sigma^(N))
  SingularOptimalFPF,      // deterministic + kernel-space noise, any rank
  PerturbedObsEnKF,        // independently perturbed observations
};

std::string to_string(FilterVariant v);
FilterVariant filter_variant_from_string(const std::string& name);

// N particles, one per row.
struct Ensemble {
  Eigen::MatrixXd particles;  // N x d
  FilterVariant variant = FilterVariant::StochasticFPF;

  Ensemble(Eigen::MatrixXd p, FilterVariant v);
  int n() const { return static_cast<int>(particles.rows()); }
  int dim() const { return static_cast<int>(particles.cols()); }
};

// Particles driven by the exact Kalman moments instead of the empirical
// ones; coupled to an Ensemble through shared initial particles and the
// shared observation path.
struct MeanFieldEnsemble {
  Eigen::MatrixXd particles;  // N x d

  int n() const { return static_cast<int>(particles.rows()); }
  int dim() const { return static_cast<int>(particles.cols()); }
};

// Ensemble mean and (N-1)-normalized covariance.
GaussianBelief empirical_moments(const Eigen::MatrixXd& particles);
inline GaussianBelief empirical_moments(const Ensemble& ens) {
  return empirical_moments(ens.particles);
}

// Draws N i.i.d. particles from the model prior.  With exact_moments the
// sample is affinely corrected so that its empirical mean and covariance
// equal (m0, Sigma0) exactly (requires N > d and an SPD sample covariance).
Eigen::MatrixXd sample_prior_particles(const LinearGaussianModel& model,
                                       int n, uint64_t seed, uint64_t trial,
                                       bool exact_moments = false);

// One Euler-Maruyama step of
//   dX^i = A X^i dt + sigma_b dB^i
//        + K^(N) (dZ - 1/2 (H X^i + H m^(N)) dt).
Ensemble step_stochastic_fpf(const LinearGaussianModel& model,
                             const Ensemble& ens, const Eigen::VectorXd& dz,
                             double dt, const ParticleRng& rng);

// One Euler step of the deterministic optimal-transport filter
//   dX^i = A m^(N) dt + K^(N) (dZ - H m^(N) dt)
//        + sqrtRicc(Sigma^(N)) (X^i - m^(N)) dt.
// Throws SingularCovariance when Sigma^(N) is rank deficient; callers that
// need that regime must declare the SingularOptimalFPF variant instead.
Ensemble step_det_fpf(const LinearGaussianModel& model, const Ensemble& ens,
                      const Eigen::VectorXd& dz, double dt);

// Singular-covariance extension: same as the deterministic step but with
// (G, sigma) from solve_singular_gain and kernel-space noise sigma dB^i.
// Coincides with step_det_fpf whenever Sigma^(N) is SPD.
Ensemble step_singular_fpf(const LinearGaussianModel& model,
                           const Ensemble& ens, const Eigen::VectorXd& dz,
                           double dt, const ParticleRng& rng);

// Ensemble Kalman filter with perturbed observations:
//   dX^i = A X^i dt + sigma_b dB^i + K^(N) (dZ - H X^i dt - R^{1/2} dW^i).
Ensemble step_perturbed_enkf(const LinearGaussianModel& model,
                             const Ensemble& ens, const Eigen::VectorXd& dz,
                             double dt, const ParticleRng& rng);

// Mean-field step: uses the exact belief (m_t, Sigma_t) on the same dz path,
//   dXbar^i = A m dt + K (dZ - H m dt) + sqrtRicc(Sigma) (Xbar^i - m) dt.
MeanFieldEnsemble step_mean_field(const LinearGaussianModel& model,
                                  const MeanFieldEnsemble& mfe,
                                  const GaussianBelief& belief,
                                  const Eigen::VectorXd& dz, double dt);

// Dispatch on the ensemble's declared variant.  No automatic escalation:
// a deterministic filter hitting a singular covariance is an error, not a
// silent switch of variant.
Ensemble step_filter(const LinearGaussianModel& model, const Ensemble& ens,
                     const Eigen::VectorXd& dz, double dt,
                     const ParticleRng& rng);

}  // namespace otfpf

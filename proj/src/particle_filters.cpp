#include "otfpf/particle_filters.hpp"

#include "otfpf/errors.hpp"

namespace otfpf {

std::string to_string(FilterVariant v) {
  switch (v) {
    case FilterVariant::StochasticFPF: return "StochasticFPF";
    case FilterVariant::DeterministicOptimalFPF: return "DeterministicOptimalFPF";
    case FilterVariant::SingularOptimalFPF: return "SingularOptimalFPF";
    case FilterVariant::PerturbedObsEnKF: return "PerturbedObsEnKF";
  }
  return "?";
}

FilterVariant filter_variant_from_string(const std::string& name) {
  if (name == "StochasticFPF") return FilterVariant::StochasticFPF;
  if (name == "DeterministicOptimalFPF")
    return FilterVariant::DeterministicOptimalFPF;
  if (name == "SingularOptimalFPF") return FilterVariant::SingularOptimalFPF;
  if (name == "PerturbedObsEnKF") return FilterVariant::PerturbedObsEnKF;
  throw ConfigError("variants: unknown filter variant '" + name + "'");
}

Ensemble::Ensemble(Eigen::MatrixXd p, FilterVariant v)
    : particles(std::move(p)), variant(v) {
  if (particles.rows() < 2)
    throw ConfigError("Ensemble: need at least 2 particles");
  if (!particles.allFinite())
    throw NumericalBlowup("Ensemble: non-finite particle state");
}

GaussianBelief empirical_moments(const Eigen::MatrixXd& particles) {
  const int n = static_cast<int>(particles.rows());
  GaussianBelief out;
  out.mean = particles.colwise().mean().transpose();
  const Eigen::MatrixXd centered =
      particles.rowwise() - out.mean.transpose();
  out.cov = SymMatrix((centered.transpose() * centered) / double(n - 1));
  return out;
}

Eigen::MatrixXd sample_prior_particles(const LinearGaussianModel& model,
                                       int n, uint64_t seed, uint64_t trial,
                                       bool exact_moments) {
  const int d = model.state_dim();
  const uint64_t dim_tag = static_cast<uint64_t>(d);
  const Eigen::MatrixXd prior_sqrt = spd_sqrt(model.sigma0());
  Eigen::MatrixXd particles(n, d);
  for (int i = 0; i < n; ++i) {
    const uint64_t stream = stream_id(StreamKind::ParticleInit, dim_tag,
                                      trial, static_cast<uint64_t>(i));
    particles.row(i) =
        (model.m0() + prior_sqrt * normal_vector(seed, stream, 0, d))
            .transpose();
  }
  if (exact_moments) {
    // Shift/rescale so the sample moments match (m0, Sigma0) exactly.
    const GaussianBelief emp = empirical_moments(particles);
    SpectralDecomp sd(emp.cov);
    if (!sd.is_spd())
      throw SingularCovariance(
          "sample_prior_particles: sample covariance singular; exact-moment "
          "initialization needs N > d");
    const Eigen::MatrixXd emp_inv_half =
        sd.eigenvectors * sd.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() *
        sd.eigenvectors.transpose();
    const Eigen::MatrixXd t = prior_sqrt * emp_inv_half;
    particles = (particles.rowwise() - emp.mean.transpose()) * t.transpose();
    particles.rowwise() += model.m0().transpose();
  }
  return particles;
}

Ensemble step_stochastic_fpf(const LinearGaussianModel& model,
                             const Ensemble& ens, const Eigen::VectorXd& dz,
                             double dt, const ParticleRng& rng) {
  const GaussianBelief emp = empirical_moments(ens);
  const Eigen::MatrixXd gain = kalman_gain(model, emp.cov);
  const Eigen::VectorXd hm = model.h() * emp.mean;
  const double sqrt_dt = std::sqrt(dt);
  const int q = model.noise_dim();

  Eigen::MatrixXd next(ens.n(), ens.dim());
  for (int i = 0; i < ens.n(); ++i) {
    const Eigen::VectorXd xi = ens.particles.row(i).transpose();
    next.row(i) =
        (xi + model.a() * xi * dt +
         sqrt_dt * model.sigma_b() * rng.process_noise(i, q) +
         gain * (dz - 0.5 * (model.h() * xi + hm) * dt))
            .transpose();
  }
  return Ensemble(std::move(next), ens.variant);
}

Ensemble step_det_fpf(const LinearGaussianModel& model, const Ensemble& ens,
                      const Eigen::VectorXd& dz, double dt) {
  const GaussianBelief emp = empirical_moments(ens);
  const SymMatrix drift_gain = sqrt_ricc(model, emp.cov);  // throws if singular
  const Eigen::MatrixXd gain = kalman_gain(model, emp.cov);
  const Eigen::VectorXd shift =
      model.a() * emp.mean * dt + gain * (dz - model.h() * emp.mean * dt);

  Eigen::MatrixXd next =
      ens.particles +
      (ens.particles.rowwise() - emp.mean.transpose()) *
          drift_gain.mat().transpose() * dt;
  next.rowwise() += shift.transpose();
  return Ensemble(std::move(next), ens.variant);
}

Ensemble step_singular_fpf(const LinearGaussianModel& model,
                           const Ensemble& ens, const Eigen::VectorXd& dz,
                           double dt, const ParticleRng& rng) {
  const GaussianBelief emp = empirical_moments(ens);
  const SingularGain sg = solve_singular_gain(model, emp.cov);
  const Eigen::MatrixXd gain = kalman_gain(model, emp.cov);
  const Eigen::VectorXd shift =
      model.a() * emp.mean * dt + gain * (dz - model.h() * emp.mean * dt);
  const double sqrt_dt = std::sqrt(dt);
  const int q = model.noise_dim();
  const bool noisy = sg.sigma.norm() > 0.0;

  Eigen::MatrixXd next =
      ens.particles + (ens.particles.rowwise() - emp.mean.transpose()) *
                          sg.g.mat().transpose() * dt;
  next.rowwise() += shift.transpose();
  if (noisy)
    for (int i = 0; i < ens.n(); ++i)
      next.row(i) += sqrt_dt * (sg.sigma * rng.process_noise(i, q)).transpose();
  return Ensemble(std::move(next), ens.variant);
}

Ensemble step_perturbed_enkf(const LinearGaussianModel& model,
                             const Ensemble& ens, const Eigen::VectorXd& dz,
                             double dt, const ParticleRng& rng) {
  const GaussianBelief emp = empirical_moments(ens);
  const Eigen::MatrixXd gain = kalman_gain(model, emp.cov);
  const double sqrt_dt = std::sqrt(dt);
  const int q = model.noise_dim();
  const int m = model.obs_dim();

  Eigen::MatrixXd next(ens.n(), ens.dim());
  for (int i = 0; i < ens.n(); ++i) {
    const Eigen::VectorXd xi = ens.particles.row(i).transpose();
    next.row(i) =
        (xi + model.a() * xi * dt +
         sqrt_dt * model.sigma_b() * rng.process_noise(i, q) +
         gain * (dz - model.h() * xi * dt -
                 sqrt_dt * model.r_sqrt() * rng.perturb_noise(i, m)))
            .transpose();
  }
  return Ensemble(std::move(next), ens.variant);
}

Ensemble step_filter(const LinearGaussianModel& model, const Ensemble& ens,
                     const Eigen::VectorXd& dz, double dt,
                     const ParticleRng& rng) {
  switch (ens.variant) {
    case FilterVariant::StochasticFPF:
      return step_stochastic_fpf(model, ens, dz, dt, rng);
    case FilterVariant::DeterministicOptimalFPF:
      return step_det_fpf(model, ens, dz, dt);
    case FilterVariant::SingularOptimalFPF:
      return step_singular_fpf(model, ens, dz, dt, rng);
    case FilterVariant::PerturbedObsEnKF:
      return step_perturbed_enkf(model, ens, dz, dt, rng);
  }
  throw ConfigError("step_filter: unknown variant");
}

MeanFieldEnsemble step_mean_field(const LinearGaussianModel& model,
                                  const MeanFieldEnsemble& mfe,
                                  const GaussianBelief& belief,
                                  const Eigen::VectorXd& dz, double dt) {
  const SymMatrix drift_gain = sqrt_ricc(model, belief.cov);
  const Eigen::MatrixXd gain = kalman_gain(model, belief.cov);
  const Eigen::VectorXd shift =
      model.a() * belief.mean * dt + gain * (dz - model.h() * belief.mean * dt);

  MeanFieldEnsemble next;
  next.particles = mfe.particles +
                   (mfe.particles.rowwise() - belief.mean.transpose()) *
                       drift_gain.mat().transpose() * dt;
  next.particles.rowwise() += shift.transpose();
  return next;
}

}  // namespace otfpf

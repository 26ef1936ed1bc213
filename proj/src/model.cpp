#include "otfpf/model.hpp"

#include "otfpf/rng.hpp"

namespace otfpf {

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd a, Eigen::MatrixXd h,
                                         Eigen::MatrixXd sigma_b,
                                         Eigen::MatrixXd r, Eigen::VectorXd m0,
                                         SymMatrix sigma0)
    : a_(std::move(a)),
      h_(std::move(h)),
      sigma_b_(std::move(sigma_b)),
      r_(std::move(r)),
      m0_(std::move(m0)),
      sigma0_(std::move(sigma0)) {
  validate_and_cache();
}

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd a, Eigen::MatrixXd h,
                                         Eigen::MatrixXd sigma_b,
                                         Eigen::VectorXd m0, SymMatrix sigma0)
    : LinearGaussianModel(
          std::move(a), h, std::move(sigma_b),
          Eigen::MatrixXd::Identity(h.rows(), h.rows()), std::move(m0),
          std::move(sigma0)) {}

void LinearGaussianModel::validate_and_cache() {
  const int d = static_cast<int>(a_.rows());
  const int m = static_cast<int>(h_.rows());
  if (a_.cols() != d) throw ConfigError("model.a: must be square");
  if (h_.cols() != d) throw ConfigError("model.h: must have d columns");
  if (sigma_b_.rows() != d) throw ConfigError("model.sigma_b: must have d rows");
  if (r_.rows() != m || r_.cols() != m)
    throw ConfigError("model.r: must be m x m");
  if (m0_.size() != d) throw ConfigError("model.m0: must have length d");
  if (sigma0_.dim() != d) throw ConfigError("model.sigma0: must be d x d");

  r_ = symmetrize(r_);
  const SpectralDecomp rd{SymMatrix(r_)};
  if (!rd.is_spd())
    throw ConfigError("model.r: observation noise covariance must be SPD");
  if (lambda_min(sigma0_) < -1e-12 * (1.0 + sigma0_.mat().norm()))
    throw ConfigError("model.sigma0: prior covariance must be PSD");

  sigma_big_ = symmetrize(sigma_b_ * sigma_b_.transpose());
  r_inv_ = rd.eigenvectors * rd.eigenvalues.cwiseInverse().asDiagonal() *
           rd.eigenvectors.transpose();
  r_inv_ = symmetrize(r_inv_);
  r_sqrt_ = rd.eigenvectors * rd.eigenvalues.cwiseSqrt().asDiagonal() *
            rd.eigenvectors.transpose();
  r_sqrt_ = symmetrize(r_sqrt_);
  ht_rinv_ = h_.transpose() * r_inv_;
  ht_rinv_h_ = symmetrize(ht_rinv_ * h_);
}

PathRecord simulate_truth_obs(const LinearGaussianModel& model,
                              const TimeGrid& grid, uint64_t seed,
                              uint64_t trial) {
  const int d = model.state_dim();
  const int m = model.obs_dim();
  const int q = model.noise_dim();
  const uint64_t dim_tag = static_cast<uint64_t>(d);
  const double sqrt_dt = std::sqrt(grid.dt);

  PathRecord rec;
  rec.seed = seed;
  rec.x.resize(grid.steps + 1, d);
  rec.dz.resize(grid.steps, m);

  const Eigen::MatrixXd prior_sqrt = spd_sqrt(model.sigma0());
  rec.x.row(0) =
      (model.m0() +
       prior_sqrt * normal_vector(
                        seed, stream_id(StreamKind::TruthInit, dim_tag, trial),
                        0, d))
          .transpose();

  const uint64_t proc_stream =
      stream_id(StreamKind::TruthProcess, dim_tag, trial);
  const uint64_t obs_stream = stream_id(StreamKind::ObsNoise, dim_tag, trial);
  for (int64_t k = 0; k < grid.steps; ++k) {
    const Eigen::VectorXd xk = rec.x.row(k).transpose();
    const uint32_t step = static_cast<uint32_t>(k);
    rec.dz.row(k) =
        (model.h() * xk * grid.dt +
         sqrt_dt * model.r_sqrt() * normal_vector(seed, obs_stream, step, m))
            .transpose();
    rec.x.row(k + 1) =
        (xk + model.a() * xk * grid.dt +
         sqrt_dt * model.sigma_b() * normal_vector(seed, proc_stream, step, q))
            .transpose();
  }
  return rec;
}

}  // namespace otfpf

#include "otfpf/matrix_eq.hpp"

#include "otfpf/errors.hpp"

namespace otfpf {

namespace {

void check_dims(const LinearGaussianModel& model, const SymMatrix& sigma,
                const char* op) {
  if (sigma.dim() != model.state_dim())
    throw ConfigError(std::string(op) + ": covariance dim does not match model");
}

}  // namespace

SymMatrix ricc_rhs(const LinearGaussianModel& model, const SymMatrix& sigma) {
  check_dims(model, sigma, "ricc_rhs");
  const Eigen::MatrixXd& s = sigma.mat();
  Eigen::MatrixXd out = model.a() * s;
  out += out.transpose().eval();  // A S + S A^T
  out += model.sigma_big();
  out -= s * model.ht_rinv_h() * s;
  return SymMatrix(out);
}

SymMatrix solve_lyapunov_spd(const SymMatrix& sigma, const SymMatrix& rhs) {
  if (rhs.dim() != sigma.dim())
    throw ConfigError("solve_lyapunov_spd: rhs dim does not match sigma");
  SpectralDecomp sd(sigma);
  if (!sd.is_spd())
    throw SingularCovariance(
        "solve_lyapunov_spd: sigma is not SPD; use solve_singular_gain");
  const Eigen::MatrixXd rt =
      sd.eigenvectors.transpose() * rhs.mat() * sd.eigenvectors;
  const int d = sd.dim();
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      g(i, j) = rt(i, j) / (sd.eigenvalues[i] + sd.eigenvalues[j]);
  return SymMatrix(sd.eigenvectors * g * sd.eigenvectors.transpose());
}

SymMatrix sqrt_ricc(const LinearGaussianModel& model, const SymMatrix& q) {
  return solve_lyapunov_spd(q, ricc_rhs(model, q));
}

Eigen::MatrixXd solve_omega(const LinearGaussianModel& model,
                            const SymMatrix& q) {
  check_dims(model, q, "solve_omega");
  SpectralDecomp sd(q);
  if (!sd.is_spd())
    throw SingularCovariance("solve_omega: q is not SPD");
  const int d = sd.dim();
  const Eigen::MatrixXd qinv = sd.eigenvectors *
                               sd.eigenvalues.cwiseInverse().asDiagonal() *
                               sd.eigenvectors.transpose();
  const Eigen::MatrixXd qhh = q.mat() * model.ht_rinv_h();
  const Eigen::MatrixXd sbqi = model.sigma_big() * qinv;
  Eigen::MatrixXd rhs = (model.a().transpose() - model.a()) +
                        0.5 * (qhh - qhh.transpose()) -
                        0.5 * (sbqi - sbqi.transpose());
  const Eigen::MatrixXd rt = sd.eigenvectors.transpose() * rhs * sd.eigenvectors;
  Eigen::MatrixXd w(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      w(i, j) = rt(i, j) * sd.eigenvalues[i] * sd.eigenvalues[j] /
                (sd.eigenvalues[i] + sd.eigenvalues[j]);
  Eigen::MatrixXd omega = sd.eigenvectors * w * sd.eigenvectors.transpose();
  return 0.5 * (omega - omega.transpose().eval());  // exactly skew
}

PseudoInverse pseudo_inverse(const SymMatrix& m) {
  SpectralDecomp sd(m);
  const int d = sd.dim();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd ones = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < sd.rank; ++i) {
    inv[i] = 1.0 / sd.eigenvalues[i];
    ones[i] = 1.0;
  }
  const Eigen::MatrixXd& v = sd.eigenvectors;
  PseudoInverse out;
  out.pinv = SymMatrix(v * inv.asDiagonal() * v.transpose());
  out.p_range = SymMatrix(v * ones.asDiagonal() * v.transpose());
  out.p_kernel = SymMatrix(Eigen::MatrixXd::Identity(d, d) -
                           out.p_range.mat());
  return out;
}

AffineMap optimal_gaussian_map(const Eigen::VectorXd& mx, const SymMatrix& sx,
                               const Eigen::VectorXd& my,
                               const SymMatrix& sy) {
  if (sx.dim() != sy.dim() || mx.size() != sx.dim() || my.size() != sy.dim())
    throw ConfigError("optimal_gaussian_map: dimension mismatch");
  SpectralDecomp dx(sx), dy(sy);
  if (!dx.is_spd() || !dy.is_spd())
    throw SingularCovariance(
        "optimal_gaussian_map: singular covariance has no transport map; "
        "use a stochastic coupling");
  const Eigen::MatrixXd sy_half = spd_sqrt(sy);
  const SymMatrix inner(sy_half * sx.mat() * sy_half);
  SpectralDecomp di(inner);
  const Eigen::MatrixXd inner_inv_half =
      di.eigenvectors * di.eigenvalues.cwiseMax(0.0).cwiseSqrt().cwiseInverse()
                            .asDiagonal() *
      di.eigenvectors.transpose();
  AffineMap map;
  map.f = SymMatrix(sy_half * inner_inv_half * sy_half);
  map.b = my - map.f.mat() * mx;
  return map;
}

SingularGain solve_singular_gain(const LinearGaussianModel& model,
                                 const SymMatrix& sigma) {
  check_dims(model, sigma, "solve_singular_gain");
  SpectralDecomp sd(sigma);
  const int d = sd.dim();
  const int r = sd.rank;
  const Eigen::MatrixXd& v = sd.eigenvectors;

  // sigma* = P_K sigma_b, expressed without forming P_K explicitly.
  Eigen::MatrixXd sb_basis = v.transpose() * model.sigma_b();  // d x q
  sb_basis.topRows(r).setZero();                               // keep kernel part
  SingularGain out;
  out.sigma = v * sb_basis;

  const Eigen::MatrixXd rhs =
      ricc_rhs(model, sigma).mat() -
      symmetrize(out.sigma * out.sigma.transpose());
  const Eigen::MatrixXd rt = v.transpose() * rhs * v;

  // Kernel-kernel block of the right-hand side vanishes analytically.
  const double kk_norm = rt.bottomRightCorner(d - r, d - r).norm();
  if (kk_norm > 1e-8 * rhs.norm() && kk_norm > 1e-12)
    throw InconsistentSingularSystem(
        "solve_singular_gain: kernel-kernel residual " +
        std::to_string(kk_norm) + "; rank estimate is unreliable");

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double li = i < r ? sd.eigenvalues[i] : 0.0;
      const double lj = j < r ? sd.eigenvalues[j] : 0.0;
      if (i < r || j < r) g(i, j) = rt(i, j) / (li + lj);
      // kernel-kernel block of G stays zero (free block, minimum norm)
    }
  }
  out.g = SymMatrix(v * g * v.transpose());
  return out;
}

}  // namespace otfpf

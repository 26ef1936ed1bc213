#pragma once

#include <Eigen/Dense>

#include "otfpf/model.hpp"
#include "otfpf/sym_matrix.hpp"

namespace otfpf {

// Dense symmetric-matrix equation solvers for the optimal-transport filter
// gains.  Everything works in the eigenbasis of the covariance, which keeps
// the results exactly symmetric (or exactly skew) by construction.

// Riccati right-hand side
//   Ricc(S) = A S + S A^T + sigma_b sigma_b^T - S H^T R^{-1} H S.
SymMatrix ricc_rhs(const LinearGaussianModel& model, const SymMatrix& sigma);

// Unique symmetric G with G S + S G = rhs, for S SPD.  In the eigenbasis of
// S the solution is G~_ij = rhs~_ij / (l_i + l_j).
// Throws SingularCovariance if S is not SPD (use solve_singular_gain).
SymMatrix solve_lyapunov_spd(const SymMatrix& sigma, const SymMatrix& rhs);

// sqrtRicc(Q): the unique symmetric solution of
//   sqrtRicc(Q) Q + Q sqrtRicc(Q) = Ricc(Q),
// the drift gain of the deterministic optimal-transport filter.
SymMatrix sqrt_ricc(const LinearGaussianModel& model, const SymMatrix& q);

// The unique skew-symmetric Omega with
//   Omega Q^{-1} + Q^{-1} Omega =
//     (A^T - A) + 1/2 (Q H^T R^{-1} H - H^T R^{-1} H Q)
//                - 1/2 (sigma_b sigma_b^T Q^{-1} - Q^{-1} sigma_b sigma_b^T)
// so that  A - 1/2 Q H^T R^{-1} H + 1/2 sigma_b sigma_b^T Q^{-1}
//          + Omega Q^{-1}  equals  sqrtRicc(Q).
// In the eigenbasis, Omega~_ij = rhs~_ij * l_i l_j / (l_i + l_j).
// Returned as a plain matrix since it is skew, not symmetric.
Eigen::MatrixXd solve_omega(const LinearGaussianModel& model,
                            const SymMatrix& q);

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix together with the
// orthogonal projectors onto its range and kernel (P_R + P_K = I).
struct PseudoInverse {
  SymMatrix pinv;
  SymMatrix p_range;
  SymMatrix p_kernel;
};
PseudoInverse pseudo_inverse(const SymMatrix& m);

// Optimal transport map T(x) = F x + b between N(mx, sx) and N(my, sy):
//   F = sy^{1/2} (sy^{1/2} sx sy^{1/2})^{-1/2} sy^{1/2},  b = my - F mx.
// Requires both covariances SPD; the pushforward identity F sx F = sy holds.
struct AffineMap {
  SymMatrix f;
  Eigen::VectorXd b;
};
AffineMap optimal_gaussian_map(const Eigen::VectorXd& mx, const SymMatrix& sx,
                               const Eigen::VectorXd& my, const SymMatrix& sy);

// Gain pair (G, sigma) for a possibly singular covariance:
//   sigma = P_K sigma_b   and   G S + S G = Ricc(S) - sigma sigma^T
// with G symmetric and the free kernel-kernel block of G set to zero (it
// multiplies deviations lying in range(S), so the particle dynamics do not
// see it).  For SPD input this reduces to (sqrtRicc(S), 0).
// Throws InconsistentSingularSystem if the kernel-kernel block of the
// right-hand side fails to vanish, which indicates a bad rank estimate.
struct SingularGain {
  SymMatrix g;
  Eigen::MatrixXd sigma;  // d x q
};
SingularGain solve_singular_gain(const LinearGaussianModel& model,
                                 const SymMatrix& sigma);

}  // namespace otfpf

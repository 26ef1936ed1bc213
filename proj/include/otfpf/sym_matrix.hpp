#pragma once

#include <utility>

#include <Eigen/Dense>

#include "otfpf/errors.hpp"

namespace otfpf {

// Relative eigenvalue threshold for rank decisions (double-precision
// eigenvalue noise floor with margin).
inline constexpr double kRankTol = 1e-10;

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// A square matrix kept exactly symmetric: construction applies (M + M^T)/2.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Eigen::MatrixXd m) {
    if (m.rows() != m.cols())
      throw ConfigError("SymMatrix: matrix must be square");
    m_ = symmetrize(m);
  }

  static SymMatrix identity(int d) {
    return SymMatrix(Eigen::MatrixXd::Identity(d, d));
  }
  static SymMatrix zero(int d) {
    return SymMatrix(Eigen::MatrixXd::Zero(d, d));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
};

// Eigendecomposition of a symmetric matrix with eigenvalues sorted
// descending and a rank estimate at kRankTol relative to the largest
// eigenvalue.
struct SpectralDecomp {
  Eigen::VectorXd eigenvalues;   // sorted descending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalue order
  int rank = 0;

  explicit SpectralDecomp(const SymMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat());
    if (es.info() != Eigen::Success)
      throw NumericalBlowup("SpectralDecomp: eigensolver failed");
    const int d = m.dim();
    // Eigen returns ascending order.
    eigenvalues = es.eigenvalues().reverse();
    eigenvectors = es.eigenvectors().rowwise().reverse();
    const double lmax = d > 0 ? eigenvalues[0] : 0.0;
    rank = 0;
    for (int i = 0; i < d; ++i)
      if (eigenvalues[i] > kRankTol * lmax) ++rank;
  }

  Eigen::MatrixXd reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }

  bool is_spd() const {
    return dim() > 0 && rank == dim() && eigenvalues[dim() - 1] > 0.0;
  }

  int dim() const { return static_cast<int>(eigenvalues.size()); }
};

// Symmetric PSD square root via the spectral decomposition; negative
// round-off eigenvalues are clamped to zero.
inline Eigen::MatrixXd spd_sqrt(const SymMatrix& m) {
  SpectralDecomp sd(m);
  Eigen::VectorXd s = sd.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return symmetrize(sd.eigenvectors * s.asDiagonal() *
                    sd.eigenvectors.transpose());
}

inline double lambda_min(const SymMatrix& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
             m.mat(), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace otfpf

#include "grokflow/spectral.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace grokflow::spectral {

std::pair<VecX, MatX> sym_eig(const MatX& H) {
  require(H.rows() == H.cols(), "sym_eig: matrix must be square");
  require(all_finite(H), "sym_eig: non-finite entries");
  MatX S = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<MatX> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_eig: eigensolver failed to converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

Svd svd(const MatX& M) {
  require(all_finite(M), "svd: non-finite entries");
  Eigen::JacobiSVD<MatX> s(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {s.matrixU(), s.singularValues(), s.matrixV()};
}

VecX pinv_apply(const MatX& M, const VecX& y, Scalar rel_tol) {
  require(M.rows() == y.size(), "pinv_apply: dimension mismatch");
  require(all_finite(M) && y.allFinite(), "pinv_apply: non-finite entries");
  Svd s = svd(M);
  const Scalar cutoff =
      s.sigma.size() > 0 ? rel_tol * s.sigma[0] : Scalar(0);
  VecX z = s.U.transpose() * y;
  for (Index i = 0; i < s.sigma.size(); ++i)
    z[i] = (s.sigma[i] > cutoff && s.sigma[i] > 0) ? z[i] / s.sigma[i] : 0;
  return s.V * z;
}

SpectralProbe nullspace_projector(const MatX& H, Scalar abs_tol,
                                  Scalar rel_tol) {
  require(abs_tol > 0 && rel_tol > 0,
          "nullspace_projector: tolerances must be positive");
  SpectralProbe probe;
  std::tie(probe.eigenvalues, probe.eigenvectors) = sym_eig(H);

  const Scalar max_abs = probe.eigenvalues.size() > 0
                             ? probe.eigenvalues.cwiseAbs().maxCoeff()
                             : Scalar(0);
  probe.threshold = std::max(abs_tol, rel_tol * max_abs);

  const Index d = probe.eigenvalues.size();
  probe.projector = MatX::Zero(d, d);
  probe.eta_estimate = kInf;
  for (Index i = 0; i < d; ++i) {
    const Scalar lam = probe.eigenvalues[i];
    if (std::abs(lam) <= probe.threshold) {
      ++probe.gap_index;
      probe.projector +=
          probe.eigenvectors.col(i) * probe.eigenvectors.col(i).transpose();
    } else {
      if (lam < -10 * probe.threshold) probe.saddle_warning = true;
      probe.eta_estimate = std::min(probe.eta_estimate, std::abs(lam));
    }
  }
  return probe;
}

}  // namespace grokflow::spectral

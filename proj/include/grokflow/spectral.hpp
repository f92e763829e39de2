#pragma once

#include "grokflow/types.hpp"

#include <utility>

namespace grokflow::spectral {

/// Eigendecomposition of a symmetric Hessian with its zero-eigenvalue
/// classification: `gap_index` counts eigenvalues treated as zero,
/// `eta_estimate` is the smallest eigenvalue above the threshold (the local
/// curvature gap), and `projector` is the orthogonal projector onto the
/// detected nullspace.
struct SpectralProbe {
  VecX eigenvalues;   // ascending
  MatX eigenvectors;  // orthonormal columns, matching order
  Index gap_index = 0;
  Scalar eta_estimate = kInf;  // +inf sentinel when every eigenvalue is zero
  MatX projector;
  Scalar threshold = 0;
  bool saddle_warning = false;  // eigenvalue < -10*threshold observed
};

/// Symmetric eigendecomposition, eigenvalues ascending. The input is
/// symmetrised as (H + H^T)/2 before factorisation.
std::pair<VecX, MatX> sym_eig(const MatX& H);

struct Svd {
  MatX U;      // n x k, orthonormal columns
  VecX sigma;  // descending, nonnegative
  MatX V;      // m x k, orthonormal columns
};

Svd svd(const MatX& M);

/// Minimum-l2-norm least-squares solution M^+ y. Singular values below
/// rel_tol * sigma_max are treated as zero.
VecX pinv_apply(const MatX& M, const VecX& y, Scalar rel_tol = 1e-12);

/// Classifies eigenvalues with |l| <= max(abs_tol, rel_tol * max|l|) as zero
/// and builds the projector onto the corresponding eigenspace.
SpectralProbe nullspace_projector(const MatX& H, Scalar abs_tol = 1e-8,
                                  Scalar rel_tol = 1e-6);

}  // namespace grokflow::spectral

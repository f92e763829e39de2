#pragma once

#include "grokflow/flows.hpp"
#include "grokflow/problems.hpp"
#include "grokflow/types.hpp"

#include <optional>
#include <string>

namespace grokflow::oracles {

/// Closed-form regularised gradient-flow trajectory for
/// F(w) = 1/2 |Xw - y|^2 in the right-singular basis of X.
class LinRegClosedForm {
public:
  LinRegClosedForm(const MatX& X, const VecX& y, const VecX& w0);

  /// State w(t) of the flow dw/dt = -X^T(Xw - y) - lambda w.
  VecX at(Scalar t, Scalar lambda) const;

  /// Limit point as t -> inf (ridge shrinkage for lambda > 0, Phi(w0) for
  /// lambda = 0).
  VecX limit(Scalar lambda) const;

  VecX min_norm() const { return V_ * z_star_; }
  const VecX& sigma() const { return sigma_; }
  Index data_rank() const { return n_; }

private:
  MatX V_;       // d x d right singular basis
  VecX sigma_;   // length d, zero-padded past rank
  VecX z_star_;  // V-coordinates of X^+ y
  VecX z0_;      // V-coordinates of w0
  Index n_;      // number of rows of X
};

/// Minimum-l2-norm interpolant X^+ y.
VecX min_norm_solution(const MatX& X, const VecX& y);

/// Sum of singular values.
Scalar nuclear_norm(const MatX& M);

/// Variational slack 1/2 (|U|_F^2 + |V|_F^2) - |U V^T|_*; nonnegative, zero
/// iff the factorisation is balanced along aligned singular directions.
Scalar srebro_gap(const MatX& U, const MatX& V);

struct L1Result {
  VecX beta;
  Scalar objective;
  Scalar feasibility;   // |X beta - y|
  Scalar duality_gap;
  int iterations;
  bool converged;
};

/// Basis pursuit min |b|_1 s.t. Xb = y via Douglas-Rachford splitting
/// (affine projection + soft-thresholding), stopped at the requested
/// duality-gap tolerance.
L1Result l1_min_interpolant(const MatX& X, const VecX& y, Scalar tol = 0);

/// Appendix-style grokking threshold |grad F(w0)| / |w_gf_limit|. Returns 0
/// with degenerate=true for a stationary initialisation.
struct GrokThreshold {
  Scalar value;
  bool degenerate;
};
GrokThreshold grok_threshold(const Problem& p, const VecX& w0,
                             const VecX& w_gf_limit);

struct TimescaleReport {
  std::optional<Scalar> t_gf;    // grad norm falls below eps * initial
  std::optional<Scalar> t_wd;    // first |grad F| <= lambda |w|
  std::optional<Scalar> drop_start, drop_end;  // main |w|^2 descent interval
  Scalar plateau_log_span = 0;   // log10(t_wd / t_gf)
  Scalar drop_log_span = 0;
  Scalar lambda = 0;
  Scalar threshold = 0;          // grok_threshold when supplied
  bool grokking_expected = false;
  std::string flags;             // thresholds never crossed etc.

  std::string to_json() const;
};

/// Extracts the two-timescale signature from a fast-time trajectory and its
/// slow reparameterisation; eps is the gradient-drop fraction (default 0.01).
TimescaleReport timescale_report(const Trajectory& fast_traj,
                                 const Trajectory& slow_traj, Scalar lambda,
                                 Scalar eps = 0.01, Scalar threshold = 0);

}  // namespace grokflow::oracles

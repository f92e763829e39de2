#pragma once

#include "grokflow/flows.hpp"
#include "grokflow/problems.hpp"
#include "grokflow/spectral.hpp"
#include "grokflow/types.hpp"

namespace grokflow::manifold {

/// Nullspace-classification thresholds used when probing Hessians along the
/// critical manifold.
struct ProbeTols {
  Scalar abs_tol = 1e-8;
  Scalar rel_tol = 1e-6;
};

/// A state accepted as lying on (numerically: very near) the critical
/// manifold, together with its Hessian probe.
struct ManifoldPoint {
  VecX state;
  spectral::SpectralProbe probe;
  Scalar residual_grad_norm = 0;
  Scalar quadratic_growth_distance = 0;
};

class OffManifoldError : public std::runtime_error {
public:
  OffManifoldError(const std::string& msg, Scalar residual)
      : std::runtime_error(msg), residual_grad_norm(residual) {}
  Scalar residual_grad_norm;
};

/// Default acceptance tolerance 1e-8 (1 + eta).
Scalar on_manifold_tol(Scalar eta_estimate);

/// Probes w and validates the ManifoldPoint invariants; F_star is used for
/// the quadratic-growth distance estimate (0 for interpolating losses).
ManifoldPoint make_manifold_point(const Problem& p, const VecX& w,
                                  const ProbeTols& tols = {},
                                  Scalar F_star = 0);

/// Riemannian gradient of w -> |w|^2/2 on the critical manifold:
/// P_{Ker(hess F(w))} w. Requires |grad F(w)| within the on-manifold
/// tolerance.
VecX riemannian_grad_l2(const Problem& p, const VecX& w,
                        const ProbeTols& tols = {});

struct RetractionSpec {
  int every_k_steps = 5;
  Scalar gf_tol = 0;        // 0 -> 1e-10 (1 + eta) from the starting probe
  Scalar max_time = 1e6;    // gradient-flow budget per retraction
};

struct RiemannianFlowResult {
  Trajectory trajectory;
  bool singularity_halt = false;   // nullity changed mid-flow
  bool morse_bott_warning = false; // saddle flag seen on a probe
  std::string note;
};

/// Integrates dw/dt = -P_{Ker(hess F(w))} w with fixed-step RK4 and periodic
/// gradient-flow retraction back onto the manifold. The projector threshold
/// is eta/10 from the starting probe, refreshed at each retraction.
RiemannianFlowResult integrate_riemannian_flow(const Problem& p,
                                               const ManifoldPoint& start,
                                               Scalar T, Scalar step,
                                               const RetractionSpec& retract,
                                               int record_points = 200);

struct KktResidual {
  Scalar value;          // max(tangential, stationarity)
  Scalar tangential;     // |P_{Ker(hess)} w|
  Scalar stationarity;   // |grad F(w)|
};

/// Residual of the KKT conditions of min_{w in M} |w|^2.
KktResidual kkt_residual(const Problem& p, const VecX& w,
                         const ProbeTols& tols = {});

struct MorseBottGap {
  Scalar eta_estimate;
  Index gap_index;
  bool saddle_warning;
};

MorseBottGap morse_bott_gap(const Problem& p, const VecX& w,
                            const ProbeTols& tols = {});

/// Upper bound 2 sqrt((F(w) - F*) / eta) on the distance to the manifold.
Scalar quadratic_growth_distance(Scalar F_w, Scalar F_star, Scalar eta);

}  // namespace grokflow::manifold

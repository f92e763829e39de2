#pragma once

#include "grokflow/problems.hpp"
#include "grokflow/types.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace grokflow {

enum class Method { rk4_fixed, rk45_adaptive, euler };

enum class Timescale { fast, slow };

struct IntegratorSpec {
  Method method = Method::rk45_adaptive;
  Scalar step = 1e-3;       // fixed-step methods
  Scalar rel_tol = 1e-8;    // adaptive method
  Scalar abs_tol = 1e-10;
  long max_steps = 200'000'000;
  int record_points = 400;  // log-spaced over the horizon unless record_times set
  std::vector<Scalar> record_times;
};

/// Time-stamped flow trajectory. Immutable after recording; observables are
/// parallel series over `times`.
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<VecX> states;
  std::map<std::string, std::vector<Scalar>> observables;
  Scalar lambda = 0;
  Timescale timescale_tag = Timescale::fast;
  bool completed = true;
  std::string failure;  // stiffness / divergence diagnostics when !completed

  Index size() const { return static_cast<Index>(times.size()); }
  const VecX& final_state() const { return states.back(); }
  const std::vector<Scalar>& series(const std::string& name) const;
};

/// Log-spaced sample times in (0, T], preceded by t = 0.
std::vector<Scalar> log_spaced_times(Scalar T, int points);

/// Unregularised gradient flow dw/dt = -grad F(w) over [0, T].
Trajectory integrate_gf(const Problem& p, const VecX& w0, Scalar T,
                        const IntegratorSpec& spec);

/// Regularised flow dw/dt = -grad F(w) - lambda w over [0, T].
Trajectory integrate_regularized(const Problem& p, const VecX& w0,
                                 Scalar lambda, Scalar T,
                                 const IntegratorSpec& spec);

/// Discrete gradient descent with weight decay,
/// w_{k+1} = w_k - gamma (grad F(w_k) + lambda w_k), recorded against the
/// training time t_k = gamma k at log-spaced iterations.
Trajectory integrate_gd(const Problem& p, const VecX& w0, Scalar lambda,
                        Scalar gamma, long iterations, int record_points = 400);

struct PhiResult {
  VecX w;
  bool converged = false;
  Scalar stop_time = 0;
};

/// Approximates Phi(w0) = lim_{t->inf} of the unregularised flow by running
/// until |grad F| <= grad_tol or t >= max_time.
PhiResult phi_map(const Problem& p, const VecX& w0, Scalar grad_tol,
                  Scalar max_time, const IntegratorSpec& spec);

/// Default stopping tolerance for phi_map.
Scalar phi_default_grad_tol(const Problem& p, const VecX& w0);

/// Rescales a regularised trajectory to the slow timescale t -> lambda t.
Trajectory slow_reparam(const Trajectory& traj);

/// Gronwall envelope lambda * t * e^{c t} * R on |w^lambda(t) - w^GF(t)|.
Scalar gronwall_bound(Scalar lambda, Scalar t, Scalar c, Scalar R);

/// Junction instant -lambda ln(lambda) / (2c) in slow-time units.
Scalar junction_time(Scalar lambda, Scalar c);

/// Largest Hessian eigenvalue magnitude along recorded states (power
/// iteration), inflated x2; the default Lipschitz estimate for the bounds.
Scalar lipschitz_estimate(const Problem& p, const Trajectory& traj);

/// Spectral norm of hessian(w) by power iteration.
Scalar hessian_norm(const Problem& p, const VecX& w, int iters = 60);

/// Extra per-state observables appended to the standard set when recording.
using ExtraObservables =
    std::function<std::map<std::string, Scalar>(const VecX&)>;

/// Full-control entry point used by the wrappers above; rhs must be the flow
/// field. Records loss, reg_loss, grad_norm, reg_grad_norm, weight_norm_sq
/// plus problem extras at the requested times.
Trajectory integrate_flow(const Problem& p, const VecX& w0, Scalar lambda,
                          Scalar T, const IntegratorSpec& spec,
                          bool regularized);

}  // namespace grokflow

#include "grokflow/manifold.hpp"

#include <cmath>

namespace grokflow::manifold {

Scalar on_manifold_tol(Scalar eta_estimate) {
  const Scalar eta = std::isfinite(eta_estimate) ? eta_estimate : 0;
  return 1e-8 * (1.0 + eta);
}

Scalar quadratic_growth_distance(Scalar F_w, Scalar F_star, Scalar eta) {
  require(eta > 0, "quadratic_growth_distance: eta must be positive");
  if (F_w < F_star - 1e-12)
    throw RejectedInputError(
        "quadratic_growth_distance: F(w) < F_star (inconsistent F_star)");
  return 2.0 * std::sqrt(std::max<Scalar>(0, F_w - F_star) / eta);
}

ManifoldPoint make_manifold_point(const Problem& p, const VecX& w,
                                  const ProbeTols& tols, Scalar F_star) {
  ManifoldPoint mp;
  mp.state = w;
  mp.probe = spectral::nullspace_projector(p.hessian(w), tols.abs_tol,
                                           tols.rel_tol);
  mp.residual_grad_norm = p.gradient(w).norm();
  const Scalar tol = on_manifold_tol(mp.probe.eta_estimate);
  if (mp.residual_grad_norm > tol)
    throw OffManifoldError(
        "make_manifold_point: |grad F| = " +
            std::to_string(mp.residual_grad_norm) + " exceeds tolerance " +
            std::to_string(tol),
        mp.residual_grad_norm);
  require(mp.probe.gap_index >= 1,
          "make_manifold_point: Hessian has trivial nullspace (manifold of "
          "dimension 0)");
  if (std::isfinite(mp.probe.eta_estimate))
    mp.quadratic_growth_distance =
        quadratic_growth_distance(p.value(w), F_star, mp.probe.eta_estimate);
  return mp;
}

VecX riemannian_grad_l2(const Problem& p, const VecX& w,
                        const ProbeTols& tols) {
  auto probe =
      spectral::nullspace_projector(p.hessian(w), tols.abs_tol, tols.rel_tol);
  const Scalar res = p.gradient(w).norm();
  const Scalar tol = on_manifold_tol(probe.eta_estimate);
  if (res > tol)
    throw OffManifoldError("riemannian_grad_l2: point is off the manifold",
                           res);
  return probe.projector * w;
}

KktResidual kkt_residual(const Problem& p, const VecX& w,
                         const ProbeTols& tols) {
  auto probe =
      spectral::nullspace_projector(p.hessian(w), tols.abs_tol, tols.rel_tol);
  KktResidual r;
  r.tangential = (probe.projector * w).norm();
  r.stationarity = p.gradient(w).norm();
  r.value = std::max(r.tangential, r.stationarity);
  return r;
}

MorseBottGap morse_bott_gap(const Problem& p, const VecX& w,
                            const ProbeTols& tols) {
  auto probe =
      spectral::nullspace_projector(p.hessian(w), tols.abs_tol, tols.rel_tol);
  return {probe.eta_estimate, probe.gap_index, probe.saddle_warning};
}

namespace {

void record_riemannian_sample(const Problem& p, Trajectory& traj, Scalar t,
                              const VecX& w, const ProbeTols& tols) {
  const VecX g = p.gradient(w);
  traj.times.push_back(t);
  traj.states.push_back(w);
  traj.observables["loss"].push_back(p.value(w));
  traj.observables["reg_loss"].push_back(p.value(w));
  traj.observables["grad_norm"].push_back(g.norm());
  traj.observables["weight_norm_sq"].push_back(w.squaredNorm());
  auto kkt = kkt_residual(p, w, tols);
  auto probe =
      spectral::nullspace_projector(p.hessian(w), tols.abs_tol, tols.rel_tol);
  traj.observables["kkt_residual"].push_back(kkt.value);
  traj.observables["eta_estimate"].push_back(
      std::isfinite(probe.eta_estimate) ? probe.eta_estimate : -1);
  traj.observables["gap_index"].push_back(
      static_cast<Scalar>(probe.gap_index));
  if (auto tl = p.test_loss(w)) traj.observables["test_loss"].push_back(*tl);
  for (const auto& [name, val] : p.extras(w))
    traj.observables[name].push_back(val);
}

}  // namespace

RiemannianFlowResult integrate_riemannian_flow(const Problem& p,
                                               const ManifoldPoint& start,
                                               Scalar T, Scalar step,
                                               const RetractionSpec& retract,
                                               int record_points) {
  require(T > 0 && step > 0, "integrate_riemannian_flow: T, step > 0");
  require(retract.every_k_steps >= 1,
          "integrate_riemannian_flow: every_k_steps >= 1");

  RiemannianFlowResult res;
  Trajectory& traj = res.trajectory;
  traj.timescale_tag = Timescale::slow;

  const Scalar eta0 = std::isfinite(start.probe.eta_estimate)
                          ? start.probe.eta_estimate
                          : 1.0;
  Scalar gf_tol =
      retract.gf_tol > 0 ? retract.gf_tol : 1e-10 * (1.0 + eta0);

  // Projector threshold eta/10, refreshed at retractions.
  ProbeTols tols;
  tols.abs_tol = std::max<Scalar>(1e-300, eta0 / 10);
  tols.rel_tol = 1e-12;  // absolute rule dominates here
  const Index nullity0 = start.probe.gap_index;

  IntegratorSpec gf_spec;
  gf_spec.rel_tol = 1e-10;
  gf_spec.abs_tol = 1e-12;

  auto rhs = [&](const VecX& w) -> VecX {
    auto probe = spectral::nullspace_projector(p.hessian(w), tols.abs_tol,
                                               tols.rel_tol);
    if (probe.saddle_warning) res.morse_bott_warning = true;
    return -(probe.projector * w);
  };

  const std::vector<Scalar> record = log_spaced_times(T, record_points);
  std::size_t next_rec = 0;
  VecX w = start.state;
  Scalar t = 0;
  record_riemannian_sample(p, traj, 0, w, tols);
  while (next_rec < record.size() && record[next_rec] <= 0) ++next_rec;

  long step_count = 0;
  while (t < T * (1 - 1e-12)) {
    Scalar target = next_rec < record.size() ? record[next_rec] : T;
    Scalar h = std::min(step, target - t);
    if (h <= 0) {
      ++next_rec;
      continue;
    }
    const VecX k1 = rhs(w);
    const VecX k2 = rhs(w + 0.5 * h * k1);
    const VecX k3 = rhs(w + 0.5 * h * k2);
    const VecX k4 = rhs(w + h * k3);
    w += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
    ++step_count;

    if (step_count % retract.every_k_steps == 0) {
      auto phi = phi_map(p, w, gf_tol, retract.max_time, gf_spec);
      if (!phi.converged)
        throw std::runtime_error(
            "integrate_riemannian_flow: retraction failed to reach gf_tol "
            "(manifold escape) at t=" +
            std::to_string(t));
      w = phi.w;
      auto probe = spectral::nullspace_projector(
          p.hessian(w), tols.abs_tol, tols.rel_tol);
      if (probe.gap_index != nullity0) {
        res.singularity_halt = true;
        res.note = "nullity changed from " + std::to_string(nullity0) +
                   " to " + std::to_string(probe.gap_index) + " at t=" +
                   std::to_string(t) + " (singularity crossing)";
        record_riemannian_sample(p, traj, t, w, tols);
        traj.completed = false;
        traj.failure = res.note;
        return res;
      }
      if (std::isfinite(probe.eta_estimate))
        tols.abs_tol = std::max<Scalar>(1e-300, probe.eta_estimate / 10);
    }

    if (next_rec < record.size() && record[next_rec] <= t * (1 + 1e-12)) {
      // Pull back before sampling so recorded states sit on the manifold.
      auto phi = phi_map(p, w, gf_tol, retract.max_time, gf_spec);
      if (phi.converged) w = phi.w;
      while (next_rec < record.size() && record[next_rec] <= t * (1 + 1e-12)) {
        record_riemannian_sample(p, traj, record[next_rec], w, tols);
        ++next_rec;
      }
    }
  }
  if (traj.times.back() < t - 1e-12 * std::max<Scalar>(1, t))
    record_riemannian_sample(p, traj, t, w, tols);
  return res;
}

}  // namespace grokflow::manifold

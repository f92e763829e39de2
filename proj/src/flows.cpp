#include "grokflow/flows.hpp"

#include <algorithm>
#include <cmath>

namespace grokflow {

namespace {

constexpr Scalar kDivergenceGuard = 1e12;

void record_sample(const Problem& p, Trajectory& traj, Scalar t,
                   const VecX& w) {
  const VecX g = p.gradient(w);
  const Scalar loss = p.value(w);
  const Scalar wn2 = w.squaredNorm();
  traj.times.push_back(t);
  traj.states.push_back(w);
  traj.observables["loss"].push_back(loss);
  traj.observables["reg_loss"].push_back(loss + 0.5 * traj.lambda * wn2);
  traj.observables["grad_norm"].push_back(g.norm());
  traj.observables["reg_grad_norm"].push_back((g + traj.lambda * w).norm());
  traj.observables["weight_norm_sq"].push_back(wn2);
  if (auto tl = p.test_loss(w))
    traj.observables["test_loss"].push_back(*tl);
  for (const auto& [name, val] : p.extras(w))
    traj.observables[name].push_back(val);
}

// Dormand-Prince 5(4) coefficients.
struct Dopri5 {
  static constexpr Scalar c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr Scalar a21 = 1.0 / 5;
  static constexpr Scalar a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr Scalar a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr Scalar a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr Scalar a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr Scalar b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr Scalar e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

using Rhs = std::function<VecX(const VecX&)>;

// One adaptive Dormand-Prince step from (t, w) with proposed size h.
// Returns accepted flag; on acceptance advances w and t and reuses k7 as the
// next first stage (FSAL).
struct DopriStepper {
  Rhs f;
  Scalar rel_tol, abs_tol;
  VecX k1;  // valid first stage (FSAL cache)

  bool step(Scalar& t, VecX& w, Scalar& h) {
    using D = Dopri5;
    const VecX k2 = f(w + h * D::a21 * k1);
    const VecX k3 = f(w + h * (D::a31 * k1 + D::a32 * k2));
    const VecX k4 = f(w + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
    const VecX k5 =
        f(w + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
    const VecX k6 = f(w + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 +
                               D::a64 * k4 + D::a65 * k5));
    const VecX wn = w + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 +
                             D::b5 * k5 + D::b6 * k6);
    const VecX k7 = f(wn);
    const VecX err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 +
                          D::e6 * k6 + D::e7 * k7);

    Scalar err_norm = 0;
    for (Index i = 0; i < w.size(); ++i) {
      const Scalar sc =
          abs_tol + rel_tol * std::max(std::abs(w[i]), std::abs(wn[i]));
      const Scalar r = err[i] / sc;
      err_norm += r * r;
    }
    err_norm = std::sqrt(err_norm / std::max<Index>(1, w.size()));

    const Scalar factor = err_norm > 0
                              ? 0.9 * std::pow(err_norm, -0.2)
                              : 5.0;
    if (err_norm <= 1.0) {
      t += h;
      w = wn;
      k1 = k7;
      h *= std::clamp(factor, 0.2, 5.0);
      return true;
    }
    h *= std::clamp(factor, 0.1, 0.9);
    return false;
  }
};

}  // namespace

const std::vector<Scalar>& Trajectory::series(const std::string& name) const {
  auto it = observables.find(name);
  if (it == observables.end())
    throw std::out_of_range("Trajectory: no observable named " + name);
  return it->second;
}

std::vector<Scalar> log_spaced_times(Scalar T, int points) {
  require(T > 0 && points >= 2, "log_spaced_times: need T > 0, points >= 2");
  // Span ~6 decades below T so fast transients are resolved.
  const Scalar t_min = T * 1e-6;
  std::vector<Scalar> ts;
  ts.push_back(0);
  for (int i = 0; i < points; ++i) {
    const Scalar a = static_cast<Scalar>(i) / (points - 1);
    ts.push_back(t_min * std::pow(T / t_min, a));
  }
  ts.back() = T;
  return ts;
}

Trajectory integrate_flow(const Problem& p, const VecX& w0, Scalar lambda,
                          Scalar T, const IntegratorSpec& spec,
                          bool regularized) {
  require(T > 0, "integrate: horizon must be positive");
  require(lambda >= 0, "integrate: lambda must be nonnegative");
  require(w0.size() == p.dim() && w0.allFinite(),
          "integrate: bad initial state");

  const Scalar lam = regularized ? lambda : 0;
  Rhs f = [&p, lam](const VecX& w) -> VecX {
    return -(p.gradient(w) + lam * w);
  };

  Trajectory traj;
  traj.lambda = lam;
  std::vector<Scalar> record =
      spec.record_times.empty() ? log_spaced_times(T, spec.record_points)
                                : spec.record_times;
  std::sort(record.begin(), record.end());
  record.erase(std::unique(record.begin(), record.end()), record.end());

  VecX w = w0;
  Scalar t = 0;
  std::size_t next_rec = 0;
  while (next_rec < record.size() && record[next_rec] <= 0) {
    record_sample(p, traj, 0, w);
    ++next_rec;
  }

  auto check_finite = [&](long step_count) {
    if (!w.allFinite() || w.norm() > kDivergenceGuard)
      throw DivergenceError("integration diverged", t, step_count);
  };

  long steps = 0;
  try {
    if (spec.method == Method::rk45_adaptive) {
      DopriStepper st{f, spec.rel_tol, spec.abs_tol, f(w)};
      Scalar h = std::min<Scalar>(1e-4, T / 100);
      while (t < T && steps < spec.max_steps) {
        Scalar target = next_rec < record.size() ? record[next_rec] : T;
        Scalar h_try = std::min(h, target - t);
        bool cap = h_try < h;
        if (h_try < 1e-14 * std::max<Scalar>(1, t)) {
          // Sitting on a record point (or the horizon) within round-off.
          while (next_rec < record.size() && record[next_rec] <= t + h_try) {
            record_sample(p, traj, record[next_rec], w);
            ++next_rec;
          }
          if (next_rec >= record.size() || record[next_rec] >= T) {
            t = T;
            break;
          }
          continue;
        }
        Scalar h_local = h_try;
        if (st.step(t, w, h_local)) {
          if (!cap) h = h_local;
          check_finite(steps);
          while (next_rec < record.size() &&
                 record[next_rec] <= t * (1 + 1e-12)) {
            record_sample(p, traj, record[next_rec], w);
            ++next_rec;
          }
        } else {
          h = h_local;
          if (h < 1e-15 * std::max<Scalar>(1, t)) {
            traj.completed = false;
            traj.failure = "step-size underflow (stiffness) at t=" +
                           std::to_string(t);
            return traj;
          }
        }
        ++steps;
      }
      if (t < T) {
        traj.completed = false;
        traj.failure = "max_steps reached at t=" + std::to_string(t);
      }
    } else {
      // Fixed-step euler / rk4 hitting record times exactly.
      require(spec.step > 0, "integrate: step must be positive");
      while (t < T - 1e-15 * T && steps < spec.max_steps) {
        Scalar target = next_rec < record.size() ? record[next_rec] : T;
        Scalar h = std::min(spec.step, target - t);
        if (h <= 0) {
          while (next_rec < record.size() && record[next_rec] <= t * (1 + 1e-12)) {
            record_sample(p, traj, t, w);
            ++next_rec;
          }
          continue;
        }
        if (spec.method == Method::euler) {
          w += h * f(w);
        } else {
          const VecX k1 = f(w);
          const VecX k2 = f(w + 0.5 * h * k1);
          const VecX k3 = f(w + 0.5 * h * k2);
          const VecX k4 = f(w + h * k3);
          w += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        t += h;
        check_finite(steps);
        while (next_rec < record.size() && record[next_rec] <= t * (1 + 1e-12)) {
          record_sample(p, traj, record[next_rec], w);
          ++next_rec;
        }
        ++steps;
      }
      if (t < T * (1 - 1e-12)) {
        traj.completed = false;
        traj.failure = "max_steps reached at t=" + std::to_string(t);
      }
    }
  } catch (const DivergenceError& e) {
    traj.completed = false;
    traj.failure = e.what();
    throw;
  }
  if (traj.times.empty() ||
      traj.times.back() < t - 1e-12 * std::max<Scalar>(1, t))
    record_sample(p, traj, t, w);
  return traj;
}

Trajectory integrate_gf(const Problem& p, const VecX& w0, Scalar T,
                        const IntegratorSpec& spec) {
  return integrate_flow(p, w0, 0, T, spec, false);
}

Trajectory integrate_regularized(const Problem& p, const VecX& w0,
                                 Scalar lambda, Scalar T,
                                 const IntegratorSpec& spec) {
  return integrate_flow(p, w0, lambda, T, spec, true);
}

Trajectory integrate_gd(const Problem& p, const VecX& w0, Scalar lambda,
                        Scalar gamma, long iterations, int record_points) {
  require(gamma > 0, "integrate_gd: stepsize must be positive");
  require(iterations >= 1, "integrate_gd: need at least one iteration");
  require(lambda >= 0, "integrate_gd: lambda must be nonnegative");
  require(w0.size() == p.dim() && w0.allFinite(),
          "integrate_gd: bad initial state");

  Trajectory traj;
  traj.lambda = lambda;

  // Log-spaced iteration indices, always including 0 and the last.
  std::vector<long> record_iters{0};
  for (int i = 0; i < record_points; ++i) {
    const Scalar a = static_cast<Scalar>(i) / std::max(1, record_points - 1);
    long k = static_cast<long>(
        std::llround(std::pow(static_cast<Scalar>(iterations), a)));
    if (k > record_iters.back()) record_iters.push_back(k);
  }
  if (record_iters.back() != iterations) record_iters.push_back(iterations);

  VecX w = w0;
  std::size_t next_rec = 0;
  for (long k = 0; k <= iterations; ++k) {
    if (next_rec < record_iters.size() && k == record_iters[next_rec]) {
      record_sample(p, traj, gamma * k, w);
      ++next_rec;
    }
    if (k == iterations) break;
    w -= gamma * (p.gradient(w) + lambda * w);
    if (!w.allFinite() || w.norm() > kDivergenceGuard)
      throw DivergenceError("gradient descent diverged", gamma * (k + 1),
                            k + 1);
  }
  return traj;
}

Scalar phi_default_grad_tol(const Problem& p, const VecX& w0) {
  return 1e-10 * (1.0 + p.gradient(w0).norm());
}

PhiResult phi_map(const Problem& p, const VecX& w0, Scalar grad_tol,
                  Scalar max_time, const IntegratorSpec& spec) {
  require(grad_tol > 0, "phi_map: grad_tol must be positive");
  PhiResult res;
  res.w = w0;
  if (p.gradient(w0).norm() <= grad_tol) {
    res.converged = true;
    return res;
  }

  // Integrate in doubling chunks; each chunk records only its endpoint. The
  // integrator tolerance is pinned below grad_tol so its own error floor
  // cannot keep the recorded gradient above the stopping threshold.
  IntegratorSpec chunk_spec = spec;
  chunk_spec.rel_tol = std::min(spec.rel_tol, 1e-3 * grad_tol);
  chunk_spec.abs_tol = std::min(spec.abs_tol, 1e-3 * grad_tol);
  Scalar chunk = 1.0;
  Scalar t = 0;
  while (t < max_time) {
    const Scalar T = std::min(chunk, max_time - t);
    chunk_spec.record_times = {T};
    Trajectory tr = integrate_gf(p, res.w, T, chunk_spec);
    res.w = tr.final_state();
    t += T;
    if (!tr.completed) break;
    if (p.gradient(res.w).norm() <= grad_tol) {
      res.converged = true;
      break;
    }
    chunk *= 2;
  }
  res.stop_time = t;
  return res;
}

Trajectory slow_reparam(const Trajectory& traj) {
  require(traj.lambda > 0, "slow_reparam: requires lambda > 0");
  Trajectory out = traj;
  if (traj.timescale_tag == Timescale::fast) {
    for (auto& t : out.times) t *= traj.lambda;
    out.timescale_tag = Timescale::slow;
  } else {
    for (auto& t : out.times) t /= traj.lambda;
    out.timescale_tag = Timescale::fast;
  }
  return out;
}

Scalar gronwall_bound(Scalar lambda, Scalar t, Scalar c, Scalar R) {
  require(lambda >= 0 && t >= 0 && c >= 0 && R >= 0,
          "gronwall_bound: arguments must be nonnegative");
  return lambda * t * std::exp(c * t) * R;
}

Scalar junction_time(Scalar lambda, Scalar c) {
  require(lambda > 0 && lambda < 1,
          "junction_time: formula holds for 0 < lambda < 1");
  require(c > 0, "junction_time: c must be positive");
  return -lambda * std::log(lambda) / (2 * c);
}

Scalar hessian_norm(const Problem& p, const VecX& w, int iters) {
  VecX v = VecX::Ones(p.dim()).normalized();
  // Deterministic perturbation so symmetric cancellations don't stall.
  for (Index i = 0; i < v.size(); ++i) v[i] += 1e-3 * ((i % 7) - 3);
  v.normalize();
  Scalar norm = 0;
  for (int k = 0; k < iters; ++k) {
    VecX hv = p.hessian_vec(w, v);
    norm = hv.norm();
    if (norm < 1e-300) return 0;
    v = hv / norm;
  }
  return norm;
}

Scalar lipschitz_estimate(const Problem& p, const Trajectory& traj) {
  Scalar c = 0;
  for (const auto& w : traj.states) c = std::max(c, hessian_norm(p, w, 40));
  return 2 * c;
}

}  // namespace grokflow

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grokflow/flows.hpp"
#include "grokflow/oracles.hpp"
#include "grokflow/rng.hpp"
#include "grokflow/spectral.hpp"

#include <cmath>

using namespace grokflow;

namespace {

struct Instance {
  MatX X;
  VecX y, w0;
};

Instance random_linreg(std::uint64_t seed, Index n = 4, Index d = 9) {
  CounterRng rng(seed);
  return {rng.gaussian_matrix(n, d), rng.gaussian_vector(n),
          rng.gaussian_vector(d)};
}

}  // namespace

TEST_CASE("regularised loss descends along every trajectory") {
  auto [X, y, w0] = random_linreg(21);
  LinearRegressionProblem p(X, y);
  for (double lam : {0.0, 1e-2, 1e-3}) {
    IntegratorSpec spec;
    spec.record_points = 80;
    Trajectory tr = integrate_regularized(p, w0, lam, 50.0, spec);
    const auto& loss = tr.series("reg_loss");
    for (std::size_t i = 1; i < loss.size(); ++i)
      CHECK(loss[i] <= loss[i - 1] + 1e-8 * (1 + loss[0]));
  }
}

TEST_CASE("energy identity: dF/dt = -|grad F_lambda|^2 at recorded points") {
  auto [X, y, w0] = random_linreg(22);
  LinearRegressionProblem p(X, y);
  IntegratorSpec spec;
  spec.record_points = 2000;  // dense sampling for the finite difference
  const double lam = 1e-2;
  Trajectory tr = integrate_regularized(p, w0, lam, 3.0, spec);
  const auto& loss = tr.series("reg_loss");
  const auto& g = tr.series("reg_grad_norm");
  int checked = 0;
  for (std::size_t i = 1; i + 1 < tr.times.size(); ++i) {
    const double dt = tr.times[i + 1] - tr.times[i - 1];
    if (dt <= 0 || dt > 1e-3) continue;  // only where sampling is dense
    const double lhs = (loss[i + 1] - loss[i - 1]) / dt;
    const double rhs = -g[i] * g[i];
    if (std::abs(rhs) < 1e-3) continue;
    CHECK(std::abs(lhs - rhs) <= 1e-3 * std::abs(rhs));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("trajectories stay bounded uniformly over the lambda grid") {
  auto [X, y, w0] = random_linreg(23);
  LinearRegressionProblem p(X, y);
  IntegratorSpec spec;
  std::vector<double> sups;
  for (double lam : {1e-2, 1e-3, 1e-4}) {
    Trajectory tr = integrate_regularized(p, w0, lam, 30.0, spec);
    double sup = 0;
    for (const auto& w : tr.states) sup = std::max(sup, w.norm());
    sups.push_back(sup);
  }
  for (double s : sups) {
    CHECK(s <= 2.0 * sups[0]);
    CHECK(sups[0] <= 2.0 * s);
  }
}

TEST_CASE("fast-phase gap scales linearly in lambda") {
  auto [X, y, w0] = random_linreg(24);
  LinearRegressionProblem p(X, y);
  IntegratorSpec spec;
  spec.record_points = 60;
  const double T = 5.0;
  Trajectory base = integrate_gf(p, w0, T, spec);
  std::vector<double> sups;
  for (double lam : {1e-2, 1e-3, 1e-4}) {
    Trajectory tr = integrate_regularized(p, w0, lam, T, spec);
    REQUIRE(tr.times.size() == base.times.size());
    double sup = 0;
    for (std::size_t i = 0; i < tr.states.size(); ++i)
      sup = std::max(sup, (tr.states[i] - base.states[i]).norm());
    sups.push_back(sup);
  }
  for (std::size_t i = 1; i < sups.size(); ++i) {
    const double ratio = sups[i - 1] / sups[i];
    CHECK(ratio >= 5.0);
    CHECK(ratio <= 20.0);
  }
}

TEST_CASE("rk4 global error scales as step^4 on the 1-D quadratic") {
  // F(w) = w^2 / 2, flow solution w(t) = w0 e^{-t}.
  MatX X(1, 1);
  X(0, 0) = 1.0;
  LinearRegressionProblem p(X, VecX::Zero(1));
  VecX w0(1);
  w0[0] = 1.0;
  const double T = 2.0, exact = std::exp(-T);
  auto err_at = [&](double h) {
    IntegratorSpec spec;
    spec.method = Method::rk4_fixed;
    spec.step = h;
    spec.record_times = {T};
    Trajectory tr = integrate_gf(p, w0, T, spec);
    return std::abs(tr.final_state()[0] - exact);
  };
  const double e1 = err_at(0.1), e2 = err_at(0.05);
  const double ratio = e1 / e2;
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("adaptive integrator matches the closed form tightly") {
  auto [X, y, w0] = random_linreg(25, 3, 6);
  LinearRegressionProblem p(X, y);
  oracles::LinRegClosedForm cf(X, y, w0);
  IntegratorSpec spec;
  spec.rel_tol = 1e-10;
  spec.abs_tol = 1e-12;
  spec.record_points = 40;
  const double lam = 1e-2;
  Trajectory tr = integrate_regularized(p, w0, lam, 20.0, spec);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    VecX ref = cf.at(tr.times[i], lam);
    CHECK((tr.states[i] - ref).norm() <= 1e-7 * (1 + ref.norm()));
  }
}

TEST_CASE("gd records at t = gamma * k and descends for small steps") {
  auto [X, y, w0] = random_linreg(26);
  LinearRegressionProblem p(X, y);
  Trajectory tr = integrate_gd(p, w0, 1e-3, 1e-3, 20000, 50);
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.times.back() == doctest::Approx(1e-3 * 20000));
  const auto& loss = tr.series("reg_loss");
  for (std::size_t i = 1; i < loss.size(); ++i)
    CHECK(loss[i] <= loss[i - 1] + 1e-8 * (1 + loss[0]));
}

TEST_CASE("phi_map lands at a near-stationary point of the flow") {
  auto [X, y, w0] = random_linreg(27);
  LinearRegressionProblem p(X, y);
  IntegratorSpec spec;
  auto phi = phi_map(p, w0, phi_default_grad_tol(p, w0), 1e6, spec);
  CHECK(phi.converged);
  CHECK(p.gradient(phi.w).norm() <= phi_default_grad_tol(p, w0));
  // Kernel component of w0 is preserved by the unregularised flow.
  VecX w_star = oracles::min_norm_solution(X, y);
  VecX kernel_ref = w0 - spectral::pinv_apply(X, X * w0);
  CHECK((phi.w - (w_star + kernel_ref)).norm() <= 1e-6 * (1 + phi.w.norm()));
}

TEST_CASE("slow reparameterisation rescales times by lambda") {
  auto [X, y, w0] = random_linreg(28);
  LinearRegressionProblem p(X, y);
  IntegratorSpec spec;
  Trajectory tr = integrate_regularized(p, w0, 1e-2, 100.0, spec);
  Trajectory slow = slow_reparam(tr);
  REQUIRE(slow.times.size() == tr.times.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    CHECK(slow.times[i] == doctest::Approx(1e-2 * tr.times[i]));
  CHECK(slow.timescale_tag == Timescale::slow);
}

TEST_CASE("divergence guard raises on blow-up") {
  // Gradient *ascent* via a negated target: integrate a flow that blows up
  // by using gd with an unstable step size.
  auto [X, y, w0] = random_linreg(29);
  LinearRegressionProblem p(X, y);
  CHECK_THROWS_AS(integrate_gd(p, w0, 0.0, 1e3, 10000, 10), DivergenceError);
}

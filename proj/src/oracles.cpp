#include "grokflow/oracles.hpp"

#include "grokflow/spectral.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace grokflow::oracles {

// ---------------------------------------------------------------------------
// Linear-regression closed form

LinRegClosedForm::LinRegClosedForm(const MatX& X, const VecX& y,
                                   const VecX& w0) {
  require(X.rows() == y.size() && X.cols() == w0.size(),
          "LinRegClosedForm: dimension mismatch");
  n_ = X.rows();
  const Index d = X.cols();
  // Full right singular basis of X: eigenvectors of X^T X, descending.
  auto [evals, evecs] = spectral::sym_eig(X.transpose() * X);
  V_ = MatX(d, d);
  sigma_ = VecX(d);
  for (Index i = 0; i < d; ++i) {
    V_.col(i) = evecs.col(d - 1 - i);
    sigma_[i] = std::sqrt(std::max<Scalar>(0, evals[d - 1 - i]));
  }
  VecX w_star = min_norm_solution(X, y);
  z_star_ = V_.transpose() * w_star;
  z0_ = V_.transpose() * w0;
}

VecX LinRegClosedForm::at(Scalar t, Scalar lambda) const {
  require(t >= 0 && lambda >= 0, "LinRegClosedForm: t, lambda >= 0");
  const Index d = z0_.size();
  VecX z(d);
  for (Index i = 0; i < d; ++i) {
    const Scalar s2 = sigma_[i] * sigma_[i];
    if (i < n_) {
      const Scalar z_inf =
          (s2 + lambda) > 0 ? s2 / (s2 + lambda) * z_star_[i] : 0;
      z[i] = z_inf + std::exp(-(s2 + lambda) * t) * (z0_[i] - z_inf);
    } else {
      z[i] = std::exp(-lambda * t) * z0_[i];
    }
  }
  return V_ * z;
}

VecX LinRegClosedForm::limit(Scalar lambda) const {
  const Index d = z0_.size();
  VecX z(d);
  for (Index i = 0; i < d; ++i) {
    const Scalar s2 = sigma_[i] * sigma_[i];
    if (i < n_)
      z[i] = (s2 + lambda) > 0 ? s2 / (s2 + lambda) * z_star_[i] : 0;
    else
      z[i] = lambda > 0 ? 0 : z0_[i];
  }
  return V_ * z;
}

VecX min_norm_solution(const MatX& X, const VecX& y) {
  return spectral::pinv_apply(X, y);
}

Scalar nuclear_norm(const MatX& M) {
  return spectral::svd(M).sigma.sum();
}

Scalar srebro_gap(const MatX& U, const MatX& V) {
  require(U.cols() == V.cols(), "srebro_gap: factor rank mismatch");
  return 0.5 * (U.squaredNorm() + V.squaredNorm()) -
         nuclear_norm(U * V.transpose());
}

// ---------------------------------------------------------------------------
// Basis pursuit

namespace {

VecX soft_threshold(const VecX& x, Scalar t) {
  VecX out(x.size());
  for (Index i = 0; i < x.size(); ++i)
    out[i] = x[i] > t ? x[i] - t : (x[i] < -t ? x[i] + t : 0);
  return out;
}

}  // namespace

L1Result l1_min_interpolant(const MatX& X, const VecX& y, Scalar tol) {
  require(X.rows() == y.size(), "l1_min_interpolant: dimension mismatch");
  require(X.rows() <= X.cols(), "l1_min_interpolant: requires n <= d");
  if (tol <= 0) tol = 1e-7 * (1.0 + y.norm());

  // Precompute the affine projection b -> b - X^+(Xb - y).
  auto sX = spectral::svd(X);
  const Scalar cutoff = sX.sigma.size() ? 1e-12 * sX.sigma[0] : 0;
  auto affine_proj = [&](const VecX& b) -> VecX {
    VecX r = X * b - y;
    VecX z = sX.U.transpose() * r;
    for (Index i = 0; i < sX.sigma.size(); ++i)
      z[i] = sX.sigma[i] > cutoff ? z[i] / sX.sigma[i] : 0;
    return b - sX.V * z;
  };
  // Dual candidate recovered from the splitting itself: at a fixed point,
  // z - x = X^T mu (normal to the affine set) and (x - z)/gamma lies in the
  // l1 subdifferential, so nu = (x - z) pulled back through X^T and divided
  // by gamma is dual feasible with zero gap. Rescaled for strict feasibility.
  auto dual_gap = [&](const VecX& x, const VecX& z_cur,
                      Scalar gamma) -> Scalar {
    VecX nu = spectral::pinv_apply(X.transpose(), (x - z_cur) / gamma);
    Scalar inf_norm = (X.transpose() * nu).lpNorm<Eigen::Infinity>();
    if (inf_norm > 1) nu /= inf_norm;
    return x.lpNorm<1>() - y.dot(nu);
  };

  VecX x0 = spectral::pinv_apply(X, y);
  const Scalar gamma =
      std::max<Scalar>(1e-6, 0.1 * x0.cwiseAbs().maxCoeff());

  // Douglas-Rachford on iota_{Xb=y} + |.|_1.
  VecX z = x0;
  L1Result res;
  const int max_iters = 200000;
  for (int k = 1; k <= max_iters; ++k) {
    VecX x = affine_proj(z);
    if (k % 50 == 0 || k == max_iters) {
      Scalar gap = dual_gap(x, z, gamma);
      if (std::abs(gap) <= tol) {
        res.beta = x;
        res.objective = x.lpNorm<1>();
        res.feasibility = (X * x - y).norm();
        res.duality_gap = gap;
        res.iterations = k;
        res.converged = true;
        return res;
      }
    }
    VecX r = soft_threshold(2 * x - z, gamma);
    z += r - x;
  }
  VecX x = affine_proj(z);
  res.beta = x;
  res.objective = x.lpNorm<1>();
  res.feasibility = (X * x - y).norm();
  res.duality_gap = dual_gap(x, z, gamma);
  res.iterations = max_iters;
  res.converged = false;
  throw std::runtime_error(
      "l1_min_interpolant: no convergence within iteration budget "
      "(duality gap " +
      std::to_string(res.duality_gap) + ")");
}

// ---------------------------------------------------------------------------
// Grokking diagnostics

GrokThreshold grok_threshold(const Problem& p, const VecX& w0,
                             const VecX& w_gf_limit) {
  require(w_gf_limit.norm() > 0, "grok_threshold: zero gradient-flow limit");
  const Scalar g0 = p.gradient(w0).norm();
  if (g0 == 0) return {0, true};
  return {g0 / w_gf_limit.norm(), false};
}

TimescaleReport timescale_report(const Trajectory& fast_traj,
                                 const Trajectory& slow_traj, Scalar lambda,
                                 Scalar eps, Scalar threshold) {
  TimescaleReport rep;
  rep.lambda = lambda;
  rep.threshold = threshold;

  const auto& t_fast = fast_traj.times;
  const auto& gn = fast_traj.series("grad_norm");
  const auto& wn2 = fast_traj.series("weight_norm_sq");
  require(!t_fast.empty(), "timescale_report: empty trajectory");

  const Scalar g0 = gn.front();
  for (std::size_t i = 0; i < t_fast.size(); ++i) {
    if (!rep.t_gf && t_fast[i] > 0 && gn[i] <= eps * g0) rep.t_gf = t_fast[i];
    if (!rep.t_wd && t_fast[i] > 0 && lambda > 0 &&
        gn[i] <= lambda * std::sqrt(wn2[i]))
      rep.t_wd = t_fast[i];
  }
  if (!rep.t_gf) rep.flags += "t_gf_not_crossed;";
  if (!rep.t_wd) rep.flags += "t_wd_not_crossed;";
  if (rep.t_gf && rep.t_wd && *rep.t_gf > 0)
    rep.plateau_log_span = std::log10(*rep.t_wd / *rep.t_gf);

  // Main |w|^2 descent interval from the slow trajectory, measured after the
  // training loss has converged so the fast-phase norm change is excluded.
  const auto& t_slow = slow_traj.times;
  const auto& swn2 = slow_traj.series("weight_norm_sq");
  if (!t_slow.empty()) {
    std::size_t i0 = 0;
    if (rep.t_gf && lambda > 0) {
      const Scalar slow_t_gf = lambda * *rep.t_gf;
      while (i0 + 1 < t_slow.size() && t_slow[i0] < slow_t_gf) ++i0;
    }
    const Scalar start = swn2[i0], end = swn2.back();
    const Scalar descent = start - end;
    if (descent > 1e-12 * (1 + start)) {
      for (std::size_t i = i0; i < t_slow.size(); ++i) {
        if (!rep.drop_start && swn2[i] <= start - 0.2 * descent)
          rep.drop_start = t_slow[i];
        if (!rep.drop_end && swn2[i] <= start - 0.9 * descent)
          rep.drop_end = t_slow[i];
      }
      if (rep.drop_start && rep.drop_end && *rep.drop_start > 0)
        rep.drop_log_span = std::log10(*rep.drop_end / *rep.drop_start);
    } else {
      rep.flags += "no_norm_descent;";
    }
  }

  // Factor-10 separation rule; the threshold has no sharp constant.
  if (threshold > 0 && lambda > 0) {
    rep.grokking_expected = threshold / lambda >= 10;
  } else if (rep.t_gf && rep.t_wd) {
    rep.grokking_expected = *rep.t_wd / *rep.t_gf >= 10;
  }
  if (lambda == 0) rep.grokking_expected = false;
  return rep;
}

std::string TimescaleReport::to_json() const {
  nlohmann::json j;
  j["t_gf"] = t_gf ? nlohmann::json(*t_gf) : nlohmann::json(nullptr);
  j["t_wd"] = t_wd ? nlohmann::json(*t_wd) : nlohmann::json(nullptr);
  j["drop_start"] = drop_start ? nlohmann::json(*drop_start)
                               : nlohmann::json(nullptr);
  j["drop_end"] =
      drop_end ? nlohmann::json(*drop_end) : nlohmann::json(nullptr);
  j["plateau_log_span"] = plateau_log_span;
  j["drop_log_span"] = drop_log_span;
  j["grokking_expected"] = grokking_expected;
  j["lambda"] = lambda;
  j["threshold"] = threshold;
  if (!flags.empty()) j["flags"] = flags;
  return j.dump(2);
}

}  // namespace grokflow::oracles

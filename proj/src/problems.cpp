#include "grokflow/problems.hpp"

#include "grokflow/spectral.hpp"

#include <cmath>

namespace grokflow {

// ---------------------------------------------------------------------------
// Linear regression

LinearRegressionProblem::LinearRegressionProblem(MatX X, VecX y)
    : X_(std::move(X)), y_(std::move(y)) {
  require(X_.rows() == y_.size(), "linear_regression: dimension mismatch");
  require(X_.rows() <= X_.cols(),
          "linear_regression: requires n <= d (overparameterised)");
  require(all_finite(X_) && y_.allFinite(),
          "linear_regression: non-finite data");
  XtX_ = X_.transpose() * X_;
  Xty_ = X_.transpose() * y_;
  auto s = spectral::svd(X_);
  sigma_max_ = s.sigma.size() ? s.sigma[0] : 0;
  sigma_min_ = s.sigma.size() ? s.sigma[s.sigma.size() - 1] : 0;
  rank_warning_ = sigma_min_ < 1e-10 * sigma_max_;
}

Scalar LinearRegressionProblem::value(const VecX& w) const {
  check_dim(w);
  return 0.5 * (X_ * w - y_).squaredNorm();
}

VecX LinearRegressionProblem::gradient(const VecX& w) const {
  check_dim(w);
  return X_.transpose() * (X_ * w - y_);
}

MatX LinearRegressionProblem::hessian(const VecX& w) const {
  check_dim(w);
  return XtX_;
}

VecX LinearRegressionProblem::hessian_vec(const VecX& w, const VecX& v) const {
  check_dim(w);
  require(v.size() == dim(), "hessian_vec: direction dimension mismatch");
  return X_.transpose() * (X_ * v);
}

// ---------------------------------------------------------------------------
// Matrix completion

MatrixCompletionProblem::MatrixCompletionProblem(
    MatX M_star, std::vector<std::pair<Index, Index>> mask, Index r)
    : M_star_(std::move(M_star)), mask_(std::move(mask)), r_(r) {
  require(r_ >= 1, "matrix_completion: rank must be >= 1");
  require(!mask_.empty(), "matrix_completion: empty mask");
  require(all_finite(M_star_), "matrix_completion: non-finite target");
  mask_indicator_ = MatX::Zero(M_star_.rows(), M_star_.cols());
  for (auto [i, j] : mask_) {
    require(i >= 0 && i < M_star_.rows() && j >= 0 && j < M_star_.cols(),
            "matrix_completion: mask index out of range");
    mask_indicator_(i, j) = 1.0;
  }
}

std::string MatrixCompletionProblem::layout() const {
  return "[U(" + std::to_string(rows()) + "x" + std::to_string(r_) + "), V(" +
         std::to_string(cols()) + "x" + std::to_string(r_) +
         ")] column-major";
}

VecX MatrixCompletionProblem::pack(const MatX& U, const MatX& V) const {
  require(U.rows() == rows() && U.cols() == r_ && V.rows() == cols() &&
              V.cols() == r_,
          "matrix_completion: factor shape mismatch");
  VecX w(dim());
  w.head(rows() * r_) = Eigen::Map<const VecX>(U.data(), U.size());
  w.tail(cols() * r_) = Eigen::Map<const VecX>(V.data(), V.size());
  return w;
}

std::pair<MatX, MatX> MatrixCompletionProblem::unpack(const VecX& w) const {
  check_dim(w);
  MatX U = Eigen::Map<const MatX>(w.data(), rows(), r_);
  MatX V = Eigen::Map<const MatX>(w.data() + rows() * r_, cols(), r_);
  return {U, V};
}

MatX MatrixCompletionProblem::masked_residual(const MatX& U,
                                              const MatX& V) const {
  return mask_indicator_.cwiseProduct(U * V.transpose() - M_star_);
}

Scalar MatrixCompletionProblem::value(const VecX& w) const {
  auto [U, V] = unpack(w);
  return masked_residual(U, V).squaredNorm();
}

VecX MatrixCompletionProblem::gradient(const VecX& w) const {
  auto [U, V] = unpack(w);
  MatX R = masked_residual(U, V);
  MatX gU = 2.0 * R * V;
  MatX gV = 2.0 * R.transpose() * U;
  return pack(gU, gV);
}

VecX MatrixCompletionProblem::hessian_vec(const VecX& w, const VecX& v) const {
  auto [U, V] = unpack(w);
  auto [dU, dV] = unpack(v);
  MatX R = masked_residual(U, V);
  MatX dR =
      mask_indicator_.cwiseProduct(dU * V.transpose() + U * dV.transpose());
  MatX hU = 2.0 * (dR * V + R * dV);
  MatX hV = 2.0 * (dR.transpose() * U + R.transpose() * dU);
  return pack(hU, hV);
}

MatX MatrixCompletionProblem::hessian(const VecX& w) const {
  auto [U, V] = unpack(w);
  MatX R = masked_residual(U, V);
  const Index n = rows(), m = cols(), r = r_;
  const Index d = dim();
  MatX H = MatX::Zero(d, d);

  // Column-major index helpers matching pack().
  auto ui = [&](Index a, Index b) { return b * n + a; };
  auto vi = [&](Index c, Index dcol) { return n * r + dcol * m + c; };

  // d2F/dU_{ab} dU_{a b'} = 2 sum_j mask(a,j) V_{jb} V_{jb'}
  for (Index a = 0; a < n; ++a) {
    MatX Va = MatX::Zero(r, r);
    for (Index j = 0; j < m; ++j)
      if (mask_indicator_(a, j) > 0)
        Va += V.row(j).transpose() * V.row(j);
    for (Index b = 0; b < r; ++b)
      for (Index b2 = 0; b2 < r; ++b2) H(ui(a, b), ui(a, b2)) = 2.0 * Va(b, b2);
  }
  // d2F/dV_{cd} dV_{c d'} = 2 sum_i mask(i,c) U_{id} U_{id'}
  for (Index c = 0; c < m; ++c) {
    MatX Uc = MatX::Zero(r, r);
    for (Index i = 0; i < n; ++i)
      if (mask_indicator_(i, c) > 0)
        Uc += U.row(i).transpose() * U.row(i);
    for (Index b = 0; b < r; ++b)
      for (Index b2 = 0; b2 < r; ++b2) H(vi(c, b), vi(c, b2)) = 2.0 * Uc(b, b2);
  }
  // d2F/dU_{ab} dV_{cd} = 2 mask(a,c) (U_{ad} V_{cb} + r_{ac} delta_{bd})
  for (auto [a, c] : mask_) {
    for (Index b = 0; b < r; ++b)
      for (Index d2 = 0; d2 < r; ++d2) {
        Scalar val = 2.0 * (U(a, d2) * V(c, b) + (b == d2 ? R(a, c) : 0.0));
        H(ui(a, b), vi(c, d2)) += val;
        H(vi(c, d2), ui(a, b)) += val;
      }
  }
  return 0.5 * (H + H.transpose());
}

std::optional<Scalar> MatrixCompletionProblem::test_loss(const VecX& w) const {
  auto [U, V] = unpack(w);
  return (M_star_ - U * V.transpose()).norm();
}

std::map<std::string, Scalar> MatrixCompletionProblem::extras(
    const VecX& w) const {
  auto [U, V] = unpack(w);
  std::map<std::string, Scalar> out;
  out["factor_norm_sq"] = U.squaredNorm() + V.squaredNorm();
  auto s = spectral::svd(U * V.transpose());
  Index k = std::min<Index>(s.sigma.size(), std::min(rows(), cols()));
  for (Index i = 0; i < k; ++i) {
    std::string name = "sigma_" + std::to_string(i + 1);
    if (i + 1 < 10) name = "sigma_0" + std::to_string(i + 1);
    out[name] = s.sigma[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal net

DiagonalNetProblem::DiagonalNetProblem(MatX X, VecX y)
    : X_(std::move(X)), y_(std::move(y)) {
  require(X_.rows() == y_.size(), "diagonal_net: dimension mismatch");
  require(X_.rows() <= X_.cols(), "diagonal_net: requires n <= d");
  require(all_finite(X_) && y_.allFinite(), "diagonal_net: non-finite data");
}

DiagonalNetProblem::DiagonalNetProblem(MatX X, VecX y, DataSet test)
    : DiagonalNetProblem(std::move(X), std::move(y)) {
  (void)test;
}

void DiagonalNetProblem::set_test_features(MatX Xt, VecX yt) {
  require(Xt.rows() == yt.size() && Xt.cols() == X_.cols(),
          "diagonal_net: test feature shape mismatch");
  test_X_ = std::move(Xt);
  test_y_ = std::move(yt);
}

VecX DiagonalNetProblem::beta(const VecX& w) const {
  check_dim(w);
  const Index d = X_.cols();
  return w.head(d).cwiseProduct(w.head(d)) -
         w.tail(d).cwiseProduct(w.tail(d));
}

Scalar DiagonalNetProblem::value(const VecX& w) const {
  return 0.5 * (X_ * beta(w) - y_).squaredNorm();
}

VecX DiagonalNetProblem::gradient(const VecX& w) const {
  const Index d = X_.cols();
  VecX g = X_.transpose() * (X_ * beta(w) - y_);
  VecX out(2 * d);
  out.head(d) = 2.0 * w.head(d).cwiseProduct(g);
  out.tail(d) = -2.0 * w.tail(d).cwiseProduct(g);
  return out;
}

MatX DiagonalNetProblem::hessian(const VecX& w) const {
  const Index d = X_.cols();
  VecX u = w.head(d), v = w.tail(d);
  VecX g = X_.transpose() * (X_ * beta(w) - y_);
  MatX XtX = X_.transpose() * X_;
  MatX H(2 * d, 2 * d);
  MatX Duu = 4.0 * u.asDiagonal() * XtX * u.asDiagonal();
  Duu += (2.0 * g).asDiagonal();
  MatX Dvv = 4.0 * v.asDiagonal() * XtX * v.asDiagonal();
  Dvv -= (2.0 * g).asDiagonal();
  MatX Duv = -4.0 * u.asDiagonal() * XtX * v.asDiagonal();
  H.topLeftCorner(d, d) = Duu;
  H.bottomRightCorner(d, d) = Dvv;
  H.topRightCorner(d, d) = Duv;
  H.bottomLeftCorner(d, d) = Duv.transpose();
  return 0.5 * (H + H.transpose());
}

VecX DiagonalNetProblem::hessian_vec(const VecX& w, const VecX& dw) const {
  check_dim(w);
  require(dw.size() == dim(), "hessian_vec: direction dimension mismatch");
  const Index d = X_.cols();
  VecX u = w.head(d), v = w.tail(d);
  VecX du = dw.head(d), dv = dw.tail(d);
  VecX g = X_.transpose() * (X_ * beta(w) - y_);
  VecX dbeta = 2.0 * (u.cwiseProduct(du) - v.cwiseProduct(dv));
  VecX dg = X_.transpose() * (X_ * dbeta);
  VecX out(2 * d);
  out.head(d) = 2.0 * (du.cwiseProduct(g) + u.cwiseProduct(dg));
  out.tail(d) = -2.0 * (dv.cwiseProduct(g) + v.cwiseProduct(dg));
  return out;
}

std::optional<Scalar> DiagonalNetProblem::test_loss(const VecX& w) const {
  if (test_X_.size() == 0) return std::nullopt;
  VecX pred = test_X_ * beta(w);
  return (pred - test_y_).squaredNorm() / static_cast<Scalar>(test_y_.size());
}

std::map<std::string, Scalar> DiagonalNetProblem::extras(const VecX& w) const {
  VecX b = beta(w);
  return {{"beta_l1", b.lpNorm<1>()}};
}

// ---------------------------------------------------------------------------
// Two-layer net

TwoLayerNetProblem::TwoLayerNetProblem(DataSet train, Index width,
                                       Activation act, Scalar softplus_beta)
    : train_(std::move(train)), m_(width), act_(act), beta_(softplus_beta) {
  require(m_ >= 1, "two_layer_net: width must be >= 1");
  require(train_.size() >= 1, "two_layer_net: empty training set");
  require(beta_ > 0, "two_layer_net: softplus beta must be positive");
}

TwoLayerNetProblem::TwoLayerNetProblem(DataSet train, DataSet test, Index width,
                                       Activation act, Scalar softplus_beta)
    : TwoLayerNetProblem(std::move(train), width, act, softplus_beta) {
  test_ = std::move(test);
}

Scalar TwoLayerNetProblem::act(Scalar z) const {
  if (act_ == Activation::relu) return z > 0 ? z : 0;
  // Stable softplus: log(1 + e^{bz}) / b.
  const Scalar bz = beta_ * z;
  if (bz > 30) return z;
  if (bz < -30) return std::exp(bz) / beta_;
  return std::log1p(std::exp(bz)) / beta_;
}

Scalar TwoLayerNetProblem::act_d(Scalar z) const {
  if (act_ == Activation::relu) return z > 0 ? 1 : 0;
  const Scalar bz = beta_ * z;
  if (bz > 30) return 1;
  if (bz < -30) return std::exp(bz);
  return 1.0 / (1.0 + std::exp(-bz));
}

Scalar TwoLayerNetProblem::act_dd(Scalar z) const {
  if (act_ == Activation::relu) return 0;  // distributional term dropped
  const Scalar s = act_d(z);
  return beta_ * s * (1 - s);
}

Scalar TwoLayerNetProblem::predict(const VecX& w, Scalar x) const {
  check_dim(w);
  Scalar f = 0;
  for (Index j = 0; j < m_; ++j)
    f += w[j] * act(w[m_ + j] * x + w[2 * m_ + j]);
  return f;
}

Scalar TwoLayerNetProblem::value(const VecX& w) const {
  check_dim(w);
  const Index n = train_.size();
  Scalar s = 0;
  for (Index i = 0; i < n; ++i) {
    Scalar e = predict(w, train_.inputs[i]) - train_.targets[i];
    s += e * e;
  }
  return s / (2.0 * n);
}

VecX TwoLayerNetProblem::gradient(const VecX& w) const {
  check_dim(w);
  const Index n = train_.size();
  VecX g = VecX::Zero(dim());
  for (Index i = 0; i < n; ++i) {
    const Scalar x = train_.inputs[i];
    Scalar f = 0;
    for (Index j = 0; j < m_; ++j)
      f += w[j] * act(w[m_ + j] * x + w[2 * m_ + j]);
    const Scalar e = (f - train_.targets[i]) / n;
    for (Index j = 0; j < m_; ++j) {
      const Scalar z = w[m_ + j] * x + w[2 * m_ + j];
      const Scalar sd = act_d(z);
      g[j] += e * act(z);
      g[m_ + j] += e * w[j] * sd * x;
      g[2 * m_ + j] += e * w[j] * sd;
    }
  }
  return g;
}

MatX TwoLayerNetProblem::hessian(const VecX& w) const {
  check_dim(w);
  const Index n = train_.size();
  const Index d = dim();
  MatX H = MatX::Zero(d, d);
  VecX df(d);
  for (Index i = 0; i < n; ++i) {
    const Scalar x = train_.inputs[i];
    Scalar f = 0;
    df.setZero();
    for (Index j = 0; j < m_; ++j) {
      const Scalar z = w[m_ + j] * x + w[2 * m_ + j];
      const Scalar a = act(z), sd = act_d(z);
      f += w[j] * a;
      df[j] = a;
      df[m_ + j] = w[j] * sd * x;
      df[2 * m_ + j] = w[j] * sd;
    }
    const Scalar e = f - train_.targets[i];
    H += (df * df.transpose()) / n;
    // e * Hess f: block-diagonal across units.
    for (Index j = 0; j < m_; ++j) {
      const Scalar z = w[m_ + j] * x + w[2 * m_ + j];
      const Scalar sd = act_d(z), sdd = act_dd(z);
      const Scalar c = e / n;
      H(j, m_ + j) += c * sd * x;
      H(m_ + j, j) += c * sd * x;
      H(j, 2 * m_ + j) += c * sd;
      H(2 * m_ + j, j) += c * sd;
      H(m_ + j, m_ + j) += c * w[j] * sdd * x * x;
      H(m_ + j, 2 * m_ + j) += c * w[j] * sdd * x;
      H(2 * m_ + j, m_ + j) += c * w[j] * sdd * x;
      H(2 * m_ + j, 2 * m_ + j) += c * w[j] * sdd;
    }
  }
  return 0.5 * (H + H.transpose());
}

VecX TwoLayerNetProblem::hessian_vec(const VecX& w, const VecX& v) const {
  require(v.size() == dim(), "hessian_vec: direction dimension mismatch");
  return hessian(w) * v;
}

std::optional<Scalar> TwoLayerNetProblem::test_loss(const VecX& w) const {
  if (test_.size() == 0) return std::nullopt;
  Scalar s = 0;
  for (Index i = 0; i < test_.size(); ++i) {
    Scalar e = predict(w, test_.inputs[i]) - test_.targets[i];
    s += e * e;
  }
  return s / test_.size();
}

// ---------------------------------------------------------------------------
// Factories and utilities

std::unique_ptr<LinearRegressionProblem> make_linear_regression(MatX X,
                                                                VecX y) {
  return std::make_unique<LinearRegressionProblem>(std::move(X), std::move(y));
}

std::unique_ptr<MatrixCompletionProblem> make_matrix_completion(
    MatX M_star, std::vector<std::pair<Index, Index>> mask, Index r) {
  return std::make_unique<MatrixCompletionProblem>(std::move(M_star),
                                                   std::move(mask), r);
}

std::unique_ptr<DiagonalNetProblem> make_diagonal_net(MatX X, VecX y) {
  return std::make_unique<DiagonalNetProblem>(std::move(X), std::move(y));
}

std::unique_ptr<TwoLayerNetProblem> make_two_layer_net(DataSet train,
                                                       Index width,
                                                       Activation act,
                                                       Scalar softplus_beta) {
  return std::make_unique<TwoLayerNetProblem>(std::move(train), width, act,
                                              softplus_beta);
}

VecX fourier_features(Scalar x, Index d_f) {
  VecX phi(2 * d_f + 1);
  phi[0] = 1.0;
  constexpr Scalar half_pi = 3.14159265358979323846 / 2.0;
  for (Index k = 1; k <= d_f; ++k) {
    phi[k] = std::cos(half_pi * k * x);
    phi[d_f + k] = std::sin(half_pi * k * x);
  }
  return phi;
}

MatX fourier_feature_matrix(const VecX& xs, Index d_f) {
  MatX X(xs.size(), 2 * d_f + 1);
  for (Index i = 0; i < xs.size(); ++i)
    X.row(i) = fourier_features(xs[i], d_f).transpose();
  return X;
}

FdCheckResult fd_check(const Problem& p, const VecX& w, Scalar h) {
  require(h > 0, "fd_check: step must be positive");
  const Index d = p.dim();
  const Scalar step = h * (1.0 + w.lpNorm<Eigen::Infinity>());
  VecX g_fd(d);
  MatX H_fd(d, d);
  VecX e = VecX::Zero(d);
  for (Index i = 0; i < d; ++i) {
    e[i] = step;
    g_fd[i] = (p.value(w + e) - p.value(w - e)) / (2 * step);
    H_fd.col(i) = (p.gradient(w + e) - p.gradient(w - e)) / (2 * step);
    e[i] = 0;
  }
  H_fd = 0.5 * (H_fd + H_fd.transpose());
  VecX g = p.gradient(w);
  MatX H = p.hessian(w);
  FdCheckResult r;
  r.grad_rel_error = (g_fd - g).norm() / std::max<Scalar>(1e-12, g.norm());
  r.hess_rel_error = (H_fd - H).norm() / std::max<Scalar>(1e-12, H.norm());
  return r;
}

}  // namespace grokflow

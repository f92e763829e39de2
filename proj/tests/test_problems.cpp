#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grokflow/config.hpp"
#include "grokflow/problems.hpp"
#include "grokflow/rng.hpp"

#include <memory>
#include <vector>

using namespace grokflow;

namespace {

// One random instance of each smooth problem family.
std::vector<std::unique_ptr<Problem>> smooth_instances(std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::unique_ptr<Problem>> out;

  out.push_back(make_linear_regression(rng.gaussian_matrix(3, 7),
                                       rng.gaussian_vector(3)));

  MatX A = rng.gaussian_matrix(4, 2), B = rng.gaussian_matrix(5, 2);
  std::vector<std::pair<Index, Index>> mask;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 5; ++j)
      if (rng.uniform() < 0.6) mask.emplace_back(i, j);
  out.push_back(make_matrix_completion(A * B.transpose(), mask, 3));

  out.push_back(make_diagonal_net(rng.gaussian_matrix(5, 9),
                                  rng.gaussian_vector(5)));

  VecX xs = rng.gaussian_vector(6), ys = rng.gaussian_vector(6);
  out.push_back(
      make_two_layer_net(DataSet(xs, ys), 8, Activation::softplus));
  return out;
}

}  // namespace

TEST_CASE("finite-difference checks on all smooth problems") {
  int pairs = 0;
  for (std::uint64_t seed = 100; seed < 125; ++seed) {
    CounterRng rng(seed * 31 + 1);
    for (auto& p : smooth_instances(seed)) {
      VecX w = rng.gaussian_vector(p->dim(), 0.7);
      auto res = fd_check(*p, w);
      CAPTURE(p->kind());
      CHECK(res.grad_rel_error <= 1e-5);
      CHECK(res.hess_rel_error <= 1e-4);
      ++pairs;
    }
  }
  CHECK(pairs == 100);
}

TEST_CASE("hessian_vec matches dense hessian") {
  CounterRng rng(7);
  for (auto& p : smooth_instances(42)) {
    VecX w = rng.gaussian_vector(p->dim(), 0.5);
    VecX v = rng.gaussian_vector(p->dim());
    MatX H = p->hessian(w);
    CHECK((p->hessian_vec(w, v) - H * v).norm() <=
          1e-8 * (1 + H.norm() * v.norm()));
    CHECK((H - H.transpose()).norm() <= 1e-8 * (1 + H.norm()));
  }
}

TEST_CASE("zero loss implies stationarity") {
  CounterRng rng(8);
  // Linear regression at an exact interpolant.
  MatX X = rng.gaussian_matrix(3, 7);
  VecX w_true = rng.gaussian_vector(7);
  auto lr = make_linear_regression(X, X * w_true);
  CHECK(lr->value(w_true) <= 1e-18);
  CHECK(lr->gradient(w_true).norm() <=
        1e-7 * (1 + lr->hessian(w_true).norm()));

  // Matrix completion at an exact factorisation.
  MatX A = rng.gaussian_matrix(4, 2), B = rng.gaussian_matrix(4, 2);
  std::vector<std::pair<Index, Index>> mask;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) mask.emplace_back(i, j);
  auto mc = make_matrix_completion(A * B.transpose(), mask, 2);
  VecX w = mc->pack(A, B);
  CHECK(mc->value(w) <= 1e-18);
  CHECK(mc->gradient(w).norm() <= 1e-7 * (1 + mc->hessian(w).norm()));
}

TEST_CASE("matrix completion loss is invariant under factor rotation") {
  CounterRng rng(9);
  MatX A = rng.gaussian_matrix(5, 2), B = rng.gaussian_matrix(6, 2);
  std::vector<std::pair<Index, Index>> mask;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 6; ++j)
      if (rng.uniform() < 0.5) mask.emplace_back(i, j);
  auto mc = make_matrix_completion(A * B.transpose(), mask, 3);

  MatX U = rng.gaussian_matrix(5, 3), V = rng.gaussian_matrix(6, 3);
  Eigen::HouseholderQR<MatX> qr(rng.gaussian_matrix(3, 3));
  MatX Q = qr.householderQ();
  const Scalar v0 = mc->value(mc->pack(U, V));
  const Scalar v1 = mc->value(mc->pack(U * Q, V * Q));
  CHECK(std::abs(v1 - v0) <= 1e-10 * (1 + std::abs(v0)));
}

TEST_CASE("diagonal net value depends only on u*u - v*v") {
  CounterRng rng(10);
  auto dn = make_diagonal_net(rng.gaussian_matrix(4, 6),
                              rng.gaussian_vector(4));
  VecX w = rng.gaussian_vector(12, 0.8);
  VecX w_flip = w;
  const Index k = rng.below(6);
  w_flip[k] = -w_flip[k];          // u_k -> -u_k
  w_flip[6 + k] = -w_flip[6 + k];  // v_k -> -v_k
  CHECK(std::abs(dn->value(w_flip) - dn->value(w)) <= 1e-12);
  CHECK((dn->beta(w_flip) - dn->beta(w)).norm() <= 1e-14);
}

TEST_CASE("fourier features span the expected basis") {
  VecX f = fourier_features(0.0, 3);
  REQUIRE(f.size() == 7);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == doctest::Approx(1.0));   // cos(0)
  CHECK(f[4] == doctest::Approx(0.0));   // sin(0)
  VecX g = fourier_features(1.0, 3);
  CHECK(g[1] == doctest::Approx(std::cos(3.14159265358979323846 / 2)));
}

TEST_CASE("two-layer relu problem flags itself as non-smooth") {
  CounterRng rng(11);
  VecX xs = rng.gaussian_vector(5), ys = rng.gaussian_vector(5);
  auto relu = make_two_layer_net(DataSet(xs, ys), 6, Activation::relu);
  auto soft = make_two_layer_net(DataSet(xs, ys), 6, Activation::softplus);
  CHECK(!relu->smooth());
  CHECK(soft->smooth());
}

TEST_CASE("dimension and finiteness guards reject bad input") {
  CounterRng rng(12);
  auto lr = make_linear_regression(rng.gaussian_matrix(3, 5),
                                   rng.gaussian_vector(3));
  CHECK_THROWS_AS((void)lr->value(VecX::Zero(4)), RejectedInputError);
  VecX bad = VecX::Zero(5);
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)lr->gradient(bad), RejectedInputError);
}

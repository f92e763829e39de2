#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grokflow/rng.hpp"
#include "grokflow/spectral.hpp"

using namespace grokflow;

namespace {

// Random symmetric matrix with a prescribed number of (near-)zero eigenvalues.
MatX rank_deficient_sym(CounterRng& rng, Index d, Index nullity) {
  MatX G = rng.gaussian_matrix(d, d);
  Eigen::HouseholderQR<MatX> qr(G);
  MatX Q = qr.householderQ();
  VecX evals(d);
  for (Index i = 0; i < d; ++i)
    evals[i] = i < nullity ? 0.0 : 0.5 + rng.uniform();
  return Q * evals.asDiagonal() * Q.transpose();
}

}  // namespace

TEST_CASE("nullspace projector: idempotent, symmetric, trace = nullity") {
  CounterRng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Index d = 3 + rng.below(30);
    const Index nullity = rng.below(d);
    MatX H = rank_deficient_sym(rng, d, nullity);
    auto probe = spectral::nullspace_projector(H);
    const MatX& P = probe.projector;
    CHECK((P * P - P).norm() <= 1e-9 * d);
    CHECK((P - P.transpose()).norm() <= 1e-12 * d);
    CHECK(P.trace() == doctest::Approx(static_cast<double>(nullity))
                           .epsilon(1e-9));
    CHECK(probe.gap_index == nullity);
  }
}

TEST_CASE("nullspace projector annihilates the Hessian range") {
  CounterRng rng(12);
  MatX H = rank_deficient_sym(rng, 12, 4);
  auto probe = spectral::nullspace_projector(H);
  CHECK((H * probe.projector).norm() <= 1e-8);
  // eta estimate is the smallest nonzero |eigenvalue|
  CHECK(probe.eta_estimate >= 0.5);
  CHECK(probe.eta_estimate <= 1.5);
  CHECK(!probe.saddle_warning);
}

TEST_CASE("saddle warning on a significantly negative eigenvalue") {
  CounterRng rng(13);
  MatX H = rank_deficient_sym(rng, 8, 2);
  H -= 0.3 * MatX::Identity(8, 8);
  auto probe = spectral::nullspace_projector(H);
  CHECK(probe.saddle_warning);
}

TEST_CASE("pinv_apply result is orthogonal to Ker(M)") {
  CounterRng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + rng.below(6);
    const Index d = n + 2 + rng.below(8);
    MatX M = rng.gaussian_matrix(n, d);
    VecX y = rng.gaussian_vector(n);
    VecX x = spectral::pinv_apply(M, y);
    auto probe = spectral::nullspace_projector(M.transpose() * M);
    CHECK((probe.projector * x).norm() <= 1e-8 * y.norm());
    CHECK((M * x - y).norm() <= 1e-8 * y.norm());
  }
}

TEST_CASE("svd and sym_eig agree on symmetric PSD inputs") {
  CounterRng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 4 + rng.below(12);
    MatX G = rng.gaussian_matrix(d, d);
    MatX A = G * G.transpose();
    auto [evals, evecs] = spectral::sym_eig(A);  // ascending
    auto svd = spectral::svd(A);                 // descending
    for (Index i = 0; i < d; ++i) {
      const double ev = evals[d - 1 - i];
      CHECK(svd.sigma[i] ==
            doctest::Approx(ev).epsilon(1e-9).scale(1.0 + std::abs(ev)));
    }
  }
}

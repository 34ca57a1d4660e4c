#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "phif/diagnostics.hpp"
#include "phif/factor.hpp"

using namespace phif;
using oracle::Mat;

namespace {

LinearOp dense_op(const Mat& D) {
  return [D](const Vector& x) -> Vector { return D * x; };
}

struct Heat {
  SymSparse A;
  DofHierarchy h;
};

Heat heat2d(int levels, Index leaf) {
  const auto grid = GridSpec::make(2, levels, leaf);
  BumpParams p;
  return {build_cn_pair(build_stiffness(grid, CoeffField::gaussian_bumps(2, p, grid.n)), grid.h()).A,
          build_hierarchy(grid)};
}

} // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("twice the identity is found in one iteration") {
  const auto e = est_opnorm([](const Vector& x) -> Vector { return 2 * x; }, 30);
  CHECK(e.value == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(e.iterations == 1);
  CHECK(e.converged);
}

TEST_CASE("dominant eigenvalue of a diagonal operator") {
  Mat D = Mat::Zero(3, 3);
  D.diagonal() << 1, 0.5, 0.25;
  const auto e = est_opnorm(dense_op(D), 3, 1e-2);
  CHECK(std::abs(e.value - 1.0) <= 1e-2);
  CHECK(e.value <= 1.0 + 1e-15);
}

TEST_CASE("random symmetric 40x40 within 2%") {
  std::mt19937_64 rng(7);
  const Mat G = oracle::random_spd(40, rng) - 40 * Mat::Identity(40, 40);
  const Mat S = 0.5 * (G + G.transpose());
  const double exact = oracle::spectral_norm(S);
  const auto e = est_opnorm(dense_op(S), 40, 1e-2, 64, 3);
  CHECK(std::abs(e.value - exact) <= 0.02 * exact);
}

TEST_CASE("estimator consistency over seeded trials") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(2, 64);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const int n = size(rng);
    const Mat G = oracle::random_spd(n, rng);
    const Mat S = trial % 2 ? Mat(G) : Mat(G - n * Mat::Identity(n, n));
    const double exact = oracle::spectral_norm(S);
    const auto e = est_opnorm(dense_op(S), n, 1e-2, 64, trial);
    INFO("trial " << trial << " n " << n);
    CHECK(e.value >= 0.0);
    CHECK(std::abs(e.value - exact) <= 0.05 * exact);
  }
}

TEST_CASE("seed determinism") {
  std::mt19937_64 rng(13);
  const Mat S = oracle::random_spd(30, rng);
  const auto a = est_opnorm(dense_op(S), 30, 1e-2, 64, 5), b = est_opnorm(dense_op(S), 30, 1e-2, 64, 5);
  CHECK(a.value == b.value);
  CHECK(a.iterations == b.iterations);
  const auto h = heat2d(2, 8);
  const auto F = factorize(h.A, h.h, 1e-3);
  CHECK(est_e_a(h.A, F, 1e-2, 64, 9).value == est_e_a(h.A, F, 1e-2, 64, 9).value);
  CHECK(est_e_s(h.A, F, 1e-2, 64, 9).value == est_e_s(h.A, F, 1e-2, 64, 9).value);
}

TEST_CASE("non-convergence is flagged, not an error") {
  Mat D = Mat::Zero(2, 2);
  D.diagonal() << 1, -1;
  const auto e = est_opnorm(dense_op(D), 2, 1e-12, 3);
  CHECK(e.iterations <= 3);
  CHECK(e.value == doctest::Approx(1.0));
}

TEST_CASE("invalid dimension") {
  CHECK_THROWS_AS(est_opnorm([](const Vector& x) { return x; }, 0), InvalidArgument);
}

TEST_CASE("exact-limit factor errors") {
  const auto h = heat2d(1, 16);
  const auto F = factorize(h.A, h.h, 1e-15);
  CHECK(est_e_a(h.A, F).value <= 1e-10);
  CHECK(est_e_s(h.A, F).value <= 1e-9);
}

TEST_CASE("estimates track dense factor errors") {
  const auto h = heat2d(2, 8);
  const auto F = factorize(h.A, h.h, 1e-3);
  const int N = h.A.dim();
  const Mat A = h.A.to_dense();
  const Mat Fd = oracle::materialize(N, [&](Vector& v) { v = F.apply(v); });
  const Mat Fi = oracle::materialize(N, [&](Vector& v) { v = F.apply_inverse(v); });
  const double ea = oracle::spectral_norm(A - Fd) / oracle::spectral_norm(A);
  const double es = oracle::spectral_norm(Mat::Identity(N, N) - A * Fi);
  CHECK(est_e_a(h.A, F).value == doctest::Approx(ea).epsilon(0.05));
  CHECK(est_e_s(h.A, F).value == doctest::Approx(es).epsilon(0.05));
}

TEST_CASE("errors decrease with the tolerance") {
  const auto h = heat2d(3, 8);
  double prev_a = 1e300, prev_s = 1e300;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const auto F = factorize(h.A, h.h, eps);
    const double a = est_e_a(h.A, F).value, s = est_e_s(h.A, F).value;
    CHECK(a < prev_a);
    CHECK(s < prev_s);
    prev_a = a;
    prev_s = s;
  }
}

} // TEST_SUITE

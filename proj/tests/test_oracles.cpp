#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "defectfe/oracles.hpp"

using namespace defectfe;

namespace {

HarmonicParams unit(std::size_t N) {
  HarmonicParams p;
  p.N = N;
  return p;
}

ChainSpec harmonic_chain(std::size_t N) {
  ChainSpec s;
  s.N = N;
  s.A = 1.0;
  s.psi = Potential::harmonic(1.0);
  s.defect = {Potential::harmonic(1.0)};
  return s;
}

}  // namespace

TEST_CASE("harmonic G_N examples") {
  CHECK(std::abs(harmonic_G_N(unit(2)) - (0.5 * std::log(1.5) + 2.0 / 3.0)) <= 1e-14);
  CHECK(harmonic_G_N(unit(8)) == doctest::Approx(0.847637663045).epsilon(1e-11));
  HarmonicParams p = unit(5);
  p.beta = 0.0;
  CHECK(harmonic_G_N(p) == 0.0);
  p.h1 = 0.5;
  CHECK_THROWS_AS(harmonic_G_N(p), InvalidInput);
  p = unit(1);
  CHECK_THROWS_AS(harmonic_G_N(p), InvalidInput);
  p = unit(4);
  p.alpha = 0.0;
  CHECK_THROWS_AS(harmonic_G_N(p), InvalidInput);
}

TEST_CASE("harmonic G_inf examples") {
  CHECK(harmonic_G_inf(unit(2)) == doctest::Approx(0.5 + 0.5 * std::log(2.0)).epsilon(1e-15));
  HarmonicParams p = unit(2);
  p.H = 1.0;
  p.H_bar = 1.0;
  CHECK(harmonic_G_inf(p) == doctest::Approx(1.5965735903).epsilon(1e-10));
  p = unit(2);
  p.A = 0.0;
  p.alpha = 2.0;
  p.beta = 3.0;
  CHECK(harmonic_G_inf(p) == doctest::Approx(0.5 * std::log(2.5)).epsilon(1e-15));
}

TEST_CASE("Gaussian full chain agrees with the closed form") {
  for (std::size_t N : {2u, 3u, 8u, 33u, 200u}) {
    for (double A : {0.0, 1.0, 2.5}) {
      HarmonicParams p = unit(N);
      p.alpha = 1.3;
      p.beta = 0.7;
      p.A = A;
      CHECK(std::abs(gaussian_chain_G_N(1.3, 0.7, A, N) - harmonic_G_N(p)) <= 1e-11 * (1.0 + static_cast<double>(N) * A * A));
    }
  }
}

TEST_CASE("dense quadrature oracle") {
  for (std::size_t N : {2u, 3u, 4u}) {
    CHECK(std::abs(dense_G_N(harmonic_chain(N)) - harmonic_G_N(unit(N))) <= 1e-8);
    ChainSpec free = harmonic_chain(N);
    free.defect = {};
    CHECK(std::abs(dense_G_N(free)) <= 1e-12);
  }
  const double exact2 = -std::log(std::exp(-8.0 / 3.0) * std::sqrt(std::numbers::pi / 3.0) /
                                  (std::exp(-2.0) * std::sqrt(std::numbers::pi / 2.0)));
  CHECK(std::abs(dense_G_N(harmonic_chain(2)) - exact2) <= 1e-10);
  CHECK_THROWS_AS(dense_G_N(harmonic_chain(5)), InvalidInput);
}

TEST_CASE("dense and Gaussian oracles with loads") {
  ChainSpec s = harmonic_chain(3);
  s.forces = ForceSequence::explicit_list({0.3, 1.0, -0.5}, 3);
  const double g = gaussian_chain_G_N(1.0, 1.0, 1.0, 3, {0.3, 1.0, -0.5});
  CHECK(std::abs(dense_G_N(s) - g) <= 1e-8);
  CHECK(std::abs(transfer_G_N(s) - g) <= 1e-8);
}

TEST_CASE("transfer oracle") {
  for (std::size_t N : {2u, 4u, 9u, 40u}) CHECK(std::abs(transfer_G_N(harmonic_chain(N)) - harmonic_G_N(unit(N))) <= 1e-8);
  ChainSpec q;
  q.N = 3;
  q.A = 2.0;
  q.psi = Potential::quartic_paper();
  q.defect = {Potential::harmonic(1.0)};
  CHECK(std::abs(transfer_G_N(q) - dense_G_N(q)) <= 1e-7);
}

TEST_CASE("coarse-graining recursion") {
  const CgRecursion r = harmonic_cg_recursion(5, 2, 1.0, 1.0, 1.0);
  REQUIRE(r.c.size() == 4);
  CHECK(r.c[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(r.d[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.f[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (std::size_t M : {3u, 5u, 9u}) {
    const CgRecursion s = harmonic_cg_recursion(M, 1, 1.0, 1.0, 1.0);
    for (std::size_t i = 1; i < M; ++i) {
      const double m = static_cast<double>(M - i);
      CHECK(s.c[i - 1] == doctest::Approx((m + 1.0) / m).epsilon(1e-14));
      CHECK(s.d[i - 1] == doctest::Approx(1.0 / m).epsilon(1e-14));
      CHECK(s.f[i - 1] == doctest::Approx(1.0 / m).epsilon(1e-14));
    }
  }
}

TEST_CASE("coarse-graining recursion is exact for every coarsening") {
  const double full = harmonic_G_N(unit(9));
  for (auto [p, M] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 9}, {2, 5}, {4, 3}}) {
    CHECK(std::abs(harmonic_cg_recursion(M, p, 1.0, 1.0, 1.0).value - full) <= 1e-12);
  }
  HarmonicParams q = unit(13);
  q.alpha = 2.0;
  q.beta = 0.5;
  q.A = 1.7;
  for (auto [p, M] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 13}, {2, 7}, {3, 5}, {4, 4}, {6, 3}}) {
    CHECK(std::abs(harmonic_cg_recursion(M, p, 2.0, 0.5, 1.7).value - harmonic_G_N(q)) <= 1e-12);
  }
  CHECK_THROWS_AS(harmonic_cg_recursion(2, 1, 1.0, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(harmonic_cg_recursion(5, 0, 1.0, 1.0, 1.0), InvalidInput);
}

TEST_CASE("harmonic rate: N |G_N - G_inf| is stable at a generic strain") {
  double lo = 1e300, hi = 0.0;
  for (std::size_t N = 2; N <= 1024; N *= 2) {
    HarmonicParams p = unit(N);
    p.A = 2.0;
    const double v = static_cast<double>(N) * std::abs(harmonic_G_N(p) - harmonic_G_inf(p));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi <= 2.0 * lo);
}

TEST_CASE("the 1/N coefficient cancels for alpha = beta = 1, A = 1") {
  // 1/N coefficient: alpha beta^2 A^2 / (alpha+beta)^2 - beta / (2 (alpha+beta))
  const double a = static_cast<double>(1024) * std::abs(harmonic_G_N(unit(1024)) - harmonic_G_inf(unit(1024)));
  CHECK(a < 1e-3);
  HarmonicParams p = unit(1024);
  p.A = 2.0;
  CHECK(static_cast<double>(1024) * std::abs(harmonic_G_N(p) - harmonic_G_inf(p)) ==
        doctest::Approx(0.75).epsilon(1e-3));
}

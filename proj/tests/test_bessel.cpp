#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "replica_sync/bessel.hpp"
#include "replica_sync/quadrature.hpp"

using namespace replica_sync;

TEST_CASE("moment ratio endpoints") {
  CHECK(so2_moment_ratio(1, 0.0) == 0.0);     // I_1(0) = 0
  CHECK(so2_moment_ratio(0, 3.7) == 1.0);     // ratio with itself
  CHECK(so2_moment_ratio(0, 1234.5) == 1.0);
}

TEST_CASE("moment ratio against direct series summation") {
  // j = 1, x = 10 pinned by the independent 200-term series oracle.
  const double expect =
      oracles::bessel_i_series(1, 20.0) / oracles::bessel_i_series(0, 20.0);
  CHECK(std::abs(so2_moment_ratio(1, 10.0) - expect) <= 1e-12);
  for (int j = 1; j <= 4; ++j) {
    for (double x : {0.3, 2.0, 7.5, 19.0}) {
      const double oracle = oracles::bessel_i_series(j, 2.0 * x) /
                            oracles::bessel_i_series(0, 2.0 * x);
      CHECK(so2_moment_ratio(j, x) == doctest::Approx(oracle).epsilon(1e-11));
    }
  }
}

TEST_CASE("series and backward recurrence agree across the switchover") {
  for (double x : {15.0, 19.9, 20.1, 25.0, 60.0, 95.0}) {
    // Miller ratios vs the series path evaluated in log space.
    const double oracle = oracles::bessel_i_series(2, 2.0 * x) /
                          oracles::bessel_i_series(0, 2.0 * x);
    CHECK(so2_moment_ratio(2, x) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("moment ratios live in [0,1] and decrease in j") {
  for (double x : {0.0, 0.1, 1.0, 5.0, 30.0, 200.0}) {
    double prev = 1.0;
    for (int j = 0; j <= 8; ++j) {
      const double u = so2_moment_ratio(j, x);
      CHECK(u >= 0.0);
      CHECK(u <= 1.0 + 1e-15);
      CHECK(u <= prev + 1e-14);
      prev = u;
    }
  }
}

TEST_CASE("scaled I0 matches the series on both branches") {
  CHECK(bessel_i0_scaled(0.0) == 1.0);
  for (double t : {1.0, 15.0, 39.9, 40.1, 80.0, 180.0}) {
    const double expect = oracles::bessel_i_series(0, t) * std::exp(-t);
    CHECK(bessel_i0_scaled(t) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("radial modulus density integrates to one") {
  // The density used inside so2_mmse: 2r exp(-(r - sqrt(g))^2) I0e(2 sqrt(g) r).
  for (double gamma : {0.0, 0.5, 2.0, 10.0, 50.0}) {
    const double root = std::sqrt(gamma);
    const QuadratureRule rule =
        gauss_legendre(400, std::max(0.0, root - 10.0), root + 10.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double r = rule.nodes[i];
      const double d = r - root;
      mass += rule.weights[i] * 2.0 * r * std::exp(-d * d) *
              bessel_i0_scaled(2.0 * root * r);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-11));
  }
}

TEST_CASE("mmse endpoints and monotonicity") {
  CHECK(so2_mmse(0.0) == 2.0);
  double prev = 2.0;
  for (double gamma = 0.5; gamma <= 10.0; gamma += 0.5) {
    const double m = so2_mmse(gamma);
    CHECK(m >= 0.0);
    CHECK(m <= prev + 1e-12);
    prev = m;
  }
}

TEST_CASE("scalar channel map: F(0) = 0, F'(0) = 1, concavity") {
  CHECK(so2_state_scalar(0.0) == 0.0);
  const double h = 1e-5;
  const double slope = (so2_state_scalar(h) - so2_state_scalar(0.0)) / h;
  CHECK(std::abs(slope - 1.0) <= 1e-3);
  // second differences on (0, 10], step 0.1
  double worst = -1.0;
  for (double g = 0.1; g + 0.2 <= 10.0 + 1e-12; g += 0.1) {
    const double d2 =
        so2_state_scalar(g + 0.2) - 2.0 * so2_state_scalar(g + 0.1) + so2_state_scalar(g);
    worst = std::max(worst, d2);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("single-letter mi endpoints") {
  CHECK(so2_single_letter_mi(0.0) == 0.0);
  // i(γ) = ∫ (1 - F): below γ and increasing
  const double i2 = so2_single_letter_mi(2.0);
  const double i4 = so2_single_letter_mi(4.0);
  CHECK(i2 > 0.0);
  CHECK(i4 > i2);
  CHECK(i4 < 4.0);
  CHECK(so2_psi_scalar(3.0, 0.0) == 0.0);
}

#include "replica_sync/bessel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "replica_sync/errors.hpp"
#include "replica_sync/quadrature.hpp"

namespace replica_sync {

namespace {

/// I_j(2x) by direct series Σ_m x^(2m+j) / (m! (m+j)!), truncated when the
/// term drops below 1e-14 of the running sum. Safe for x <= 20 (the largest
/// term is far from overflow there).
double bessel_series_2x(int j, double x) {
  double term = 1.0;
  for (int i = 1; i <= j; ++i) term *= x / i;  // m = 0 term: x^j / j!
  double sum = term;
  const double x2 = x * x;
  for (int m = 1; m < 400; ++m) {
    term *= x2 / (static_cast<double>(m) * (m + j));
    sum += term;
    if (term <= 1e-14 * sum) break;
  }
  return sum;
}

/// Ratios r_j = I_{j+1}(t)/I_j(t) for j = 0..j_max by backward recurrence
/// r_{j-1} = 1 / (2j/t + r_j), started with r = 0 at an index beyond t so
/// the recurrence has entered its decaying regime.
std::vector<double> miller_ratios(int j_max, double t) {
  const int start = j_max + 40 + static_cast<int>(1.5 * t);
  double r = 0.0;
  std::vector<double> out(j_max + 1);
  for (int j = start; j >= 1; --j) {
    r = 1.0 / (2.0 * j / t + r);
    if (j - 1 <= j_max) out[j - 1] = r;
  }
  return out;
}

}  // namespace

double so2_moment_ratio(int j, double x) {
  if (j < 0 || j > 8) fail(ErrorCode::InvalidInput, "so2_moment_ratio: j in [0,8]");
  if (!(x >= 0.0)) fail(ErrorCode::InvalidInput, "so2_moment_ratio: x >= 0");
  if (j == 0) return 1.0;
  if (x == 0.0) return 0.0;
  if (x <= 20.0) return bessel_series_2x(j, x) / bessel_series_2x(0, x);
  const std::vector<double> r = miller_ratios(j, 2.0 * x);
  double u = 1.0;
  for (int i = 0; i < j; ++i) u *= r[i];
  return u;
}

double bessel_i0_scaled(double t) {
  if (!(t >= 0.0)) fail(ErrorCode::InvalidInput, "bessel_i0_scaled: t >= 0");
  if (t <= 40.0) return bessel_series_2x(0, 0.5 * t) * std::exp(-t);
  // Asymptotic expansion I_0(t) ~ e^t/sqrt(2πt) Σ_k ((2k-1)!!)^2 / (k! (8t)^k),
  // truncated at the smallest term.
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd / (8.0 * k * t);
    if (next >= term) break;
    term = next;
    sum += term;
    if (term <= 1e-17 * sum) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * t);
}

double so2_mmse(double gamma) {
  if (!(gamma >= 0.0)) fail(ErrorCode::InvalidInput, "so2_mmse: gamma >= 0");
  if (gamma == 0.0) return 2.0;
  // Sufficient statistic y = sqrt(γ)u* + z on the complex plane with
  // Re z, Im z ~ N(0, 1/2); the modulus r = |y| has density
  // 2r exp(-(r - sqrt(γ))²) I0e(2 sqrt(γ) r), and |<u>| = u_1(sqrt(γ) r).
  const double root = std::sqrt(gamma);
  const double lo = std::max(0.0, root - 9.0);
  const double hi = root + 9.0;
  static thread_local QuadratureRule base = gauss_legendre(200);
  double acc = 0.0;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < base.nodes.size(); ++i) {
    const double r = mid + half * base.nodes[i];
    const double w = half * base.weights[i];
    const double d = r - root;
    const double density = 2.0 * r * std::exp(-d * d) * bessel_i0_scaled(2.0 * root * r);
    const double u1 = so2_moment_ratio(1, root * r);
    acc += w * density * u1 * u1;
  }
  return 2.0 * (1.0 - acc);
}

double so2_state_scalar(double gamma) { return 1.0 - 0.5 * so2_mmse(gamma); }

double so2_single_letter_mi(double gamma) {
  if (!(gamma >= 0.0))
    fail(ErrorCode::InvalidInput, "so2_single_letter_mi: gamma >= 0");
  if (gamma == 0.0) return 0.0;
  const QuadratureRule rule = gauss_legendre(128, 0.0, gamma);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * (1.0 - so2_state_scalar(rule.nodes[i]));
  return acc;
}

double so2_psi_scalar(double lambda, double q) {
  return -0.5 * lambda * q * q + lambda * q - so2_single_letter_mi(lambda * q);
}

}  // namespace replica_sync

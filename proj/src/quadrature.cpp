#include "replica_sync/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "replica_sync/errors.hpp"

namespace replica_sync {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) fail(ErrorCode::InvalidInput, "gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Newton iteration on P_n with Chebyshev initial guesses; symmetric pairs.
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  QuadratureRule rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

QuadratureRule gauss_hermite(int n) {
  if (n < 1) fail(ErrorCode::InvalidInput, "gauss_hermite: n must be >= 1");
  // Golub–Welsch on the Jacobi matrix of the (physicists') Hermite recurrence,
  // then rescale nodes by sqrt(2) and normalize weights so they integrate
  // against the standard normal density.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double off = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = off;
    jacobi(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i) * std::numbers::sqrt2;
    const double v = es.eigenvectors()(0, i);
    rule.weights[i] = v * v;
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

double log_sum_exp(std::span<const double> s, std::span<const double> w) {
  if (s.size() != w.size() || s.empty())
    fail(ErrorCode::InvalidInput, "log_sum_exp: size mismatch");
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) acc += w[i] * std::exp(s[i] - mx);
  if (!(acc > 0.0) || !std::isfinite(acc))
    fail(ErrorCode::Internal, "log_sum_exp: normalization underflow");
  return mx + std::log(acc);
}

double log_mean_exp(std::span<const double> s) {
  if (s.empty()) fail(ErrorCode::InvalidInput, "log_mean_exp: empty input");
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - mx);
  return mx + std::log(acc / static_cast<double>(s.size()));
}

void MeanAccumulator::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / n_;
  m2_ += d * (x - mean_);
}

void MeanAccumulator::merge(const MeanAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double d = other.mean_ - mean_;
  const long n = n_ + other.n_;
  m2_ += other.m2_ + d * d * (static_cast<double>(n_) * other.n_ / n);
  mean_ += d * other.n_ / n;
  n_ = n;
}

double MeanAccumulator::variance() const {
  return n_ > 1 ? m2_ / (n_ - 1) : 0.0;
}

double MeanAccumulator::stderr_of_mean() const {
  return n_ > 1 ? std::sqrt(variance() / n_) : 0.0;
}

}  // namespace replica_sync

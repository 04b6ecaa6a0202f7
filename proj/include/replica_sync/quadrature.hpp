#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace replica_sync {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss–Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// Gauss–Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Gauss–Hermite rule for E[f(Z)], Z ~ N(0,1): E[f(Z)] ≈ Σ w_i f(x_i).
/// Weights are already normalized to sum to 1.
QuadratureRule gauss_hermite(int n);

/// log Σ_i w_i exp(s_i), stabilized by the max exponent. Weights must be
/// nonnegative with a positive sum.
double log_sum_exp(std::span<const double> s, std::span<const double> w);

/// log (1/n) Σ_i exp(s_i).
double log_mean_exp(std::span<const double> s);

/// Streaming mean / standard error accumulator (Welford).
class MeanAccumulator {
 public:
  void add(double x);
  void merge(const MeanAccumulator& other);
  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;  // sample variance
  double stderr_of_mean() const;

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct McValue {
  double value = 0.0;
  double stderr = 0.0;
  long samples = 0;
};

}  // namespace replica_sync

#pragma once

namespace replica_sync {

/// u_j(x) = I_j(2x) / I_0(2x), the j-th circular moment of the von Mises
/// density ∝ exp(2x cos θ). Series summation with term-ratio truncation at
/// relative 1e-14 for x <= 20, scaled backward recurrence on ratios
/// (Miller's algorithm) for x > 20. Result lies in [0, 1] and is
/// nonincreasing in j. Requires x >= 0 and 0 <= j <= 8.
double so2_moment_ratio(int j, double x);

/// Exponentially scaled modified Bessel function I_0(t)·e^{-t}, t >= 0.
double bessel_i0_scaled(double t);

/// MMSE for estimating a Haar SO(2) rotation from y = sqrt(γ)·g* + z with
/// i.i.d. N(0,1) noise entries: mmse(γ) = 2(1 - E[u_1(sqrt(γ)|y|)²]), the
/// radial expectation taken over the noncentral modulus law of |y| by
/// Gauss–Legendre quadrature. Value in [0, 2], nonincreasing in γ.
double so2_mmse(double gamma);

/// F(γ) = 1 - mmse(γ)/2: the scalar state-evolution map of the SO(2)
/// channel. F(0) = 0, F'(0) = 1, strictly increasing and concave.
double so2_state_scalar(double gamma);

/// Single-letter mutual information i(γ) = ∫_0^γ (1 - F(s)) ds.
double so2_single_letter_mi(double gamma);

/// Replica potential along scalar multiples of the identity:
/// Ψ(q·I) = -λq²/2 + λq - i(λq).
double so2_psi_scalar(double lambda, double q);

}  // namespace replica_sync

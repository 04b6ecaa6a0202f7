#pragma once

#include <Eigen/Dense>
#include <vector>

#include "replica_sync/overlap.hpp"
#include "replica_sync/quadrature.hpp"

namespace replica_sync {

/// One realization of the q-dependent single-sample channel:
/// y_ℓ = sqrt(λ_ℓ)·φ_ℓ(g*)·q_ℓ^{1/2} + z_ℓ.
struct SingleLetterDraw {
  GroupElement g_star;
  std::vector<Eigen::MatrixXd> z_blocks;
  std::vector<Eigen::MatrixXd> y_blocks;
};

/// Evaluates posterior expectations under the single-sample channel at a
/// fixed overlap q. The inner expectation over the group uses trapezoidal
/// quadrature in θ for SO2, exact enumeration for finite groups of order
/// <= 10^4, and plain Haar Monte Carlo otherwise; the inner ensemble is
/// drawn once (keyed by cfg.seed) and shared across outer draws.
class SingleLetterEvaluator {
 public:
  SingleLetterEvaluator(std::vector<RepChannel> channels, const Overlap& q,
                        const EstimatorConfig& cfg);

  const std::vector<RepChannel>& channels() const { return channels_; }
  const EstimatorConfig& config() const { return cfg_; }

  /// Draw (g*, z, y) for outer index m, keyed by (cfg.seed, m). The
  /// underlying (g*, z) stream does not depend on q, so evaluations at
  /// different overlaps share common random numbers. With cfg.antithetic,
  /// odd indices reuse the previous g* and negate z.
  SingleLetterDraw draw(long index) const;

  /// Posterior means <g_ℓ>_q given one draw; log-sum-exp stabilized.
  std::vector<Eigen::MatrixXd> posterior_mean(const SingleLetterDraw& d) const;

  /// log E_g exp(Σ_ℓ sqrt(λ_ℓ) Tr q_ℓ^{1/2} g_ℓ^T y_ℓ); the Gibbs
  /// log-partition of the draw.
  double log_partition(const SingleLetterDraw& d) const;

 private:
  std::vector<double> scores(const SingleLetterDraw& d) const;

  std::vector<RepChannel> channels_;
  Overlap q_;
  std::vector<Eigen::MatrixXd> q_sqrt_;
  EstimatorConfig cfg_;
  // inner ensemble
  std::vector<GroupElement> members_;
  std::vector<std::vector<Eigen::MatrixXd>> member_reps_;  // [member][channel]
  std::vector<double> member_weights_;                     // prior weights, sum 1
};

/// Convenience wrapper matching the operation signature: <g_ℓ>_q for one
/// draw.
std::vector<Eigen::MatrixXd> posterior_mean(
    const std::vector<RepChannel>& channels, const Overlap& q,
    const SingleLetterDraw& draw, const EstimatorConfig& cfg);

struct StateMapResult {
  Overlap value;
  /// Per-block standard error of the Monte Carlo mean, aggregated in
  /// Frobenius norm.
  std::vector<double> block_stderr;
};

/// State-evolution map F(q)_ℓ = E_{g*,z}[<g_ℓ>_q^T <g_ℓ>_q], symmetrized and
/// PSD-clipped; outer Monte Carlo over cfg.mc_samples draws with common
/// random numbers keyed by cfg.seed.
StateMapResult state_map(const std::vector<RepChannel>& channels,
                         const Overlap& q, const EstimatorConfig& cfg);

/// Joint estimate of F(q) and the Nishimori cross term
/// E[Tr φ_ℓ(g*)^T <g_ℓ>] per channel (used by consistency diagnostics).
struct StateMapDiagnostics {
  StateMapResult map;
  std::vector<McValue> cross_trace;   // E Tr g*^T <g>
  std::vector<McValue> gram_trace;    // E Tr <g>^T <g>
};
StateMapDiagnostics state_map_diagnostics(
    const std::vector<RepChannel>& channels, const Overlap& q,
    const EstimatorConfig& cfg);

}  // namespace replica_sync

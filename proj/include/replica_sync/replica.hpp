#pragma once

#include <optional>
#include <string>
#include <vector>

#include "replica_sync/bessel.hpp"
#include "replica_sync/single_letter.hpp"

namespace replica_sync {

/// Converged (or last-iterate) solution of the state-evolution fixed point,
/// with the limiting mutual information and per-channel MMSE implied by it.
struct ReplicaSolution {
  Overlap q_star;
  double psi_value = 0.0;
  double psi_stderr = 0.0;
  double mi_limit = 0.0;                 // nats per sample
  std::vector<double> mmse_limits;       // k_ℓ - ||q*_ℓ||_F² per channel
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;                 // max_ℓ ||q_ℓ - F(q)_ℓ||_F
};

struct HessianReport {
  std::vector<double> block_max_eigs;    // (-λ_ℓ k_ℓ + λ_ℓ² ρ_ℓ) / (2 k_ℓ)
  std::vector<double> effective_snrs;    // λ̃_ℓ = λ_ℓ ρ_ℓ / k_ℓ
  bool stable_at_zero = false;           // max λ̃_ℓ < 1
};

struct FixedPointSolverOptions {
  double damping = 0.5;     // q <- (1-damping) q + damping F(q)
  double tol = 1e-4;
  int max_iter = 200;
};

/// Replica potential Ψ_gs(q); Monte Carlo outer expectation with common
/// random numbers keyed by cfg.seed, log-sum-exp stabilized inner term.
McValue psi_gs(const std::vector<RepChannel>& channels, const Overlap& q,
               const EstimatorConfig& cfg);

/// Gradient blocks -(λ_ℓ/2)(q_ℓ - F(q)_ℓ) as symmetric matrices.
std::vector<Eigen::MatrixXd> grad_psi(const std::vector<RepChannel>& channels,
                                      const Overlap& q,
                                      const EstimatorConfig& cfg);

/// Closed-form Hessian diagnostics of Ψ_gs at q = 0 from per-channel type
/// classifications. Throws ClassificationNeeded on an Indeterminate type.
HessianReport hessian_at_zero(const std::vector<RepChannel>& channels,
                              const std::vector<RepClassification>& cls);

/// Damped fixed-point iteration q <- (1-d) q + d F(q) with symmetrization
/// and PSD clipping each step. Non-convergence is reported, not thrown.
ReplicaSolution solve_fixed_point(const std::vector<RepChannel>& channels,
                                  const Overlap& q0,
                                  const FixedPointSolverOptions& opt,
                                  const EstimatorConfig& cfg);

/// Full SO(2) single-channel solution via the Bessel closed form: for
/// λ <= 1 returns q* = 0, MI = λ/2, MMSE = 2; for λ > 1 bisection on
/// q = F(λq) to residual <= 1e-10.
ReplicaSolution so2_solve(double lambda);

struct RankOneBranchResult {
  double q_star = 0.0;
  double slope_at_zero = 0.0;   // expected λ/k
  double slope_stderr = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Scalar branch q -> F_11(diag(q, 0, ..., 0)) of SO(k)-synchronization,
/// k >= 3: finite-difference slope at the origin and the damped-iteration
/// fixed point from q0 = 0.5.
RankOneBranchResult sok_rank_one_branch(int k, double lambda,
                                        const FixedPointSolverOptions& opt,
                                        const EstimatorConfig& cfg);

struct AbelianDiagonalReport {
  std::vector<double> deviations;  // ||q_ℓ - (Tr q_ℓ / k_ℓ) I||_F
  double max_deviation = 0.0;
  double threshold = 0.0;          // 10 · tol
  bool ok = false;
};

/// Checks that a converged fixed point of an abelian-group model is a
/// scalar multiple of the identity per block. Throws Inapplicable for
/// non-abelian groups.
AbelianDiagonalReport abelian_diagonal_check(
    const std::vector<RepChannel>& channels, const Overlap& q, double tol);

struct ScanStartRecord {
  std::string kind;       // "zero", "identity", "random"
  bool converged = false;
  double psi = 0.0;
  double residual = 0.0;
  std::vector<double> signature;
};

struct ScanFixedPoint {
  Overlap representative;
  std::vector<double> signature;  // sorted block eigenvalues
  double psi = 0.0;
  int hits = 0;
};

struct LandscapeScanResult {
  ReplicaSolution best;
  std::vector<ScanFixedPoint> distinct;  // deduplicated by signature
  std::vector<ScanStartRecord> starts;   // full start inventory
};

/// Multi-start heuristic for sup Ψ_gs over PSD overlaps: fixed-point solves
/// from {0, I, random PSD draws}, deduplicated by the orbit-invariant
/// sorted-eigenvalue signature (tolerance 10·tol). Starts run in parallel
/// with derived seeds; the argmax is deterministic in start order.
LandscapeScanResult landscape_scan(const std::vector<RepChannel>& channels,
                                   int n_starts,
                                   const FixedPointSolverOptions& opt,
                                   const EstimatorConfig& cfg);

}  // namespace replica_sync

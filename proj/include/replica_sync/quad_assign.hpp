#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "replica_sync/overlap.hpp"
#include "replica_sync/quadrature.hpp"
#include "replica_sync/rng.hpp"

namespace replica_sync {

enum class KernelKind { RankOne, FiniteRank, GaussianRBF };
enum class BaseMeasure { Rademacher, UniformInterval, DiscreteAtoms };

/// A continuous PSD similarity kernel on a compact support together with
/// the base measure ρ of the sample points. `scale` multiplies the kernel;
/// scaling by sqrt(λ) realizes effective SNR λ.
struct KernelSpec {
  KernelKind kind = KernelKind::RankOne;
  BaseMeasure base = BaseMeasure::Rademacher;
  double scale = 1.0;
  double bandwidth = 1.0;               // GaussianRBF
  std::vector<double> finite_rank_mu;   // FiniteRank spectrum (before scale)
  std::vector<double> atoms;            // DiscreteAtoms support
  std::vector<double> atom_weights;

  static KernelSpec rank_one(double scale,
                             BaseMeasure base = BaseMeasure::Rademacher);
  /// κ = scale · Σ_ℓ mu_ℓ f_ℓ(x) f_ℓ(y) with f_ℓ the normalized Legendre
  /// polynomials of degree ℓ on Uniform[-1,1].
  static KernelSpec finite_rank(std::vector<double> mu, double scale = 1.0);
  static KernelSpec gaussian_rbf(double bandwidth, double scale = 1.0);
  static KernelSpec discrete(std::vector<double> atoms,
                             std::vector<double> weights, double scale = 1.0);

  double eval(double x, double y) const;
  /// Sup-grid bound K0 with |κ| < K0 on the support.
  double bound() const;
  /// Quadrature nodes/weights of ρ: the atoms for discrete measures,
  /// Gauss–Legendre for Uniform[-1,1].
  QuadratureRule base_rule(int n_nodes) const;
  double sample(Rng& rng) const;
  std::string describe() const;
};

/// E_{x,x'}[κ(x,x')²] by double quadrature.
double kernel_second_moment(const KernelSpec& kernel, int n_nodes = 512);

/// Rank-L Nyström/Mercer truncation: eigenvalues, node features, and the
/// off-node eigenfunction extension.
struct MercerTruncation {
  KernelSpec kernel;
  int rank = 0;                   // may be below the requested L (rank deficiency)
  bool truncated_early = false;
  Eigen::VectorXd mu;             // nonincreasing, clipped at -1e-10
  Eigen::MatrixXd f_nodes;        // f_ℓ(x_a): n_nodes × rank
  Eigen::MatrixXd u_nodes;        // sqrt(mu_ℓ) f_ℓ(x_a)
  std::vector<double> nodes;
  std::vector<double> weights;
  double residual_sup = 0.0;      // sup-grid |κ - κ^L|
  double trace_residual = 0.0;    // ∫ (κ - κ^L)(x,x) ρ(dx) = Σ_{ℓ>L} μ_ℓ

  /// Nyström extension f_ℓ(x) = μ_ℓ^{-1} Σ_a w_a κ(x, x_a) f_ℓ(x_a),
  /// returned as u(x) = (sqrt(μ_ℓ) f_ℓ(x))_ℓ.
  Eigen::VectorXd feature(double x) const;
  /// κ^L(x, y).
  double truncated_eval(double x, double y) const;
};

MercerTruncation mercer_truncate(const KernelSpec& kernel, int rank,
                                 int n_nodes);

/// Per-draw evaluator of the decoupled single-letter channel
/// y = q^{1/2} u(x*) + z at a fixed overlap. Draws are keyed by
/// (cfg.seed, index) with x* generated before the z coordinates, so
/// evaluations at different overlaps (and rank extensions with zero-padded
/// q) share common random numbers.
class QaChannelEvaluator {
 public:
  QaChannelEvaluator(const MercerTruncation& trunc, const Eigen::MatrixXd& q,
                     const EstimatorConfig& cfg);

  void draw(long index, double& x_star, Eigen::VectorXd& z) const;
  double log_partition(double x_star, const Eigen::VectorXd& z) const;
  Eigen::VectorXd posterior_mean(double x_star, const Eigen::VectorXd& z) const;
  const Eigen::MatrixXd& overlap() const { return q_; }

 private:
  void scores(double x_star, const Eigen::VectorXd& z,
              std::vector<double>& s) const;

  const MercerTruncation& trunc_;
  EstimatorConfig cfg_;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd q_sqrt_;
  Eigen::VectorXd self_term_;  // u_a^T q u_a per node
};

/// Decoupled potential Ψ_qa^L(q) for symmetric PSD q (rank × rank):
/// -||q||_F²/4 + E_{x*,z} log E_x exp(-u^T q u / 2 + u^T q u* + u^T q^{1/2} z).
McValue psi_qa(const MercerTruncation& trunc, const Eigen::MatrixXd& q,
               const EstimatorConfig& cfg);

struct QaStateMap {
  Eigen::MatrixXd value;  // E[<u><u>^T]
  double frob_stderr = 0.0;
};

/// Stationarity map of Ψ_qa: q* solves q = E[<u>_q <u>_q^T]. The gradient
/// is (E[<u><u>^T] - q)/2.
QaStateMap qa_state_map(const MercerTruncation& trunc, const Eigen::MatrixXd& q,
                        const EstimatorConfig& cfg);

struct QaSolveResult {
  Eigen::MatrixXd q_star;
  double q_frob = 0.0;
  double psi_value = 0.0;
  double psi_stderr = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

struct QaSolverOptions {
  double damping = 0.5;
  double tol = 1e-4;
  int max_iter = 200;
};

QaSolveResult qa_solve(const MercerTruncation& trunc, const Eigen::MatrixXd& q0,
                       const QaSolverOptions& opt, const EstimatorConfig& cfg);

struct QaPerRank {
  int rank = 0;
  double psi = 0.0;
  double psi_stderr = 0.0;
  double q_frob = 0.0;
  bool converged = false;
};

/// MI / MMSE limits over an increasing rank schedule. The supremum at each
/// rank is the best of solves from small and identity starts and the
/// previous maximizer padded with a zero row/column (which keeps the
/// reported sequence nondecreasing, as the restriction argument implies).
struct QASolution {
  std::vector<QaPerRank> per_rank;
  double psi_infinity = 0.0;     // last sup Ψ_qa^L
  double cauchy_gap = 0.0;       // |Ψ^{L_max} - Ψ^{L_max - 1}|
  bool extrapolation_reliable = true;
  double kappa_second_moment = 0.0;
  double mi_limit = 0.0;         // E[κ²]/4 - Ψ_∞
  double mmse_limit = 0.0;       // E[κ²] - q*²
  double q_star = 0.0;           // ||q*_{L_max}||_F
};

QASolution qa_mi_mmse(const KernelSpec& kernel, const std::vector<int>& ranks,
                      const QaSolverOptions& opt, const EstimatorConfig& cfg,
                      double cauchy_tol = 1e-3);

/// A finite-n quadratic assignment dataset:
/// y_ij = κ(x_{π*(i)}, x_{π*(j)}) + sqrt(n) z_ij for i < j.
struct QaInstance {
  int n = 0;
  KernelSpec kernel;
  std::vector<double> x;
  std::vector<int> pi_star;
  std::vector<double> y;  // pair-indexed, i < j
  std::uint64_t seed = 0;

  int pair_index(int i, int j) const;
};

QaInstance generate_qa(int n, const KernelSpec& kernel, std::uint64_t seed);

/// Builds an instance from explicit samples, permutation, and noise (used
/// by the invariance tests).
QaInstance make_qa_instance(const KernelSpec& kernel, std::vector<double> x,
                            std::vector<int> pi_star,
                            const std::vector<double>& z);

double qa_hamiltonian(const QaInstance& instance, const std::vector<int>& pi);

struct QaExactFreeEnergy {
  double free_energy = 0.0;
  double mean_hamiltonian = 0.0;
  /// Kernel-level replica statistic E<(1/n) Σ_i κ(x_{π(i)}, x_{π'(i)})>
  /// via assignment marginals, and the same with the second replica
  /// enumerated as the conditional truth; their gap is the exact Nishimori
  /// consistency check.
  double two_copy_statistic = 0.0;
  double truth_replica_statistic = 0.0;
  double nishimori_gap = 0.0;
};

/// Exhaustive enumeration over S_n; requires n <= 9.
QaExactFreeEnergy qa_exact_free_energy(const QaInstance& instance);

}  // namespace replica_sync

#pragma once

#include <optional>
#include <string>

#include "replica_sync/overlap.hpp"
#include "replica_sync/single_letter.hpp"

namespace replica_sync {

/// A finite-N synchronization dataset: hidden truth G*, observations
/// y_ℓ^{(ij)} = sqrt(λ_ℓ) φ_ℓ(g*_i) φ_ℓ(g*_j)^T + sqrt(N) z_ℓ^{(ij)} for
/// i < j, plus the seed that reproduces it.
struct SyncInstance {
  int n = 0;
  std::vector<RepChannel> channels;
  std::vector<GroupElement> g_star;
  std::vector<std::vector<Eigen::MatrixXd>> y;  // [pair_index(i,j)][channel]
  std::uint64_t seed = 0;

  int pair_index(int i, int j) const;  // requires i < j
};

SyncInstance generate_sync(int n, const std::vector<RepChannel>& channels,
                           std::uint64_t seed);

/// Builds an instance from explicit signal and noise blocks (z in the
/// standard-normal scale; the sqrt(N) factor is applied here). Used by
/// reconstruction and invariance tests.
SyncInstance make_sync_instance(
    const std::vector<RepChannel>& channels,
    const std::vector<GroupElement>& g_star,
    const std::vector<std::vector<Eigen::MatrixXd>>& z_blocks);

/// Full posterior log-weight H(G;Y), including the G-independent quadratic
/// term (constant for orthogonal representations).
double sync_hamiltonian(const SyncInstance& instance,
                        const std::vector<GroupElement>& state);

/// Self-describing binary container (little-endian, 64-bit float payload).
void save_instance(const SyncInstance& instance, const std::string& path);
SyncInstance load_instance(const std::string& path);

/// Single-site Markov chain over the posterior. Finite families use exact
/// conditional draws (acceptance 1 by construction); SO2 uses random-walk
/// Metropolis on the angle with Robbins–Monro scale adaptation targeting
/// acceptance 0.4, frozen by freeze_adaptation() after burn-in.
class GibbsChain {
 public:
  GibbsChain(const SyncInstance& instance, std::uint64_t chain_seed);

  const std::vector<GroupElement>& state() const { return state_; }
  long sweep_count() const { return sweep_count_; }
  double acceptance_rate() const { return acceptance_rate_; }
  double proposal_scale() const { return proposal_scale_; }
  void freeze_adaptation() { adapting_ = false; }

  /// One pass over sites i = 1..n.
  void sweep(const SyncInstance& instance);

  /// Log-weights of the exact single-site conditional at `site` given the
  /// current state (finite families only); exposed for the detailed-balance
  /// and two-point-posterior tests.
  std::vector<double> site_conditional_logits(const SyncInstance& instance,
                                              int site) const;

 private:
  std::vector<Eigen::MatrixXd> site_field(const SyncInstance& instance,
                                          int site) const;
  void set_site(const SyncInstance& instance, int site, GroupElement g);

  std::vector<GroupElement> state_;
  std::vector<std::vector<Eigen::MatrixXd>> state_reps_;  // [site][channel]
  Rng rng_;
  long sweep_count_ = 0;
  double proposal_scale_ = 0.5;
  double acceptance_rate_ = 1.0;
  bool adapting_ = true;
  // finite-family cache
  std::vector<GroupElement> elements_;
  std::vector<std::vector<Eigen::MatrixXd>> element_reps_;  // [element][channel]
};

struct ExactFreeEnergyResult {
  double free_energy = 0.0;       // (1/N) log (1/|G|^N) Σ_G exp H(G;Y)
  double mean_hamiltonian = 0.0;  // <H> under the posterior
  /// Quadratic overlap statistics per channel. The linear overlap
  /// E<Q(G, ·)> vanishes identically under the posterior's global rotation
  /// symmetry, so the Nishimori diagnostics use E<||Q||_F²> instead.
  /// two_copy_sq: E<||Q(G,G')||²> over two independent posterior replicas,
  /// contracted through pairwise posterior moments.
  std::vector<double> two_copy_sq;
  /// Same expectation with the second replica enumerated as the conditional
  /// law of the truth given Y (an independent summation path).
  std::vector<double> truth_enumerated_sq;
  /// <||Q(G,G*)||²> against the realized truth; equals two_copy_sq only in
  /// disorder average.
  std::vector<double> realized_sq;
  /// max_ℓ |two_copy_sq - truth_enumerated_sq|: exact Nishimori consistency.
  double nishimori_gap = 0.0;
  /// Exact Bayes pairwise matrix MMSE per channel:
  /// (1/C(N,2)) Σ_{i<j} ||φ(g*_i)^T φ(g*_j) - <φ(g_i)^T φ(g_j)>||_F².
  std::vector<double> matrix_mmse;
};

/// Exhaustive-enumeration free energy for finite groups with |G|^N <= 10^7.
/// With replica_diagnostics = false only the free energy and <H> are
/// computed (skips the pairwise-moment passes).
ExactFreeEnergyResult exact_free_energy(const SyncInstance& instance,
                                        bool replica_diagnostics = true);

struct DiagnosticsReport {
  double free_energy = 0.0;  // NaN unless filled by the exact path
  double mean_hamiltonian = 0.0;
  double mean_hamiltonian_stderr = 0.0;  // batch-means estimate
  /// Posterior mean of the overlap (1/N) Σ_i φ_ℓ(g_i)^T φ_ℓ(g*_i).
  std::vector<Eigen::MatrixXd> overlap_blocks;
  /// Mean over posterior samples of ||overlap_ℓ||_F²; per-sample statistics
  /// are invariant under the chain's global-rotation drift.
  std::vector<double> overlap_sqnorm;
  std::vector<double> matrix_mmse;  // per channel, pairwise matrix errors
  /// |mean ||Q(G,G*)||² - mean ||Q(G,G')||²| over samples; a rough sampled
  /// indicator (exact per-instance equality holds only on the enumeration
  /// path), subject to finite-N and autocorrelation bias.
  double nishimori_gap = 0.0;
  double orbit_distance = 0.0;      // NaN unless q_star was supplied
  double d_gn = 0.0;
  double k_gn = 0.0;
  long samples = 0;
};

/// Posterior diagnostics from a mixed chain: burn_in sweeps discarded,
/// n_samples samples separated by `thinning` sweeps. When q_star is given,
/// the per-sample distance to the replica orbit set
/// min_h Σ_ℓ λ_ℓ ||overlap_ℓ - q*_ℓ φ_ℓ(h)||_F² is averaged (closed form in
/// the angle for single-channel SO2, enumeration for finite groups).
DiagnosticsReport measure(const SyncInstance& instance, GibbsChain& chain,
                          int burn_in, int n_samples, int thinning,
                          const std::optional<Overlap>& q_star = std::nullopt);

struct ModelConstants {
  double d_gn = 0.0;  // (Σ_ℓ λ_ℓ k_ℓ)^{1/2}
  double k_gn = 0.0;  // Σ_ℓ λ_ℓ k_ℓ
};

ModelConstants model_constants(const std::vector<RepChannel>& channels);

}  // namespace replica_sync

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "replica_sync/groups.hpp"

namespace replica_sync {

/// Built-in representation catalog. The first five kinds are
/// real-irreducible; Trivial, CyclicComplement, and SymmetricAction are the
/// reducible constructions that canonicalize() knows how to reduce.
enum class RepKind {
  SO2Harmonic,       // 2x2 rotation by ℓθ (harmonic ℓ >= 1)
  SOkStandard,       // k x k rotational action
  CyclicPlane,       // 2x2 rotation by 2πℓj/k, 1 <= ℓ <= (k-1)/2
  SymmetricStandard, // (k-1) x (k-1) action on the complement of the all-ones vector
  Sign,              // 1-dim ±1: parity for Symmetric, alternating for even Cyclic / Z2
  Trivial,           // 1-dim constant; carries no information
  CyclicComplement,  // (k-1)-dim cyclic shift action on the complement of all-ones
  SymmetricAction,   // k-dim permutation action (trivial ⊕ standard)
};

std::string rep_kind_name(RepKind kind);

/// One observation channel: a group, an orthogonal representation, and a
/// signal-to-noise parameter. Constructed through make_channel, which
/// validates the (family, kind, harmonic) combination.
struct RepChannel {
  GroupSpec group;
  RepKind kind = RepKind::SO2Harmonic;
  int harmonic = 1;  // SO2Harmonic / CyclicPlane index; ignored otherwise
  int dim = 0;       // k_ℓ
  double snr = 1.0;  // λ_ℓ

  bool irreducible() const;
  std::string describe() const;
};

RepChannel make_channel(GroupSpec group, RepKind kind, double snr,
                        int harmonic = 1);

/// Convenience constructors for the common single-channel models.
RepChannel so2_harmonic_channel(int harmonic, double snr);
RepChannel sok_standard_channel(int k, double snr);
RepChannel cyclic_plane_channel(int k, int harmonic, double snr);
RepChannel symmetric_standard_channel(int k, double snr);
RepChannel z2_channel(double snr);

/// Evaluates the k_ℓ × k_ℓ orthogonal matrix φ_ℓ(g). Deterministic; throws
/// InvalidInput when the element does not belong to the channel's group.
Eigen::MatrixXd represent(const RepChannel& channel, const GroupElement& g);

enum class RepType { RealType, ComplexType, QuaternionicType, Indeterminate };

std::string rep_type_name(RepType type);

/// Classification of a real-irreducible channel by ρ = E[(Tr φ(g))²].
/// `rho` is the raw estimate; when the type is determinate the threshold
/// λ_c = k/ρ uses the snapped ρ ∈ {1,2,4} so catalog thresholds are exact.
struct RepClassification {
  double rho = 0.0;
  double rho_stderr = 0.0;
  RepType type = RepType::Indeterminate;
  double threshold = 0.0;  // λ_c = k_ℓ / ρ_ℓ
};

/// Monte Carlo (or exact, when the group is finite with order <= n_samples)
/// estimate of ρ_ℓ = E[(Tr φ_ℓ(g))²] and the resulting type and threshold.
/// Requires n_samples >= 10^4. The type is Indeterminate unless the estimate
/// is within 3 standard errors of exactly one of {1, 2, 4}.
RepClassification classify(const RepChannel& channel, long n_samples, Rng& rng);

/// Reduces a channel list to canonical form: real-irreducible, non-trivial,
/// pairwise distinct. Trivial components are dropped, the catalog's
/// reducible constructions are split into their irreducible parts, and
/// isomorphic duplicates with SNRs λ, λ' merge into one channel with
/// √λ_new = (√λ + √λ')/√2.
std::vector<RepChannel> canonicalize(const std::vector<RepChannel>& channels);

/// Sum of λ_ℓ k_ℓ over channels; the constant that links Ψ to the mutual
/// information.
double snr_dim_sum(const std::vector<RepChannel>& channels);

}  // namespace replica_sync

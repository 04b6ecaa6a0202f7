#pragma once

#include <Eigen/Dense>
#include <vector>

#include "replica_sync/channels.hpp"
#include "replica_sync/rng.hpp"

namespace replica_sync {

/// The block overlap q = (q_1, ..., q_L): one symmetric PSD matrix per
/// channel, sized k_ℓ × k_ℓ. Construction symmetrizes and clips eigenvalue
/// noise in (-1e-6, 0) to zero; anything below -1e-6 is a hard error.
class Overlap {
 public:
  Overlap() = default;
  explicit Overlap(std::vector<Eigen::MatrixXd> blocks);

  static Overlap zero(const std::vector<RepChannel>& channels);
  static Overlap identity(const std::vector<RepChannel>& channels,
                          double scale = 1.0);
  /// Random PSD draw a^T a / k per block, for multi-start scans.
  static Overlap random_psd(const std::vector<RepChannel>& channels, Rng& rng);

  std::size_t size() const { return blocks_.size(); }
  const Eigen::MatrixXd& block(std::size_t l) const { return blocks_[l]; }
  const std::vector<Eigen::MatrixXd>& blocks() const { return blocks_; }

  /// Principal square root per block (symmetric eigendecomposition with the
  /// eigenvalues clamped at zero; q may sit on the PSD boundary).
  std::vector<Eigen::MatrixXd> sqrt_blocks() const;

  /// Sorted block eigenvalues concatenated in channel order; the
  /// orbit-invariant signature used to deduplicate fixed points.
  std::vector<double> eigen_signature() const;

  double frobenius_norm() const;
  bool matches_channels(const std::vector<RepChannel>& channels) const;

 private:
  std::vector<Eigen::MatrixXd> blocks_;
};

/// max_ℓ ||a_ℓ - b_ℓ||_F.
double max_block_distance(const Overlap& a, const Overlap& b);

/// Entry-wise convex combination (1-t)·a + t·b.
Overlap damped_mix(const Overlap& a, const Overlap& b, double t);

/// Monte Carlo / quadrature budgets shared by every expectation evaluation.
struct EstimatorConfig {
  long mc_samples = 20000;    // outer E_{g*,z} draws
  int inner_resolution = 512; // SO2 quadrature nodes, or inner MC size for SOk
  std::uint64_t seed = 1;
  bool antithetic = false;
  int threads = 1;

  void validate() const;
};

}  // namespace replica_sync

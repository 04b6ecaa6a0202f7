#include "replica_sync/overlap.hpp"

#include <cmath>

#include "replica_sync/errors.hpp"

namespace replica_sync {

namespace {
constexpr double kHardFloor = -1e-6;
}

Overlap::Overlap(std::vector<Eigen::MatrixXd> blocks)
    : blocks_(std::move(blocks)) {
  for (Eigen::MatrixXd& b : blocks_) {
    if (b.rows() != b.cols())
      fail(ErrorCode::InvalidInput, "overlap block must be square");
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      fail(ErrorCode::InvalidInput, "overlap block must be symmetric to 1e-12");
    b = 0.5 * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    Eigen::VectorXd vals = es.eigenvalues();
    bool clipped = false;
    for (int i = 0; i < vals.size(); ++i) {
      if (vals(i) < kHardFloor)
        fail(ErrorCode::InvalidInput,
             "overlap block eigenvalue below -1e-6; not PSD");
      if (vals(i) < 0.0) {
        vals(i) = 0.0;
        clipped = true;
      }
    }
    if (clipped)
      b = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
  }
}

Overlap Overlap::zero(const std::vector<RepChannel>& channels) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(channels.size());
  for (const RepChannel& ch : channels)
    blocks.push_back(Eigen::MatrixXd::Zero(ch.dim, ch.dim));
  return Overlap(std::move(blocks));
}

Overlap Overlap::identity(const std::vector<RepChannel>& channels,
                          double scale) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(channels.size());
  for (const RepChannel& ch : channels)
    blocks.push_back(scale * Eigen::MatrixXd::Identity(ch.dim, ch.dim));
  return Overlap(std::move(blocks));
}

Overlap Overlap::random_psd(const std::vector<RepChannel>& channels, Rng& rng) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(channels.size());
  for (const RepChannel& ch : channels) {
    Eigen::MatrixXd a(ch.dim, ch.dim);
    for (int i = 0; i < ch.dim; ++i)
      for (int j = 0; j < ch.dim; ++j) a(i, j) = rng.normal();
    blocks.push_back(Eigen::MatrixXd(a.transpose() * a / ch.dim));
  }
  return Overlap(std::move(blocks));
}

std::vector<Eigen::MatrixXd> Overlap::sqrt_blocks() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(blocks_.size());
  for (const Eigen::MatrixXd& b : blocks_) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    out.push_back(Eigen::MatrixXd(es.eigenvectors() * vals.asDiagonal() *
                                  es.eigenvectors().transpose()));
  }
  return out;
}

std::vector<double> Overlap::eigen_signature() const {
  std::vector<double> sig;
  for (const Eigen::MatrixXd& b : blocks_) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      sig.push_back(es.eigenvalues()(i));
  }
  return sig;
}

double Overlap::frobenius_norm() const {
  double s = 0.0;
  for (const Eigen::MatrixXd& b : blocks_) s += b.squaredNorm();
  return std::sqrt(s);
}

bool Overlap::matches_channels(const std::vector<RepChannel>& channels) const {
  if (blocks_.size() != channels.size()) return false;
  for (std::size_t l = 0; l < blocks_.size(); ++l)
    if (blocks_[l].rows() != channels[l].dim) return false;
  return true;
}

double max_block_distance(const Overlap& a, const Overlap& b) {
  if (a.size() != b.size())
    fail(ErrorCode::InvalidInput, "overlap size mismatch");
  double mx = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    mx = std::max(mx, (a.block(l) - b.block(l)).norm());
  return mx;
}

Overlap damped_mix(const Overlap& a, const Overlap& b, double t) {
  if (a.size() != b.size())
    fail(ErrorCode::InvalidInput, "overlap size mismatch");
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(a.size());
  for (std::size_t l = 0; l < a.size(); ++l)
    blocks.push_back(Eigen::MatrixXd((1.0 - t) * a.block(l) + t * b.block(l)));
  return Overlap(std::move(blocks));
}

void EstimatorConfig::validate() const {
  if (mc_samples < 100)
    fail(ErrorCode::InvalidInput, "mc_samples must be >= 100");
  if (inner_resolution < 64)
    fail(ErrorCode::InvalidInput, "inner_resolution must be >= 64");
  if (threads < 1) fail(ErrorCode::InvalidInput, "threads must be >= 1");
}

}  // namespace replica_sync

#include "replica_sync/single_letter.hpp"

#include <cmath>
#include <numbers>

#include "replica_sync/errors.hpp"
#include "replica_sync/parallel.hpp"

namespace replica_sync {

namespace {

constexpr std::uint64_t kInnerStream = 0xBADC0FFEEULL;
constexpr std::uint64_t kEnumerationCap = 10000;

void check_channels(const std::vector<RepChannel>& channels) {
  if (channels.empty())
    fail(ErrorCode::InvalidInput, "channel list must be non-empty");
  for (const RepChannel& ch : channels)
    if (!(ch.group == channels.front().group))
      fail(ErrorCode::InvalidInput, "channels must share one group");
}

}  // namespace

SingleLetterEvaluator::SingleLetterEvaluator(std::vector<RepChannel> channels,
                                             const Overlap& q,
                                             const EstimatorConfig& cfg)
    : channels_(std::move(channels)), q_(q), cfg_(cfg) {
  check_channels(channels_);
  cfg_.validate();
  if (!q_.matches_channels(channels_))
    fail(ErrorCode::InvalidInput, "overlap does not match channel list");
  q_sqrt_ = q_.sqrt_blocks();

  const GroupSpec& group = channels_.front().group;
  if (group.family == Family::SO2) {
    const int n = cfg_.inner_resolution;
    members_.reserve(n);
    for (int i = 0; i < n; ++i)
      members_.emplace_back(group, 2.0 * std::numbers::pi * i / n);
    member_weights_.assign(n, 1.0 / n);
  } else if (group.finite() && group.order() <= kEnumerationCap) {
    members_ = enumerate_elements(group);
    member_weights_.assign(members_.size(), 1.0 / members_.size());
  } else {
    Rng inner_rng(mix_seed(cfg_.seed, kInnerStream));
    members_.reserve(cfg_.inner_resolution);
    for (int i = 0; i < cfg_.inner_resolution; ++i)
      members_.push_back(haar_sample(group, inner_rng));
    member_weights_.assign(members_.size(), 1.0 / members_.size());
  }
  member_reps_.resize(members_.size());
  for (std::size_t m = 0; m < members_.size(); ++m) {
    member_reps_[m].reserve(channels_.size());
    for (const RepChannel& ch : channels_)
      member_reps_[m].push_back(represent(ch, members_[m]));
  }
}

SingleLetterDraw SingleLetterEvaluator::draw(long index) const {
  const GroupSpec& group = channels_.front().group;
  // With antithetic pairing, indices 2t and 2t+1 share g* and use ±z.
  const long base = cfg_.antithetic ? index / 2 : index;
  const double z_sign = cfg_.antithetic && (index % 2 == 1) ? -1.0 : 1.0;
  Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(base)));
  GroupElement g_star = haar_sample(group, rng);
  std::vector<Eigen::MatrixXd> z_blocks;
  z_blocks.reserve(channels_.size());
  for (const RepChannel& ch : channels_) {
    Eigen::MatrixXd z(ch.dim, ch.dim);
    for (int i = 0; i < ch.dim; ++i)
      for (int j = 0; j < ch.dim; ++j) z(i, j) = z_sign * rng.normal();
    z_blocks.push_back(std::move(z));
  }
  std::vector<Eigen::MatrixXd> y_blocks;
  y_blocks.reserve(channels_.size());
  for (std::size_t l = 0; l < channels_.size(); ++l) {
    y_blocks.push_back(Eigen::MatrixXd(
        std::sqrt(channels_[l].snr) * represent(channels_[l], g_star) *
            q_sqrt_[l] +
        z_blocks[l]));
  }
  return {std::move(g_star), std::move(z_blocks), std::move(y_blocks)};
}

std::vector<double> SingleLetterEvaluator::scores(
    const SingleLetterDraw& d) const {
  // s(g) = Σ_ℓ sqrt(λ_ℓ) Tr[q_ℓ^{1/2} g_ℓ^T y_ℓ]; precontract q^{1/2} y^T so
  // each member costs one dot product per channel.
  std::vector<Eigen::MatrixXd> contract;
  contract.reserve(channels_.size());
  for (std::size_t l = 0; l < channels_.size(); ++l)
    contract.push_back(Eigen::MatrixXd(std::sqrt(channels_[l].snr) *
                                       (d.y_blocks[l] * q_sqrt_[l])));
  std::vector<double> s(members_.size(), 0.0);
  for (std::size_t m = 0; m < members_.size(); ++m) {
    double acc = 0.0;
    for (std::size_t l = 0; l < channels_.size(); ++l)
      acc += member_reps_[m][l].cwiseProduct(contract[l]).sum();
    s[m] = acc;
  }
  return s;
}

std::vector<Eigen::MatrixXd> SingleLetterEvaluator::posterior_mean(
    const SingleLetterDraw& d) const {
  const std::vector<double> s = scores(d);
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double denom = 0.0;
  std::vector<Eigen::MatrixXd> mean;
  mean.reserve(channels_.size());
  for (const RepChannel& ch : channels_)
    mean.push_back(Eigen::MatrixXd::Zero(ch.dim, ch.dim));
  for (std::size_t m = 0; m < members_.size(); ++m) {
    const double w = member_weights_[m] * std::exp(s[m] - mx);
    denom += w;
    for (std::size_t l = 0; l < channels_.size(); ++l)
      mean[l] += w * member_reps_[m][l];
  }
  if (!(denom > 0.0) || !std::isfinite(denom))
    fail(ErrorCode::Internal, "posterior_mean: normalization underflow");
  for (Eigen::MatrixXd& m : mean) m /= denom;
  return mean;
}

double SingleLetterEvaluator::log_partition(const SingleLetterDraw& d) const {
  const std::vector<double> s = scores(d);
  return log_sum_exp(s, member_weights_);
}

std::vector<Eigen::MatrixXd> posterior_mean(
    const std::vector<RepChannel>& channels, const Overlap& q,
    const SingleLetterDraw& draw, const EstimatorConfig& cfg) {
  return SingleLetterEvaluator(channels, q, cfg).posterior_mean(draw);
}

namespace {

struct GramChunk {
  std::vector<MeanAccumulator> entries;       // entrywise accumulators, per block
  std::vector<MeanAccumulator> cross;         // Tr g*^T <g> per channel
  std::vector<MeanAccumulator> gram_trace;    // Tr <g>^T <g> per channel
  bool initialized = false;
};

}  // namespace

StateMapDiagnostics state_map_diagnostics(
    const std::vector<RepChannel>& channels, const Overlap& q,
    const EstimatorConfig& cfg) {
  const SingleLetterEvaluator eval(channels, q, cfg);
  std::vector<int> offsets(channels.size() + 1, 0);
  for (std::size_t l = 0; l < channels.size(); ++l)
    offsets[l + 1] = offsets[l] + channels[l].dim * channels[l].dim;
  const int total_entries = offsets.back();

  auto body = [&](std::int64_t lo, std::int64_t hi, GramChunk& chunk) {
    chunk.entries.resize(total_entries);
    chunk.cross.resize(channels.size());
    chunk.gram_trace.resize(channels.size());
    for (std::int64_t m = lo; m < hi; ++m) {
      const SingleLetterDraw d = eval.draw(m);
      const std::vector<Eigen::MatrixXd> pm = eval.posterior_mean(d);
      for (std::size_t l = 0; l < channels.size(); ++l) {
        const Eigen::MatrixXd gram = pm[l].transpose() * pm[l];
        const int k = channels[l].dim;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j)
            chunk.entries[offsets[l] + i * k + j].add(gram(i, j));
        const Eigen::MatrixXd star = represent(channels[l], d.g_star);
        chunk.cross[l].add(star.cwiseProduct(pm[l]).sum());
        chunk.gram_trace[l].add(gram.trace());
      }
    }
  };
  const std::vector<GramChunk> chunks =
      parallel_chunks<GramChunk>(cfg.mc_samples, cfg.threads, body);

  // Merge in chunk order: deterministic for a fixed (seed, chunk grid).
  std::vector<MeanAccumulator> entries(total_entries);
  std::vector<MeanAccumulator> cross(channels.size()), gram(channels.size());
  for (const GramChunk& c : chunks) {
    for (int e = 0; e < total_entries; ++e) entries[e].merge(c.entries[e]);
    for (std::size_t l = 0; l < channels.size(); ++l) {
      cross[l].merge(c.cross[l]);
      gram[l].merge(c.gram_trace[l]);
    }
  }

  StateMapDiagnostics out;
  std::vector<Eigen::MatrixXd> blocks;
  out.map.block_stderr.resize(channels.size());
  for (std::size_t l = 0; l < channels.size(); ++l) {
    const int k = channels[l].dim;
    Eigen::MatrixXd b(k, k);
    double var_sum = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const MeanAccumulator& acc = entries[offsets[l] + i * k + j];
        b(i, j) = acc.mean();
        const double se = acc.stderr_of_mean();
        var_sum += se * se;
      }
    b = 0.5 * (b + b.transpose());
    blocks.push_back(std::move(b));
    out.map.block_stderr[l] = std::sqrt(var_sum);
    out.cross_trace.push_back(
        {cross[l].mean(), cross[l].stderr_of_mean(), cross[l].count()});
    out.gram_trace.push_back(
        {gram[l].mean(), gram[l].stderr_of_mean(), gram[l].count()});
  }
  out.map.value = Overlap(std::move(blocks));
  return out;
}

StateMapResult state_map(const std::vector<RepChannel>& channels,
                         const Overlap& q, const EstimatorConfig& cfg) {
  return state_map_diagnostics(channels, q, cfg).map;
}

}  // namespace replica_sync

#include "replica_sync/channels.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "replica_sync/errors.hpp"
#include "replica_sync/quadrature.hpp"

namespace replica_sync {

namespace {

Eigen::Matrix2d rotation2(double alpha) {
  Eigen::Matrix2d r;
  const double c = std::cos(alpha), s = std::sin(alpha);
  r << c, -s, s, c;
  return r;
}

/// Orthonormal basis of the complement of the all-ones vector in R^k
/// (Helmert columns); fixed so the standard representation is reproducible.
Eigen::MatrixXd helmert_basis(int k) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k - 1);
  for (int j = 1; j < k; ++j) {
    const double norm = std::sqrt(static_cast<double>(j) * (j + 1));
    for (int i = 0; i < j; ++i) h(i, j - 1) = 1.0 / norm;
    h(j, j - 1) = -static_cast<double>(j) / norm;
  }
  return h;
}

Eigen::MatrixXd permutation_matrix(const std::vector<int>& p) {
  const int k = static_cast<int>(p.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (int j = 0; j < k; ++j) m(p[j], j) = 1.0;
  return m;
}

int permutation_parity(const std::vector<int>& p) {
  std::vector<bool> seen(p.size(), false);
  int transpositions = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (seen[i]) continue;
    int len = 0;
    for (std::size_t j = i; !seen[j]; j = p[j]) {
      seen[j] = true;
      ++len;
    }
    transpositions += len - 1;
  }
  return transpositions % 2 == 0 ? 1 : -1;
}

Eigen::MatrixXd cyclic_shift_matrix(int k, int j) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (int c = 0; c < k; ++c) m((c + j) % k, c) = 1.0;
  return m;
}

}  // namespace

std::string rep_kind_name(RepKind kind) {
  switch (kind) {
    case RepKind::SO2Harmonic: return "so2_harmonic";
    case RepKind::SOkStandard: return "sok_standard";
    case RepKind::CyclicPlane: return "cyclic_plane";
    case RepKind::SymmetricStandard: return "symmetric_standard";
    case RepKind::Sign: return "sign";
    case RepKind::Trivial: return "trivial";
    case RepKind::CyclicComplement: return "cyclic_complement";
    case RepKind::SymmetricAction: return "symmetric_action";
  }
  return "?";
}

bool RepChannel::irreducible() const {
  switch (kind) {
    case RepKind::SO2Harmonic:
    case RepKind::SOkStandard:
    case RepKind::CyclicPlane:
    case RepKind::SymmetricStandard:
    case RepKind::Sign:
      return true;
    default:
      return false;
  }
}

std::string RepChannel::describe() const {
  std::string s = group.describe() + "/" + rep_kind_name(kind);
  if (kind == RepKind::SO2Harmonic || kind == RepKind::CyclicPlane)
    s += "(" + std::to_string(harmonic) + ")";
  return s;
}

RepChannel make_channel(GroupSpec group, RepKind kind, double snr,
                        int harmonic) {
  if (!(snr > 0.0)) fail(ErrorCode::InvalidInput, "channel snr must be positive");
  RepChannel ch;
  ch.group = group;
  ch.kind = kind;
  ch.harmonic = harmonic;
  ch.snr = snr;
  switch (kind) {
    case RepKind::SO2Harmonic:
      if (group.family != Family::SO2)
        fail(ErrorCode::InvalidInput, "SO2Harmonic requires the SO2 family");
      if (harmonic < 1)
        fail(ErrorCode::InvalidInput, "SO2Harmonic requires harmonic >= 1");
      ch.dim = 2;
      break;
    case RepKind::SOkStandard:
      if (group.family != Family::SOk)
        fail(ErrorCode::InvalidInput, "SOkStandard requires the SOk family");
      ch.dim = group.parameter;
      break;
    case RepKind::CyclicPlane:
      if (group.family != Family::Cyclic)
        fail(ErrorCode::InvalidInput, "CyclicPlane requires the Cyclic family");
      if (harmonic < 1 || 2 * harmonic > group.parameter - 1)
        fail(ErrorCode::InvalidInput,
             "CyclicPlane requires 1 <= harmonic <= (k-1)/2");
      ch.dim = 2;
      break;
    case RepKind::SymmetricStandard:
      if (group.family != Family::Symmetric)
        fail(ErrorCode::InvalidInput,
             "SymmetricStandard requires the Symmetric family");
      ch.dim = group.parameter - 1;
      break;
    case RepKind::Sign:
      if (group.family == Family::Cyclic || group.family == Family::Z2) {
        if (group.parameter % 2 != 0)
          fail(ErrorCode::InvalidInput,
               "the alternating character exists only for even cyclic order");
      } else if (group.family != Family::Symmetric) {
        fail(ErrorCode::InvalidInput, "Sign requires a finite family");
      }
      ch.dim = 1;
      break;
    case RepKind::Trivial:
      ch.dim = 1;
      break;
    case RepKind::CyclicComplement:
      if (group.family != Family::Cyclic && group.family != Family::Z2)
        fail(ErrorCode::InvalidInput,
             "CyclicComplement requires the Cyclic family");
      ch.dim = group.parameter - 1;
      break;
    case RepKind::SymmetricAction:
      if (group.family != Family::Symmetric)
        fail(ErrorCode::InvalidInput,
             "SymmetricAction requires the Symmetric family");
      ch.dim = group.parameter;
      break;
  }
  if (ch.dim < 1) fail(ErrorCode::InvalidInput, "channel dimension must be >= 1");
  return ch;
}

RepChannel so2_harmonic_channel(int harmonic, double snr) {
  return make_channel(GroupSpec::so2(), RepKind::SO2Harmonic, snr, harmonic);
}
RepChannel sok_standard_channel(int k, double snr) {
  return make_channel(GroupSpec::sok(k), RepKind::SOkStandard, snr);
}
RepChannel cyclic_plane_channel(int k, int harmonic, double snr) {
  return make_channel(GroupSpec::cyclic(k), RepKind::CyclicPlane, snr, harmonic);
}
RepChannel symmetric_standard_channel(int k, double snr) {
  return make_channel(GroupSpec::symmetric(k), RepKind::SymmetricStandard, snr);
}
RepChannel z2_channel(double snr) {
  return make_channel(GroupSpec::z2(), RepKind::Sign, snr);
}

Eigen::MatrixXd represent(const RepChannel& channel, const GroupElement& g) {
  if (!(g.spec() == channel.group))
    fail(ErrorCode::InvalidInput,
         "represent: element does not belong to the channel's group");
  switch (channel.kind) {
    case RepKind::SO2Harmonic:
      return rotation2(channel.harmonic * g.angle());
    case RepKind::SOkStandard:
      return g.rotation();
    case RepKind::CyclicPlane:
      return rotation2(2.0 * std::numbers::pi * channel.harmonic *
                       g.residue() / channel.group.parameter);
    case RepKind::SymmetricStandard: {
      const int k = channel.group.parameter;
      const Eigen::MatrixXd h = helmert_basis(k);
      return h.transpose() * permutation_matrix(g.permutation()) * h;
    }
    case RepKind::Sign: {
      Eigen::MatrixXd m(1, 1);
      if (channel.group.family == Family::Symmetric)
        m(0, 0) = permutation_parity(g.permutation());
      else
        m(0, 0) = g.residue() % 2 == 0 ? 1.0 : -1.0;
      return m;
    }
    case RepKind::Trivial:
      return Eigen::MatrixXd::Identity(1, 1);
    case RepKind::CyclicComplement: {
      const int k = channel.group.parameter;
      const Eigen::MatrixXd h = helmert_basis(k);
      return h.transpose() * cyclic_shift_matrix(k, g.residue()) * h;
    }
    case RepKind::SymmetricAction:
      return permutation_matrix(g.permutation());
  }
  fail(ErrorCode::Internal, "represent: unknown kind");
}

std::string rep_type_name(RepType type) {
  switch (type) {
    case RepType::RealType: return "real";
    case RepType::ComplexType: return "complex";
    case RepType::QuaternionicType: return "quaternionic";
    case RepType::Indeterminate: return "indeterminate";
  }
  return "?";
}

RepClassification classify(const RepChannel& channel, long n_samples,
                           Rng& rng) {
  if (n_samples < 10000)
    fail(ErrorCode::InvalidInput, "classify requires n_samples >= 10^4");
  MeanAccumulator acc;
  const bool exact = channel.group.finite() &&
                     channel.group.order() <= static_cast<std::uint64_t>(n_samples);
  if (exact) {
    for (const GroupElement& g : enumerate_elements(channel.group)) {
      const double tr = represent(channel, g).trace();
      acc.add(tr * tr);
    }
  } else {
    for (long i = 0; i < n_samples; ++i) {
      const double tr = represent(channel, haar_sample(channel.group, rng)).trace();
      acc.add(tr * tr);
    }
  }
  RepClassification out;
  out.rho = acc.mean();
  out.rho_stderr = exact ? 0.0 : acc.stderr_of_mean();
  const double tol = std::max(3.0 * out.rho_stderr, 1e-9);
  int matches = 0;
  double snapped = 0.0;
  for (double candidate : {1.0, 2.0, 4.0}) {
    if (std::abs(out.rho - candidate) <= tol) {
      ++matches;
      snapped = candidate;
    }
  }
  if (matches == 1) {
    out.type = snapped == 1.0   ? RepType::RealType
               : snapped == 2.0 ? RepType::ComplexType
                                : RepType::QuaternionicType;
    out.threshold = channel.dim / snapped;
  } else {
    out.type = RepType::Indeterminate;
    out.threshold = out.rho > 0.0 ? channel.dim / out.rho : 0.0;
  }
  return out;
}

std::vector<RepChannel> canonicalize(const std::vector<RepChannel>& channels) {
  std::vector<RepChannel> expanded;
  for (const RepChannel& ch : channels) {
    switch (ch.kind) {
      case RepKind::SO2Harmonic:
      case RepKind::SOkStandard:
      case RepKind::CyclicPlane:
      case RepKind::SymmetricStandard:
      case RepKind::Sign:
        expanded.push_back(ch);
        break;
      case RepKind::Trivial:
        break;  // carries no information
      case RepKind::CyclicComplement: {
        const int k = ch.group.parameter;
        for (int l = 1; 2 * l <= k - 1; ++l)
          expanded.push_back(
              make_channel(ch.group, RepKind::CyclicPlane, ch.snr, l));
        if (k % 2 == 0)
          expanded.push_back(make_channel(ch.group, RepKind::Sign, ch.snr));
        break;
      }
      case RepKind::SymmetricAction:
        // trivial ⊕ standard; the trivial summand is dropped
        expanded.push_back(
            make_channel(ch.group, RepKind::SymmetricStandard, ch.snr));
        break;
      default:
        fail(ErrorCode::UnsupportedInput,
             "canonicalize: reducible representation outside the catalog");
    }
  }
  // Merge isomorphic duplicates pairwise in input order:
  // sqrt(λ) <- (sqrt(λ) + sqrt(λ'))/sqrt(2).
  std::vector<RepChannel> out;
  std::map<std::tuple<int, int, int, int>, std::size_t> index;
  for (const RepChannel& ch : expanded) {
    const auto key = std::make_tuple(static_cast<int>(ch.group.family),
                                     ch.group.parameter,
                                     static_cast<int>(ch.kind), ch.harmonic);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back(ch);
    } else {
      RepChannel& prev = out[it->second];
      const double root =
          (std::sqrt(prev.snr) + std::sqrt(ch.snr)) / std::numbers::sqrt2;
      prev.snr = root * root;
    }
  }
  return out;
}

double snr_dim_sum(const std::vector<RepChannel>& channels) {
  double s = 0.0;
  for (const RepChannel& ch : channels) s += ch.snr * ch.dim;
  return s;
}

}  // namespace replica_sync

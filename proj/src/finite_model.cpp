#include "replica_sync/finite_model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "replica_sync/errors.hpp"
#include "replica_sync/quadrature.hpp"

namespace replica_sync {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_instance_channels(const std::vector<RepChannel>& channels) {
  if (channels.empty())
    fail(ErrorCode::InvalidInput, "instance needs at least one channel");
  for (const RepChannel& ch : channels)
    if (!(ch.group == channels.front().group))
      fail(ErrorCode::InvalidInput, "channels must share one group");
}

double enumeration_budget(const GroupSpec& spec, int n) {
  return std::pow(static_cast<double>(spec.order()), n);
}

/// Overlap blocks (1/N) Σ_i φ_ℓ(a_i)^T φ_ℓ(b_i) for two configurations.
std::vector<Eigen::MatrixXd> config_overlap(
    const std::vector<RepChannel>& channels,
    const std::vector<std::vector<Eigen::MatrixXd>>& reps_a,
    const std::vector<std::vector<Eigen::MatrixXd>>& reps_b) {
  std::vector<Eigen::MatrixXd> out;
  const int n = static_cast<int>(reps_a.size());
  for (std::size_t l = 0; l < channels.size(); ++l) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(channels[l].dim, channels[l].dim);
    for (int i = 0; i < n; ++i)
      m += reps_a[i][l].transpose() * reps_b[i][l];
    out.push_back(Eigen::MatrixXd(m / n));
  }
  return out;
}

}  // namespace

int SyncInstance::pair_index(int i, int j) const {
  // pairs (0,1), (0,2), ..., (0,n-1), (1,2), ... in lexicographic order
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

SyncInstance generate_sync(int n, const std::vector<RepChannel>& channels,
                           std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::InvalidInput, "generate_sync requires n >= 2");
  check_instance_channels(channels);
  SyncInstance inst;
  inst.n = n;
  inst.channels = channels;
  inst.seed = seed;
  Rng signal_rng(mix_seed(seed, 0));
  inst.g_star.reserve(n);
  for (int i = 0; i < n; ++i)
    inst.g_star.push_back(haar_sample(channels.front().group, signal_rng));
  std::vector<std::vector<Eigen::MatrixXd>> star_reps(n);
  for (int i = 0; i < n; ++i)
    for (const RepChannel& ch : channels)
      star_reps[i].push_back(represent(ch, inst.g_star[i]));
  const double root_n = std::sqrt(static_cast<double>(n));
  inst.y.resize(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      // Noise streams are keyed by the site pair (i, j), not the pair index,
      // so instances with the same seed nest as n grows.
      Rng noise_rng(mix_seed(
          seed, 1 + (static_cast<std::uint64_t>(i + 1) << 24) +
                    static_cast<std::uint64_t>(j)));
      auto& blocks = inst.y[inst.pair_index(i, j)];
      for (std::size_t l = 0; l < channels.size(); ++l) {
        const int k = channels[l].dim;
        Eigen::MatrixXd z(k, k);
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) z(a, b) = noise_rng.normal();
        blocks.push_back(Eigen::MatrixXd(
            std::sqrt(channels[l].snr) * star_reps[i][l] *
                star_reps[j][l].transpose() +
            root_n * z));
      }
    }
  }
  return inst;
}

SyncInstance make_sync_instance(
    const std::vector<RepChannel>& channels,
    const std::vector<GroupElement>& g_star,
    const std::vector<std::vector<Eigen::MatrixXd>>& z_blocks) {
  check_instance_channels(channels);
  SyncInstance inst;
  inst.n = static_cast<int>(g_star.size());
  if (inst.n < 1) fail(ErrorCode::InvalidInput, "need at least one site");
  inst.channels = channels;
  inst.g_star = g_star;
  inst.seed = 0;
  const double root_n = std::sqrt(static_cast<double>(inst.n));
  inst.y.resize(static_cast<std::size_t>(inst.n) * (inst.n - 1) / 2);
  for (int i = 0; i < inst.n; ++i) {
    for (int j = i + 1; j < inst.n; ++j) {
      const int p = inst.pair_index(i, j);
      auto& blocks = inst.y[p];
      for (std::size_t l = 0; l < channels.size(); ++l) {
        blocks.push_back(Eigen::MatrixXd(
            std::sqrt(channels[l].snr) * represent(channels[l], g_star[i]) *
                represent(channels[l], g_star[j]).transpose() +
            root_n * z_blocks[p][l]));
      }
    }
  }
  return inst;
}

double sync_hamiltonian(const SyncInstance& instance,
                        const std::vector<GroupElement>& state) {
  if (static_cast<int>(state.size()) != instance.n)
    fail(ErrorCode::InvalidInput, "state length must equal n");
  const int n = instance.n;
  // The quadratic term is configuration-independent for orthogonal
  // representations: ||φ_i • φ_j||² = Σ_ℓ λ_ℓ k_ℓ.
  double h = -0.5 / n * (static_cast<double>(n) * (n - 1) / 2) *
             snr_dim_sum(instance.channels);
  std::vector<std::vector<Eigen::MatrixXd>> reps(n);
  for (int i = 0; i < n; ++i)
    for (const RepChannel& ch : instance.channels)
      reps[i].push_back(represent(ch, state[i]));
  Eigen::MatrixXd tmp;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& blocks = instance.y[instance.pair_index(i, j)];
      for (std::size_t l = 0; l < instance.channels.size(); ++l) {
        tmp.noalias() = blocks[l] * reps[j][l];
        // Tr[rep_i^T y rep_j]
        h += std::sqrt(instance.channels[l].snr) / n *
             reps[i][l].cwiseProduct(tmp).sum();
      }
    }
  }
  return h;
}

// --- binary container ---------------------------------------------------

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

constexpr char kMagic[4] = {'R', 'S', 'Y', '1'};

}  // namespace

void save_instance(const SyncInstance& instance, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::InvalidInput, "cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(instance.n));
  put_u32(os, static_cast<std::uint32_t>(instance.channels.size()));
  for (const RepChannel& ch : instance.channels) {
    put_u32(os, static_cast<std::uint32_t>(ch.group.family));
    put_u32(os, static_cast<std::uint32_t>(ch.group.parameter));
    put_u32(os, static_cast<std::uint32_t>(ch.kind));
    put_u32(os, static_cast<std::uint32_t>(ch.harmonic));
    put_u32(os, static_cast<std::uint32_t>(ch.dim));
    put_f64(os, ch.snr);
  }
  put_u64(os, instance.seed);
  const GroupSpec& spec = instance.channels.front().group;
  for (const GroupElement& g : instance.g_star) {
    switch (spec.family) {
      case Family::SO2:
        put_f64(os, g.angle());
        break;
      case Family::Cyclic:
      case Family::Z2:
        put_u32(os, static_cast<std::uint32_t>(g.residue()));
        break;
      case Family::Symmetric:
        for (int v : g.permutation()) put_u32(os, static_cast<std::uint32_t>(v));
        break;
      case Family::SOk:
        for (int r = 0; r < spec.parameter; ++r)
          for (int c = 0; c < spec.parameter; ++c) put_f64(os, g.rotation()(r, c));
        break;
    }
  }
  for (const auto& pair_blocks : instance.y)
    for (const Eigen::MatrixXd& b : pair_blocks)
      for (int r = 0; r < b.rows(); ++r)
        for (int c = 0; c < b.cols(); ++c) put_f64(os, b(r, c));
  if (!os) fail(ErrorCode::Internal, "write failure on " + path);
}

SyncInstance load_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::InvalidInput, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorCode::InvalidInput, path + " is not an instance container");
  SyncInstance inst;
  inst.n = static_cast<int>(get_u32(is));
  const std::uint32_t n_channels = get_u32(is);
  for (std::uint32_t l = 0; l < n_channels; ++l) {
    GroupSpec spec;
    spec.family = static_cast<Family>(get_u32(is));
    spec.parameter = static_cast<int>(get_u32(is));
    const RepKind kind = static_cast<RepKind>(get_u32(is));
    const int harmonic = static_cast<int>(get_u32(is));
    const int dim = static_cast<int>(get_u32(is));
    const double snr = get_f64(is);
    RepChannel ch = make_channel(spec, kind, snr, harmonic);
    if (ch.dim != dim) fail(ErrorCode::InvalidInput, "corrupt channel header");
    inst.channels.push_back(ch);
  }
  inst.seed = get_u64(is);
  const GroupSpec& spec = inst.channels.front().group;
  for (int i = 0; i < inst.n; ++i) {
    switch (spec.family) {
      case Family::SO2:
        inst.g_star.emplace_back(spec, get_f64(is));
        break;
      case Family::Cyclic:
      case Family::Z2:
        inst.g_star.emplace_back(spec, static_cast<int>(get_u32(is)));
        break;
      case Family::Symmetric: {
        std::vector<int> p(spec.parameter);
        for (int& v : p) v = static_cast<int>(get_u32(is));
        inst.g_star.emplace_back(spec, std::move(p));
        break;
      }
      case Family::SOk: {
        Eigen::MatrixXd m(spec.parameter, spec.parameter);
        for (int r = 0; r < spec.parameter; ++r)
          for (int c = 0; c < spec.parameter; ++c) m(r, c) = get_f64(is);
        inst.g_star.emplace_back(spec, std::move(m));
        break;
      }
    }
  }
  inst.y.resize(static_cast<std::size_t>(inst.n) * (inst.n - 1) / 2);
  for (auto& pair_blocks : inst.y) {
    for (const RepChannel& ch : inst.channels) {
      Eigen::MatrixXd b(ch.dim, ch.dim);
      for (int r = 0; r < ch.dim; ++r)
        for (int c = 0; c < ch.dim; ++c) b(r, c) = get_f64(is);
      pair_blocks.push_back(std::move(b));
    }
  }
  if (!is) fail(ErrorCode::InvalidInput, "truncated instance container");
  return inst;
}

// --- Gibbs chain ----------------------------------------------------------

GibbsChain::GibbsChain(const SyncInstance& instance, std::uint64_t chain_seed)
    : rng_(mix_seed(chain_seed, 0x6B1551ULL)) {
  const GroupSpec& spec = instance.channels.front().group;
  if (spec.family == Family::SOk)
    fail(ErrorCode::Inapplicable,
         "posterior sampling is implemented for finite families and SO2");
  state_reps_.resize(instance.n);
  for (int i = 0; i < instance.n; ++i) {
    state_.push_back(haar_sample(spec, rng_));
    for (const RepChannel& ch : instance.channels)
      state_reps_[i].push_back(represent(ch, state_.back()));
  }
  if (spec.finite()) {
    elements_ = enumerate_elements(spec);
    element_reps_.resize(elements_.size());
    for (std::size_t e = 0; e < elements_.size(); ++e)
      for (const RepChannel& ch : instance.channels)
        element_reps_[e].push_back(represent(ch, elements_[e]));
  }
}

void GibbsChain::set_site(const SyncInstance& instance, int site,
                          GroupElement g) {
  for (std::size_t l = 0; l < instance.channels.size(); ++l)
    state_reps_[site][l] = represent(instance.channels[l], g);
  state_[site] = std::move(g);
}

/// C_{i,ℓ} such that the single-site log-weight is
/// s_i(g) = Σ_ℓ Tr[φ_ℓ(g)^T C_{i,ℓ}] — the single-site restriction of H.
std::vector<Eigen::MatrixXd> GibbsChain::site_field(
    const SyncInstance& instance, int site) const {
  const int n = instance.n;
  std::vector<Eigen::MatrixXd> field;
  field.reserve(instance.channels.size());
  for (const RepChannel& ch : instance.channels)
    field.push_back(Eigen::MatrixXd::Zero(ch.dim, ch.dim));
  for (int j = 0; j < n; ++j) {
    if (j == site) continue;
    for (std::size_t l = 0; l < instance.channels.size(); ++l) {
      const double coef = std::sqrt(instance.channels[l].snr) / n;
      if (site < j)
        field[l].noalias() += coef *
                              instance.y[instance.pair_index(site, j)][l] *
                              state_reps_[j][l];
      else
        field[l].noalias() +=
            coef * instance.y[instance.pair_index(j, site)][l].transpose() *
            state_reps_[j][l];
    }
  }
  return field;
}

std::vector<double> GibbsChain::site_conditional_logits(
    const SyncInstance& instance, int site) const {
  if (elements_.empty())
    fail(ErrorCode::Inapplicable, "exact conditionals exist for finite families");
  const std::vector<Eigen::MatrixXd> field = site_field(instance, site);
  std::vector<double> logits(elements_.size(), 0.0);
  for (std::size_t e = 0; e < elements_.size(); ++e)
    for (std::size_t l = 0; l < field.size(); ++l)
      logits[e] += element_reps_[e][l].cwiseProduct(field[l]).sum();
  return logits;
}

void GibbsChain::sweep(const SyncInstance& instance) {
  const GroupSpec& spec = instance.channels.front().group;
  ++sweep_count_;
  if (spec.finite()) {
    for (int i = 0; i < instance.n; ++i) {
      std::vector<double> logits = site_conditional_logits(instance, i);
      double mx = logits[0];
      for (double v : logits) mx = std::max(mx, v);
      double total = 0.0;
      for (double& v : logits) {
        v = std::exp(v - mx);
        total += v;
      }
      double u = rng_.uniform() * total;
      std::size_t pick = 0;
      for (; pick + 1 < logits.size(); ++pick) {
        if (u < logits[pick]) break;
        u -= logits[pick];
      }
      state_[i] = elements_[pick];
      state_reps_[i] = element_reps_[pick];
    }
    acceptance_rate_ = 1.0;  // exact conditional draws
    return;
  }
  // SO2: random-walk Metropolis on the angle. s_i(θ) is a cosine polynomial
  // in θ through the site field.
  int accepted = 0;
  for (int i = 0; i < instance.n; ++i) {
    const std::vector<Eigen::MatrixXd> field = site_field(instance, i);
    auto site_energy = [&](double theta) {
      double s = 0.0;
      for (std::size_t l = 0; l < field.size(); ++l) {
        const double a = instance.channels[l].harmonic * theta;
        // Tr[R(a)^T F] = cos a (F11 + F22) + sin a (F21 - F12)
        s += std::cos(a) * (field[l](0, 0) + field[l](1, 1)) +
             std::sin(a) * (field[l](1, 0) - field[l](0, 1));
      }
      return s;
    };
    const double theta = state_[i].angle();
    const double proposal = theta + proposal_scale_ * rng_.normal();
    if (std::log(rng_.uniform() + 1e-300) <
        site_energy(proposal) - site_energy(theta)) {
      set_site(instance, i, GroupElement(spec, proposal));
      ++accepted;
    }
  }
  acceptance_rate_ = static_cast<double>(accepted) / instance.n;
  if (adapting_) {
    // Robbins–Monro on log-scale, targeting acceptance 0.4.
    const double step = std::pow(static_cast<double>(sweep_count_), -0.6);
    proposal_scale_ *= std::exp(step * (acceptance_rate_ - 0.4));
    proposal_scale_ = std::clamp(proposal_scale_, 1e-3, 10.0);
  }
}

// --- exact enumeration ----------------------------------------------------

ExactFreeEnergyResult exact_free_energy(const SyncInstance& instance,
                                        bool replica_diagnostics) {
  const GroupSpec& spec = instance.channels.front().group;
  if (!spec.finite())
    fail(ErrorCode::NotEnumerable, "exact free energy needs a finite group");
  if (enumeration_budget(spec, instance.n) > 1e7)
    fail(ErrorCode::BudgetExceeded,
         "|G|^N exceeds the 10^7 enumeration budget");
  const int n = instance.n;
  const std::vector<GroupElement> elements = enumerate_elements(spec);
  const int b = static_cast<int>(elements.size());
  const std::size_t n_channels = instance.channels.size();
  const std::size_t n_pairs = instance.y.size();

  std::vector<std::vector<Eigen::MatrixXd>> reps(b);
  for (int e = 0; e < b; ++e)
    for (const RepChannel& ch : instance.channels)
      reps[e].push_back(represent(ch, elements[e]));

  // Pairwise contribution tables: t[pair][a*b + c] for elements (a, c).
  const double constant = -0.5 / n *
                          (static_cast<double>(n) * (n - 1) / 2) *
                          snr_dim_sum(instance.channels);
  std::vector<std::vector<double>> table(n_pairs);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int p = instance.pair_index(i, j);
      table[p].assign(static_cast<std::size_t>(b) * b, 0.0);
      for (std::size_t l = 0; l < n_channels; ++l) {
        const double coef = std::sqrt(instance.channels[l].snr) / n;
        for (int ea = 0; ea < b; ++ea) {
          const Eigen::MatrixXd left = reps[ea][l].transpose() * instance.y[p][l];
          for (int ec = 0; ec < b; ++ec)
            table[p][static_cast<std::size_t>(ea) * b + ec] +=
                coef * left.cwiseProduct(reps[ec][l].transpose()).sum();
        }
      }
    }
  }

  std::vector<int> config(n, 0);
  auto dfs = [&](auto&& self, int depth, double h, auto&& leaf) -> void {
    if (depth == n) {
      leaf(h);
      return;
    }
    for (int a = 0; a < b; ++a) {
      config[depth] = a;
      double h2 = h;
      for (int i = 0; i < depth; ++i)
        h2 += table[instance.pair_index(i, depth)]
                   [static_cast<std::size_t>(config[i]) * b + a];
      self(self, depth + 1, h2, leaf);
    }
  };

  // Pass 1: max H.
  double h_max = -std::numeric_limits<double>::infinity();
  dfs(dfs, 0, constant, [&](double h) { h_max = std::max(h_max, h); });

  // Pass 2: partition function, <H>, and pairwise element-pair occupation
  // weights w2[pair](a, c) = Σ_G 1{g_i = a, g_j = c} exp(H - max).
  double z_sum = 0.0, h_sum = 0.0;
  std::vector<std::vector<double>> w2;
  if (replica_diagnostics)
    w2.assign(n_pairs, std::vector<double>(static_cast<std::size_t>(b) * b, 0.0));
  dfs(dfs, 0, constant, [&](double h) {
    const double w = std::exp(h - h_max);
    z_sum += w;
    h_sum += h * w;
    if (replica_diagnostics)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          w2[instance.pair_index(i, j)]
            [static_cast<std::size_t>(config[i]) * b + config[j]] += w;
  });

  ExactFreeEnergyResult out;
  out.free_energy =
      (h_max + std::log(z_sum) - n * std::log(static_cast<double>(b))) / n;
  out.mean_hamiltonian = h_sum / z_sum;
  if (!replica_diagnostics) return out;

  // Posterior pairwise moments per channel:
  //   A_{ij} = <φ(g_i) φ(g_j)^T>   (quadratic overlap statistics)
  //   M_{ij} = <φ(g_i)^T φ(g_j)>   (pairwise matrix MMSE)
  std::vector<std::vector<Eigen::MatrixXd>> outer_mean(n_pairs),
      gram_mean(n_pairs);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t l = 0; l < n_channels; ++l) {
      const int k = instance.channels[l].dim;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
      for (int ea = 0; ea < b; ++ea)
        for (int ec = 0; ec < b; ++ec) {
          const double w = w2[p][static_cast<std::size_t>(ea) * b + ec] / z_sum;
          if (w == 0.0) continue;
          a.noalias() += w * reps[ea][l] * reps[ec][l].transpose();
          m.noalias() += w * reps[ea][l].transpose() * reps[ec][l];
        }
      outer_mean[p].push_back(std::move(a));
      gram_mean[p].push_back(std::move(m));
    }
  }

  std::vector<std::vector<Eigen::MatrixXd>> star_reps(n);
  for (int i = 0; i < n; ++i)
    for (const RepChannel& ch : instance.channels)
      star_reps[i].push_back(represent(ch, instance.g_star[i]));

  const double nn = static_cast<double>(n) * n;
  for (std::size_t l = 0; l < n_channels; ++l) {
    const int k = instance.channels[l].dim;
    double two_copy = n * static_cast<double>(k);  // i = j diagonal terms
    double realized = two_copy;
    double mmse = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const int p = instance.pair_index(i, j);
        two_copy += 2.0 * outer_mean[p][l].squaredNorm();
        realized += 2.0 * outer_mean[p][l]
                              .cwiseProduct(star_reps[i][l] *
                                            star_reps[j][l].transpose())
                              .sum();
        mmse += (star_reps[i][l].transpose() * star_reps[j][l] -
                 gram_mean[p][l])
                    .squaredNorm();
      }
    out.two_copy_sq.push_back(two_copy / nn);
    out.realized_sq.push_back(realized / nn);
    out.matrix_mmse.push_back(mmse / static_cast<double>(n_pairs));
  }

  // Second replica enumerated as the conditional law of the truth: an
  // independent summation path for the same expectation. Precontract
  // T_ℓ[pair](a, c) = <A_{ij}, φ_ℓ(a) φ_ℓ(c)^T> per channel.
  std::vector<std::vector<std::vector<double>>> truth_table(n_channels);
  for (std::size_t l = 0; l < n_channels; ++l) {
    truth_table[l].assign(n_pairs,
                          std::vector<double>(static_cast<std::size_t>(b) * b, 0.0));
    for (std::size_t p = 0; p < n_pairs; ++p)
      for (int ea = 0; ea < b; ++ea)
        for (int ec = 0; ec < b; ++ec)
          truth_table[l][p][static_cast<std::size_t>(ea) * b + ec] =
              outer_mean[p][l]
                  .cwiseProduct(reps[ea][l] * reps[ec][l].transpose())
                  .sum();
  }
  std::vector<double> truth_offdiag(n_channels, 0.0);
  dfs(dfs, 0, constant, [&](double h) {
    const double w = std::exp(h - h_max) / z_sum;
    for (std::size_t l = 0; l < n_channels; ++l) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          acc += truth_table[l][instance.pair_index(i, j)]
                            [static_cast<std::size_t>(config[i]) * b + config[j]];
      truth_offdiag[l] += w * acc;
    }
  });
  for (std::size_t l = 0; l < n_channels; ++l) {
    const double diag = n * static_cast<double>(instance.channels[l].dim);
    out.truth_enumerated_sq.push_back((diag + 2.0 * truth_offdiag[l]) / nn);
    out.nishimori_gap =
        std::max(out.nishimori_gap,
                 std::abs(out.two_copy_sq[l] - out.truth_enumerated_sq[l]));
  }
  return out;
}

// --- chain diagnostics ------------------------------------------------------

namespace {

/// min over h in G of Σ_ℓ λ_ℓ ||m_ℓ - q*_ℓ φ_ℓ(h)||_F².
double orbit_distance_to(const std::vector<RepChannel>& channels,
                         const std::vector<Eigen::MatrixXd>& m,
                         const Overlap& q_star) {
  const GroupSpec& spec = channels.front().group;
  if (spec.family == Family::SO2 && channels.size() == 1) {
    // closed form: Tr[R(ℓθ)^T q* m] = cos(ℓθ)(A11+A22) + sin(ℓθ)(A21-A12)
    const Eigen::MatrixXd a = q_star.block(0) * m[0];
    const double best =
        std::hypot(a(0, 0) + a(1, 1), a(1, 0) - a(0, 1));
    return channels[0].snr * (m[0].squaredNorm() + q_star.block(0).squaredNorm() -
                              2.0 * best);
  }
  if (spec.family == Family::SO2) {
    // multi-channel: dense scan plus local refinement over the angle
    auto total = [&](double theta) {
      double d = 0.0;
      const GroupElement h(spec, theta);
      for (std::size_t l = 0; l < channels.size(); ++l)
        d += channels[l].snr *
             (m[l] - q_star.block(l) * represent(channels[l], h)).squaredNorm();
      return d;
    };
    double best = total(0.0), best_theta = 0.0;
    const int grid = 2048;
    for (int i = 1; i < grid; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / grid;
      const double d = total(theta);
      if (d < best) {
        best = d;
        best_theta = theta;
      }
    }
    double lo = best_theta - 2.0 * std::numbers::pi / grid;
    double hi = best_theta + 2.0 * std::numbers::pi / grid;
    for (int it = 0; it < 60; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (total(m1) < total(m2))
        hi = m2;
      else
        lo = m1;
    }
    return std::min(best, total(0.5 * (lo + hi)));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const GroupElement& h : enumerate_elements(spec)) {
    double d = 0.0;
    for (std::size_t l = 0; l < channels.size(); ++l)
      d += channels[l].snr *
           (m[l] - q_star.block(l) * represent(channels[l], h)).squaredNorm();
    best = std::min(best, d);
  }
  return best;
}

}  // namespace

DiagnosticsReport measure(const SyncInstance& instance, GibbsChain& chain,
                          int burn_in, int n_samples, int thinning,
                          const std::optional<Overlap>& q_star) {
  if (n_samples < 1 || thinning < 1 || burn_in < 0)
    fail(ErrorCode::InvalidInput, "invalid sampling schedule");
  const int n = instance.n;
  const std::size_t n_channels = instance.channels.size();
  for (int s = 0; s < burn_in; ++s) chain.sweep(instance);
  chain.freeze_adaptation();

  std::vector<std::vector<Eigen::MatrixXd>> star_reps(n);
  for (int i = 0; i < n; ++i)
    for (const RepChannel& ch : instance.channels)
      star_reps[i].push_back(represent(ch, instance.g_star[i]));

  DiagnosticsReport report;
  report.free_energy = kNaN;
  report.samples = n_samples;
  const ModelConstants mc = model_constants(instance.channels);
  report.d_gn = mc.d_gn;
  report.k_gn = mc.k_gn;

  std::vector<Eigen::MatrixXd> overlap_sum(n_channels);
  std::vector<double> sqnorm_sum(n_channels, 0.0);
  for (std::size_t l = 0; l < n_channels; ++l)
    overlap_sum[l] = Eigen::MatrixXd::Zero(instance.channels[l].dim,
                                           instance.channels[l].dim);
  // pairwise posterior means for the matrix MMSE
  std::vector<std::vector<Eigen::MatrixXd>> pair_mean(instance.y.size());
  for (std::size_t p = 0; p < pair_mean.size(); ++p)
    for (std::size_t l = 0; l < n_channels; ++l)
      pair_mean[p].push_back(Eigen::MatrixXd::Zero(
          instance.channels[l].dim, instance.channels[l].dim));
  MeanAccumulator ham_acc, orbit_acc;
  std::vector<double> ham_samples;
  ham_samples.reserve(n_samples);
  // Sampled two-replica vs truth comparison of ||Q||_F² (quadratic, hence
  // invariant to the chain's global-rotation drift); consecutive thinned
  // samples stand in for independent replicas.
  std::vector<MeanAccumulator> truth_trace(n_channels), replica_trace(n_channels);
  std::vector<std::vector<Eigen::MatrixXd>> previous_reps;

  for (int s = 0; s < n_samples; ++s) {
    for (int t = 0; t < thinning; ++t) chain.sweep(instance);
    std::vector<std::vector<Eigen::MatrixXd>> reps(n);
    for (int i = 0; i < n; ++i)
      for (const RepChannel& ch : instance.channels)
        reps[i].push_back(represent(ch, chain.state()[i]));

    const std::vector<Eigen::MatrixXd> m =
        config_overlap(instance.channels, reps, star_reps);
    for (std::size_t l = 0; l < n_channels; ++l) {
      overlap_sum[l] += m[l];
      sqnorm_sum[l] += m[l].squaredNorm();
      truth_trace[l].add(m[l].squaredNorm());
    }
    if (!previous_reps.empty()) {
      const std::vector<Eigen::MatrixXd> r =
          config_overlap(instance.channels, previous_reps, reps);
      for (std::size_t l = 0; l < n_channels; ++l)
        replica_trace[l].add(r[l].squaredNorm());
    }
    previous_reps = reps;
    Eigen::MatrixXd tmp;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (std::size_t l = 0; l < n_channels; ++l) {
          tmp.noalias() = reps[i][l].transpose() * reps[j][l];
          pair_mean[instance.pair_index(i, j)][l] += tmp;
        }
    const double ham = sync_hamiltonian(instance, chain.state());
    ham_acc.add(ham);
    ham_samples.push_back(ham);
    if (q_star) orbit_acc.add(orbit_distance_to(instance.channels, m, *q_star));
  }

  for (std::size_t l = 0; l < n_channels; ++l) {
    report.overlap_blocks.push_back(Eigen::MatrixXd(overlap_sum[l] / n_samples));
    report.overlap_sqnorm.push_back(sqnorm_sum[l] / n_samples);
  }
  report.matrix_mmse.assign(n_channels, 0.0);
  const double n_pairs = static_cast<double>(instance.y.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (std::size_t l = 0; l < n_channels; ++l) {
        const Eigen::MatrixXd err =
            star_reps[i][l].transpose() * star_reps[j][l] -
            pair_mean[instance.pair_index(i, j)][l] / n_samples;
        report.matrix_mmse[l] += err.squaredNorm() / n_pairs;
      }
  report.mean_hamiltonian = ham_acc.mean();
  // Batch means absorb residual autocorrelation into the error bar.
  const int n_batches = std::min<int>(20, n_samples);
  MeanAccumulator batches;
  const std::size_t batch_len = ham_samples.size() / n_batches;
  if (batch_len >= 1) {
    for (int bidx = 0; bidx < n_batches; ++bidx) {
      double acc = 0.0;
      for (std::size_t s = 0; s < batch_len; ++s)
        acc += ham_samples[bidx * batch_len + s];
      batches.add(acc / batch_len);
    }
    report.mean_hamiltonian_stderr = batches.stderr_of_mean();
  }
  report.orbit_distance = q_star ? orbit_acc.mean() : kNaN;
  double gap = 0.0;
  for (std::size_t l = 0; l < n_channels; ++l)
    gap = std::max(gap,
                   std::abs(truth_trace[l].mean() - replica_trace[l].mean()));
  report.nishimori_gap = gap;
  return report;
}

ModelConstants model_constants(const std::vector<RepChannel>& channels) {
  check_instance_channels(channels);
  ModelConstants mc;
  mc.k_gn = snr_dim_sum(channels);
  mc.d_gn = std::sqrt(mc.k_gn);
  return mc;
}

}  // namespace replica_sync

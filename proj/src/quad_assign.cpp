#include "replica_sync/quad_assign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "replica_sync/errors.hpp"
#include "replica_sync/parallel.hpp"

namespace replica_sync {

namespace {

/// Legendre polynomial of degree l, normalized to unit L² norm against the
/// uniform probability measure on [-1, 1].
double normalized_legendre(int l, double x) {
  double p0 = 1.0, p1 = x;
  if (l == 0) return 1.0;
  for (int k = 2; k <= l; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return std::sqrt(2.0 * l + 1.0) * p1;
}

std::vector<double> support_grid(const KernelSpec& kernel, int n) {
  if (kernel.base == BaseMeasure::Rademacher) return {-1.0, 1.0};
  if (kernel.base == BaseMeasure::DiscreteAtoms) return kernel.atoms;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = -1.0 + 2.0 * i / (n - 1);
  return grid;
}

Eigen::MatrixXd check_psd_square(const Eigen::MatrixXd& q, int rank) {
  if (q.rows() != rank || q.cols() != rank)
    fail(ErrorCode::InvalidInput, "overlap matrix size must match the rank");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    fail(ErrorCode::InvalidInput, "overlap matrix must be symmetric");
  Eigen::MatrixXd sym = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() < -1e-6)
    fail(ErrorCode::InvalidInput, "overlap matrix is not PSD");
  Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

KernelSpec KernelSpec::rank_one(double scale, BaseMeasure base) {
  if (!(scale > 0.0)) fail(ErrorCode::InvalidInput, "kernel scale must be positive");
  KernelSpec k;
  k.kind = KernelKind::RankOne;
  k.base = base;
  k.scale = scale;
  if (base == BaseMeasure::DiscreteAtoms)
    fail(ErrorCode::InvalidInput, "rank_one expects Rademacher or Uniform");
  return k;
}

KernelSpec KernelSpec::finite_rank(std::vector<double> mu, double scale) {
  if (!(scale > 0.0)) fail(ErrorCode::InvalidInput, "kernel scale must be positive");
  if (mu.empty()) fail(ErrorCode::InvalidInput, "finite_rank needs eigenvalues");
  for (double m : mu)
    if (m < 0.0) fail(ErrorCode::InvalidInput, "kernel eigenvalues must be >= 0");
  KernelSpec k;
  k.kind = KernelKind::FiniteRank;
  k.base = BaseMeasure::UniformInterval;
  k.scale = scale;
  k.finite_rank_mu = std::move(mu);
  return k;
}

KernelSpec KernelSpec::gaussian_rbf(double bandwidth, double scale) {
  if (!(bandwidth > 0.0) || !(scale > 0.0))
    fail(ErrorCode::InvalidInput, "bandwidth and scale must be positive");
  KernelSpec k;
  k.kind = KernelKind::GaussianRBF;
  k.base = BaseMeasure::UniformInterval;
  k.scale = scale;
  k.bandwidth = bandwidth;
  return k;
}

KernelSpec KernelSpec::discrete(std::vector<double> atoms,
                                std::vector<double> weights, double scale) {
  if (atoms.size() != weights.size() || atoms.empty())
    fail(ErrorCode::InvalidInput, "atoms and weights must match");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) fail(ErrorCode::InvalidInput, "atom weights must be positive");
    total += w;
  }
  KernelSpec k;
  k.kind = KernelKind::RankOne;
  k.base = BaseMeasure::DiscreteAtoms;
  k.scale = scale;
  k.atoms = std::move(atoms);
  for (double& w : weights) w /= total;
  k.atom_weights = std::move(weights);
  return k;
}

double KernelSpec::eval(double x, double y) const {
  switch (kind) {
    case KernelKind::RankOne:
      return scale * x * y;
    case KernelKind::FiniteRank: {
      double acc = 0.0;
      for (std::size_t l = 0; l < finite_rank_mu.size(); ++l)
        acc += finite_rank_mu[l] * normalized_legendre(static_cast<int>(l) + 1, x) *
               normalized_legendre(static_cast<int>(l) + 1, y);
      return scale * acc;
    }
    case KernelKind::GaussianRBF: {
      const double d = (x - y) / bandwidth;
      return scale * std::exp(-0.5 * d * d);
    }
  }
  fail(ErrorCode::Internal, "eval: unknown kernel kind");
}

double KernelSpec::bound() const {
  double k0 = 0.0;
  const std::vector<double> grid = support_grid(*this, 101);
  for (double x : grid)
    for (double y : grid) k0 = std::max(k0, std::abs(eval(x, y)));
  return k0 * (1.0 + 1e-9) + 1e-12;
}

QuadratureRule KernelSpec::base_rule(int n_nodes) const {
  switch (base) {
    case BaseMeasure::Rademacher:
      return {{-1.0, 1.0}, {0.5, 0.5}};
    case BaseMeasure::DiscreteAtoms:
      return {atoms, atom_weights};
    case BaseMeasure::UniformInterval: {
      QuadratureRule rule = gauss_legendre(n_nodes, -1.0, 1.0);
      for (double& w : rule.weights) w *= 0.5;  // uniform density 1/2
      return rule;
    }
  }
  fail(ErrorCode::Internal, "base_rule: unknown measure");
}

double KernelSpec::sample(Rng& rng) const {
  switch (base) {
    case BaseMeasure::Rademacher:
      return rng.uniform() < 0.5 ? -1.0 : 1.0;
    case BaseMeasure::UniformInterval:
      return rng.uniform(-1.0, 1.0);
    case BaseMeasure::DiscreteAtoms: {
      double u = rng.uniform();
      for (std::size_t a = 0; a + 1 < atoms.size(); ++a) {
        if (u < atom_weights[a]) return atoms[a];
        u -= atom_weights[a];
      }
      return atoms.back();
    }
  }
  fail(ErrorCode::Internal, "sample: unknown measure");
}

std::string KernelSpec::describe() const {
  switch (kind) {
    case KernelKind::RankOne: return "rank_one";
    case KernelKind::FiniteRank: return "finite_rank";
    case KernelKind::GaussianRBF: return "gaussian_rbf";
  }
  return "?";
}

double kernel_second_moment(const KernelSpec& kernel, int n_nodes) {
  const QuadratureRule rule = kernel.base_rule(n_nodes);
  double acc = 0.0;
  for (std::size_t a = 0; a < rule.nodes.size(); ++a)
    for (std::size_t c = 0; c < rule.nodes.size(); ++c) {
      const double k = kernel.eval(rule.nodes[a], rule.nodes[c]);
      acc += rule.weights[a] * rule.weights[c] * k * k;
    }
  return acc;
}

MercerTruncation mercer_truncate(const KernelSpec& kernel, int rank,
                                 int n_nodes) {
  if (rank < 1) fail(ErrorCode::InvalidInput, "rank must be >= 1");
  if (kernel.base == BaseMeasure::UniformInterval && n_nodes < 4 * rank)
    fail(ErrorCode::InvalidInput, "need n_nodes >= 4 * rank");
  MercerTruncation t;
  t.kernel = kernel;
  const QuadratureRule rule = kernel.base_rule(n_nodes);
  const int m = static_cast<int>(rule.nodes.size());
  t.nodes = rule.nodes;
  t.weights = rule.weights;

  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      a(i, j) = std::sqrt(rule.weights[i]) * kernel.eval(rule.nodes[i], rule.nodes[j]) *
                std::sqrt(rule.weights[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);

  // Eigen returns ascending order; take the top `rank`, clip tiny negatives.
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int p, int q) {
    return es.eigenvalues()(p) > es.eigenvalues()(q);
  });
  int keep = std::min(rank, m);
  for (int l = 0; l < keep; ++l) {
    const double mu = es.eigenvalues()(order[l]);
    if (mu < -1e-10)
      fail(ErrorCode::Internal, "PSD kernel produced a negative eigenvalue");
    if (mu < 1e-12) {
      keep = l;  // rank deficiency: truncate early with a warning flag
      t.truncated_early = true;
      break;
    }
  }
  if (keep < rank && !t.truncated_early) t.truncated_early = true;
  if (keep == 0) fail(ErrorCode::InvalidInput, "kernel has no usable spectrum");
  t.rank = keep;
  t.mu.resize(keep);
  t.f_nodes.resize(m, keep);
  for (int l = 0; l < keep; ++l) {
    t.mu(l) = std::max(es.eigenvalues()(order[l]), 0.0);
    Eigen::VectorXd f = es.eigenvectors().col(order[l]);
    for (int i = 0; i < m; ++i) f(i) /= std::sqrt(rule.weights[i]);
    // deterministic sign: positive at the largest node where |f| peaks
    // (ties from symmetric supports break toward the right endpoint)
    const double peak = f.cwiseAbs().maxCoeff();
    for (int i = m - 1; i >= 0; --i) {
      if (std::abs(f(i)) >= (1.0 - 1e-9) * peak) {
        if (f(i) < 0.0) f = -f;
        break;
      }
    }
    t.f_nodes.col(l) = f;
  }
  t.u_nodes = t.f_nodes * t.mu.cwiseSqrt().asDiagonal();

  const std::vector<double> grid = support_grid(kernel, 100);
  double sup = 0.0;
  for (double x : grid)
    for (double y : grid)
      sup = std::max(sup, std::abs(kernel.eval(x, y) - t.truncated_eval(x, y)));
  t.residual_sup = sup;
  double trace = 0.0;
  for (int i = 0; i < m; ++i) {
    double diag_l = 0.0;
    for (int l = 0; l < keep; ++l) diag_l += t.mu(l) * t.f_nodes(i, l) * t.f_nodes(i, l);
    trace += rule.weights[i] * (kernel.eval(rule.nodes[i], rule.nodes[i]) - diag_l);
  }
  t.trace_residual = trace;
  return t;
}

Eigen::VectorXd MercerTruncation::feature(double x) const {
  Eigen::VectorXd u(rank);
  for (int l = 0; l < rank; ++l) {
    double acc = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a)
      acc += weights[a] * kernel.eval(x, nodes[a]) * f_nodes(static_cast<int>(a), l);
    u(l) = mu(l) > 0.0 ? std::sqrt(mu(l)) * (acc / mu(l)) : 0.0;
  }
  return u;
}

double MercerTruncation::truncated_eval(double x, double y) const {
  return feature(x).dot(feature(y));
}

QaChannelEvaluator::QaChannelEvaluator(const MercerTruncation& trunc,
                                       const Eigen::MatrixXd& q,
                                       const EstimatorConfig& cfg)
    : trunc_(trunc), cfg_(cfg) {
  cfg_.validate();
  q_ = check_psd_square(q, trunc.rank);
  q_sqrt_ = psd_sqrt(q_);
  const int m = static_cast<int>(trunc.nodes.size());
  self_term_.resize(m);
  for (int a = 0; a < m; ++a) {
    const Eigen::VectorXd u = trunc.u_nodes.row(a).transpose();
    self_term_(a) = u.dot(q_ * u);
  }
}

void QaChannelEvaluator::draw(long index, double& x_star,
                              Eigen::VectorXd& z) const {
  const long base = cfg_.antithetic ? index / 2 : index;
  const double sign = cfg_.antithetic && (index % 2 == 1) ? -1.0 : 1.0;
  Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(base)));
  x_star = trunc_.kernel.sample(rng);
  z.resize(trunc_.rank);
  for (int l = 0; l < trunc_.rank; ++l) z(l) = sign * rng.normal();
}

void QaChannelEvaluator::scores(double x_star, const Eigen::VectorXd& z,
                                std::vector<double>& s) const {
  const Eigen::VectorXd u_star = trunc_.feature(x_star);
  const Eigen::VectorXd shift = q_ * u_star + q_sqrt_ * z;
  const int m = static_cast<int>(trunc_.nodes.size());
  s.resize(m);
  for (int a = 0; a < m; ++a)
    s[a] = -0.5 * self_term_(a) + trunc_.u_nodes.row(a).dot(shift);
}

double QaChannelEvaluator::log_partition(double x_star,
                                         const Eigen::VectorXd& z) const {
  std::vector<double> s;
  scores(x_star, z, s);
  return log_sum_exp(s, trunc_.weights);
}

Eigen::VectorXd QaChannelEvaluator::posterior_mean(
    double x_star, const Eigen::VectorXd& z) const {
  std::vector<double> s;
  scores(x_star, z, s);
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double denom = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(trunc_.rank);
  for (std::size_t a = 0; a < s.size(); ++a) {
    const double w = trunc_.weights[a] * std::exp(s[a] - mx);
    denom += w;
    mean += w * trunc_.u_nodes.row(static_cast<int>(a)).transpose();
  }
  if (!(denom > 0.0))
    fail(ErrorCode::Internal, "qa posterior: normalization underflow");
  return mean / denom;
}

McValue psi_qa(const MercerTruncation& trunc, const Eigen::MatrixXd& q,
               const EstimatorConfig& cfg) {
  const QaChannelEvaluator eval(trunc, q, cfg);
  auto body = [&](std::int64_t lo, std::int64_t hi, MeanAccumulator& acc) {
    double x_star;
    Eigen::VectorXd z;
    for (std::int64_t i = lo; i < hi; ++i) {
      eval.draw(i, x_star, z);
      acc.add(eval.log_partition(x_star, z));
    }
  };
  const std::vector<MeanAccumulator> chunks =
      parallel_chunks<MeanAccumulator>(cfg.mc_samples, cfg.threads, body);
  MeanAccumulator total;
  for (const MeanAccumulator& c : chunks) total.merge(c);
  return {-0.25 * eval.overlap().squaredNorm() + total.mean(), total.stderr_of_mean(),
          total.count()};
}

QaStateMap qa_state_map(const MercerTruncation& trunc, const Eigen::MatrixXd& q,
                        const EstimatorConfig& cfg) {
  cfg.validate();
  const QaChannelEvaluator eval(trunc, q, cfg);
  struct Chunk {
    std::vector<MeanAccumulator> entries;
  };
  const int r = trunc.rank;
  auto body = [&](std::int64_t lo, std::int64_t hi, Chunk& chunk) {
    chunk.entries.resize(r * r);
    double x_star;
    Eigen::VectorXd z;
    for (std::int64_t i = lo; i < hi; ++i) {
      eval.draw(i, x_star, z);
      const Eigen::VectorXd mean = eval.posterior_mean(x_star, z);
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) chunk.entries[a * r + b].add(mean(a) * mean(b));
    }
  };
  const std::vector<Chunk> chunks =
      parallel_chunks<Chunk>(cfg.mc_samples, cfg.threads, body);
  std::vector<MeanAccumulator> entries(r * r);
  for (const Chunk& c : chunks)
    for (int e = 0; e < r * r; ++e) entries[e].merge(c.entries[e]);
  QaStateMap out;
  out.value.resize(r, r);
  double var = 0.0;
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      out.value(a, b) = entries[a * r + b].mean();
      const double se = entries[a * r + b].stderr_of_mean();
      var += se * se;
    }
  out.value = 0.5 * (out.value + out.value.transpose()).eval();
  out.frob_stderr = std::sqrt(var);
  return out;
}

QaSolveResult qa_solve(const MercerTruncation& trunc, const Eigen::MatrixXd& q0,
                       const QaSolverOptions& opt, const EstimatorConfig& cfg) {
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    fail(ErrorCode::InvalidInput, "damping must lie in (0, 1]");
  QaSolveResult out;
  Eigen::MatrixXd q = check_psd_square(q0, trunc.rank);
  for (int it = 1; it <= opt.max_iter; ++it) {
    const QaStateMap f = qa_state_map(trunc, q, cfg);
    out.residual = (q - f.value).norm();
    out.iterations = it;
    if (out.residual <= opt.tol) {
      out.converged = true;
      break;
    }
    q = check_psd_square(
        ((1.0 - opt.damping) * q + opt.damping * f.value).eval(), trunc.rank);
  }
  out.q_star = q;
  out.q_frob = q.norm();
  const McValue psi = psi_qa(trunc, q, cfg);
  out.psi_value = psi.value;
  out.psi_stderr = psi.stderr;
  return out;
}

QASolution qa_mi_mmse(const KernelSpec& kernel, const std::vector<int>& ranks,
                      const QaSolverOptions& opt, const EstimatorConfig& cfg,
                      double cauchy_tol) {
  if (ranks.empty()) fail(ErrorCode::InvalidInput, "rank schedule is empty");
  for (std::size_t i = 1; i < ranks.size(); ++i)
    if (ranks[i] <= ranks[i - 1])
      fail(ErrorCode::InvalidInput, "rank schedule must be increasing");
  QASolution sol;
  sol.kappa_second_moment = kernel_second_moment(kernel);
  Eigen::MatrixXd prev_best;
  double prev_psi = 0.0;
  for (std::size_t idx = 0; idx < ranks.size(); ++idx) {
    const int rank = ranks[idx];
    const int n_nodes =
        kernel.base == BaseMeasure::UniformInterval ? std::max(256, 4 * rank) : 0;
    const MercerTruncation trunc = mercer_truncate(kernel, rank, n_nodes);
    const int r = trunc.rank;
    std::vector<Eigen::MatrixXd> starts = {
        0.01 * Eigen::MatrixXd::Identity(r, r),
        Eigen::MatrixXd::Identity(r, r)};
    if (prev_best.rows() > 0 && prev_best.rows() <= r) {
      Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(r, r);
      padded.topLeftCorner(prev_best.rows(), prev_best.cols()) = prev_best;
      starts.push_back(padded);
    }
    QaSolveResult best;
    bool have = false;
    for (const Eigen::MatrixXd& q0 : starts) {
      const QaSolveResult res = qa_solve(trunc, q0, opt, cfg);
      if (!have || res.psi_value > best.psi_value ||
          (res.converged && !best.converged)) {
        best = res;
        have = true;
      }
    }
    // The padded previous maximizer is itself a candidate: Ψ at the padded
    // point equals the previous-rank value exactly (zero row/column), which
    // keeps the reported supremum nondecreasing in the rank.
    if (prev_best.rows() > 0 && prev_best.rows() <= r && prev_psi > best.psi_value) {
      Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(r, r);
      padded.topLeftCorner(prev_best.rows(), prev_best.cols()) = prev_best;
      const McValue psi = psi_qa(trunc, padded, cfg);
      if (psi.value > best.psi_value) {
        best.q_star = padded;
        best.q_frob = padded.norm();
        best.psi_value = psi.value;
        best.psi_stderr = psi.stderr;
        best.converged = false;
      }
    }
    sol.per_rank.push_back(
        {rank, best.psi_value, best.psi_stderr, best.q_frob, best.converged});
    if (idx + 1 == ranks.size() && idx > 0)
      sol.cauchy_gap = std::abs(best.psi_value - prev_psi);
    prev_best = best.q_star;
    prev_psi = best.psi_value;
    sol.psi_infinity = best.psi_value;
    sol.q_star = best.q_frob;
  }
  sol.extrapolation_reliable = ranks.size() < 2 || sol.cauchy_gap <= cauchy_tol;
  sol.mi_limit = 0.25 * sol.kappa_second_moment - sol.psi_infinity;
  sol.mmse_limit = sol.kappa_second_moment - sol.q_star * sol.q_star;
  return sol;
}

int QaInstance::pair_index(int i, int j) const {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

QaInstance generate_qa(int n, const KernelSpec& kernel, std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::InvalidInput, "generate_qa requires n >= 2");
  QaInstance inst;
  inst.n = n;
  inst.kernel = kernel;
  inst.seed = seed;
  Rng rng(mix_seed(seed, 0));
  inst.x.reserve(n);
  for (int i = 0; i < n; ++i) inst.x.push_back(kernel.sample(rng));
  inst.pi_star.resize(n);
  std::iota(inst.pi_star.begin(), inst.pi_star.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(i + 1));
    std::swap(inst.pi_star[i], inst.pi_star[j]);
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  inst.y.resize(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      inst.y[inst.pair_index(i, j)] =
          kernel.eval(inst.x[inst.pi_star[i]], inst.x[inst.pi_star[j]]) +
          root_n * rng.normal();
  return inst;
}

QaInstance make_qa_instance(const KernelSpec& kernel, std::vector<double> x,
                            std::vector<int> pi_star,
                            const std::vector<double>& z) {
  QaInstance inst;
  inst.n = static_cast<int>(x.size());
  if (inst.n < 1 || pi_star.size() != x.size())
    fail(ErrorCode::InvalidInput, "samples and permutation must match");
  inst.kernel = kernel;
  inst.x = std::move(x);
  inst.pi_star = std::move(pi_star);
  const double root_n = std::sqrt(static_cast<double>(inst.n));
  inst.y.resize(static_cast<std::size_t>(inst.n) * (inst.n - 1) / 2);
  if (z.size() != inst.y.size())
    fail(ErrorCode::InvalidInput, "noise vector has wrong length");
  for (int i = 0; i < inst.n; ++i)
    for (int j = i + 1; j < inst.n; ++j) {
      const int p = inst.pair_index(i, j);
      inst.y[p] = inst.kernel.eval(inst.x[inst.pi_star[i]],
                                   inst.x[inst.pi_star[j]]) +
                  root_n * z[p];
    }
  return inst;
}

double qa_hamiltonian(const QaInstance& instance, const std::vector<int>& pi) {
  if (static_cast<int>(pi.size()) != instance.n)
    fail(ErrorCode::InvalidInput, "permutation length must equal n");
  const int n = instance.n;
  double h = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double k = instance.kernel.eval(instance.x[pi[i]], instance.x[pi[j]]);
      h += (k * instance.y[instance.pair_index(i, j)] - 0.5 * k * k) / n;
    }
  return h;
}

QaExactFreeEnergy qa_exact_free_energy(const QaInstance& instance) {
  const int n = instance.n;
  if (n > 9)
    fail(ErrorCode::BudgetExceeded, "permutation enumeration requires n <= 9");
  // κ lookup and pairwise y tables.
  Eigen::MatrixXd kmat(n, n);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      kmat(a, c) = instance.kernel.eval(instance.x[a], instance.x[c]);

  std::vector<int> pi(n);
  std::iota(pi.begin(), pi.end(), 0);
  double log_count = 0.0;
  for (int i = 2; i <= n; ++i) log_count += std::log(static_cast<double>(i));

  double h_max = -std::numeric_limits<double>::infinity();
  std::vector<double> hams;
  std::vector<std::vector<int>> perms;
  do {
    double h = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double k = kmat(pi[i], pi[j]);
        h += (k * instance.y[instance.pair_index(i, j)] - 0.5 * k * k) / n;
      }
    hams.push_back(h);
    perms.push_back(pi);
    h_max = std::max(h_max, h);
  } while (std::next_permutation(pi.begin(), pi.end()));

  double z_sum = 0.0, h_sum = 0.0;
  Eigen::MatrixXd marginal = Eigen::MatrixXd::Zero(n, n);  // P(π(i) = a | Y)
  for (std::size_t p = 0; p < perms.size(); ++p) {
    const double w = std::exp(hams[p] - h_max);
    z_sum += w;
    h_sum += hams[p] * w;
    for (int i = 0; i < n; ++i) marginal(i, perms[p][i]) += w;
  }
  marginal /= z_sum;

  QaExactFreeEnergy out;
  out.free_energy = (h_max + std::log(z_sum) - log_count) / n;
  out.mean_hamiltonian = h_sum / z_sum;

  // Route A: two independent posterior copies through the assignment
  // marginals. Route B: re-enumerate the second copy as the conditional
  // truth; exact agreement is the Nishimori consistency check.
  double two_copy = 0.0;
  for (int i = 0; i < n; ++i)
    two_copy += (marginal.row(i) * kmat * marginal.row(i).transpose())(0) / n;
  Eigen::MatrixXd v = marginal * kmat;  // v(i, c) = Σ_a M_ia κ(x_a, x_c)
  double truth = 0.0;
  for (std::size_t p = 0; p < perms.size(); ++p) {
    const double w = std::exp(hams[p] - h_max) / z_sum;
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += v(i, perms[p][i]);
    truth += w * t / n;
  }
  out.two_copy_statistic = two_copy;
  out.truth_replica_statistic = truth;
  out.nishimori_gap = std::abs(two_copy - truth);
  return out;
}

}  // namespace replica_sync

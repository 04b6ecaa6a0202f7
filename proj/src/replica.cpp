#include "replica_sync/replica.hpp"

#include <algorithm>
#include <cmath>

#include "replica_sync/errors.hpp"
#include "replica_sync/parallel.hpp"

namespace replica_sync {

namespace {

double quadratic_terms(const std::vector<RepChannel>& channels,
                       const Overlap& q) {
  double acc = 0.0;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    acc += -0.25 * channels[l].snr * q.block(l).squaredNorm() -
           0.5 * channels[l].snr * q.block(l).trace();
  }
  return acc;
}

void finish_solution(const std::vector<RepChannel>& channels,
                     const EstimatorConfig& cfg, ReplicaSolution& sol) {
  const McValue psi = psi_gs(channels, sol.q_star, cfg);
  sol.psi_value = psi.value;
  sol.psi_stderr = psi.stderr;
  sol.mi_limit = 0.25 * snr_dim_sum(channels) - sol.psi_value;
  sol.mmse_limits.clear();
  for (std::size_t l = 0; l < channels.size(); ++l)
    sol.mmse_limits.push_back(channels[l].dim -
                              sol.q_star.block(l).squaredNorm());
}

bool signatures_close(const std::vector<double>& a,
                      const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

}  // namespace

McValue psi_gs(const std::vector<RepChannel>& channels, const Overlap& q,
               const EstimatorConfig& cfg) {
  const SingleLetterEvaluator eval(channels, q, cfg);
  auto body = [&](std::int64_t lo, std::int64_t hi, MeanAccumulator& acc) {
    for (std::int64_t m = lo; m < hi; ++m)
      acc.add(eval.log_partition(eval.draw(m)));
  };
  const std::vector<MeanAccumulator> chunks =
      parallel_chunks<MeanAccumulator>(cfg.mc_samples, cfg.threads, body);
  MeanAccumulator total;
  for (const MeanAccumulator& c : chunks) total.merge(c);
  return {quadratic_terms(channels, q) + total.mean(), total.stderr_of_mean(),
          total.count()};
}

std::vector<Eigen::MatrixXd> grad_psi(const std::vector<RepChannel>& channels,
                                      const Overlap& q,
                                      const EstimatorConfig& cfg) {
  const StateMapResult f = state_map(channels, q, cfg);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(channels.size());
  for (std::size_t l = 0; l < channels.size(); ++l)
    out.push_back(Eigen::MatrixXd(-0.5 * channels[l].snr *
                                  (q.block(l) - f.value.block(l))));
  return out;
}

HessianReport hessian_at_zero(const std::vector<RepChannel>& channels,
                              const std::vector<RepClassification>& cls) {
  if (channels.size() != cls.size())
    fail(ErrorCode::InvalidInput, "one classification per channel required");
  HessianReport report;
  double max_eff = 0.0;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    if (cls[l].type == RepType::Indeterminate)
      fail(ErrorCode::ClassificationNeeded,
           "hessian_at_zero requires a determinate representation type");
    const double rho = cls[l].type == RepType::RealType      ? 1.0
                       : cls[l].type == RepType::ComplexType ? 2.0
                                                             : 4.0;
    const double lambda = channels[l].snr;
    const double k = channels[l].dim;
    report.block_max_eigs.push_back((-lambda * k + lambda * lambda * rho) /
                                    (2.0 * k));
    const double eff = lambda * rho / k;
    report.effective_snrs.push_back(eff);
    max_eff = std::max(max_eff, eff);
  }
  report.stable_at_zero = max_eff < 1.0;
  return report;
}

ReplicaSolution solve_fixed_point(const std::vector<RepChannel>& channels,
                                  const Overlap& q0,
                                  const FixedPointSolverOptions& opt,
                                  const EstimatorConfig& cfg) {
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    fail(ErrorCode::InvalidInput, "damping must lie in (0, 1]");
  if (!(opt.tol > 0.0)) fail(ErrorCode::InvalidInput, "tol must be positive");
  ReplicaSolution sol;
  Overlap q = q0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const StateMapResult f = state_map(channels, q, cfg);
    sol.residual = max_block_distance(q, f.value);
    sol.iterations = it;
    if (sol.residual <= opt.tol) {
      sol.converged = true;
      break;
    }
    q = damped_mix(q, f.value, opt.damping);
  }
  sol.q_star = q;
  finish_solution(channels, cfg, sol);
  return sol;
}

ReplicaSolution so2_solve(double lambda) {
  if (!(lambda > 0.0)) fail(ErrorCode::InvalidInput, "lambda must be positive");
  const std::vector<RepChannel> channels = {so2_harmonic_channel(1, lambda)};
  ReplicaSolution sol;
  sol.converged = true;
  double q_star = 0.0;
  if (lambda > 1.0) {
    // q = F(λq) has a unique positive root; F is increasing and concave.
    double lo = 1e-8, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (so2_state_scalar(lambda * mid) - mid > 0.0)
        lo = mid;
      else
        hi = mid;
      ++sol.iterations;
    }
    q_star = 0.5 * (lo + hi);
  }
  sol.residual = std::abs(so2_state_scalar(lambda * q_star) - q_star);
  sol.q_star = Overlap::identity(channels, q_star);
  sol.psi_value = so2_psi_scalar(lambda, q_star);
  sol.psi_stderr = 0.0;
  sol.mi_limit = 0.5 * lambda - sol.psi_value;
  sol.mmse_limits = {2.0 - 2.0 * q_star * q_star};
  return sol;
}

RankOneBranchResult sok_rank_one_branch(int k, double lambda,
                                        const FixedPointSolverOptions& opt,
                                        const EstimatorConfig& cfg) {
  if (k < 3) fail(ErrorCode::InvalidInput, "rank-one branch requires k >= 3");
  const std::vector<RepChannel> channels = {sok_standard_channel(k, lambda)};
  auto scalar_point = [&](double q) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    b(0, 0) = q;
    return Overlap({b});
  };
  // f11(q): entry (1,1) of the state map at diag(q, 0, ..., 0). The slope at
  // the origin comes from a paired Richardson difference
  // 2 (f(h/2) - f(0)) / (h/2) ... - (f(h) - f(0)) / h, which cancels the
  // O(h) curvature term; pairing the draws cancels the shared inner-MC bias.
  const double h = 0.03;
  const SingleLetterEvaluator at_h(channels, scalar_point(h), cfg);
  const SingleLetterEvaluator at_half(channels, scalar_point(0.5 * h), cfg);
  const SingleLetterEvaluator at_0(channels, Overlap::zero(channels), cfg);
  auto body = [&](std::int64_t lo, std::int64_t hi, MeanAccumulator& acc) {
    for (std::int64_t m = lo; m < hi; ++m) {
      const double f_h =
          at_h.posterior_mean(at_h.draw(m))[0].col(0).squaredNorm();
      const double f_half =
          at_half.posterior_mean(at_half.draw(m))[0].col(0).squaredNorm();
      const double f_0 =
          at_0.posterior_mean(at_0.draw(m))[0].col(0).squaredNorm();
      acc.add(2.0 * (f_half - f_0) / (0.5 * h) - (f_h - f_0) / h);
    }
  };
  const std::vector<MeanAccumulator> chunks =
      parallel_chunks<MeanAccumulator>(cfg.mc_samples, cfg.threads, body);
  MeanAccumulator slope;
  for (const MeanAccumulator& c : chunks) slope.merge(c);

  RankOneBranchResult out;
  out.slope_at_zero = slope.mean();
  out.slope_stderr = slope.stderr_of_mean();

  double q = 0.5;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const StateMapResult f = state_map(channels, scalar_point(q), cfg);
    const double f11 = f.value.block(0)(0, 0);
    out.residual = std::abs(f11 - q);
    out.iterations = it;
    if (out.residual <= opt.tol) {
      out.converged = true;
      break;
    }
    q = (1.0 - opt.damping) * q + opt.damping * f11;
  }
  out.q_star = q;
  return out;
}

AbelianDiagonalReport abelian_diagonal_check(
    const std::vector<RepChannel>& channels, const Overlap& q, double tol) {
  if (channels.empty() || !channels.front().group.abelian())
    fail(ErrorCode::Inapplicable,
         "diagonal reduction applies to abelian groups only");
  if (!q.matches_channels(channels))
    fail(ErrorCode::InvalidInput, "overlap does not match channel list");
  AbelianDiagonalReport report;
  report.threshold = 10.0 * tol;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    const Eigen::MatrixXd& b = q.block(l);
    const double mean_eig = b.trace() / channels[l].dim;
    const double dev =
        (b - mean_eig * Eigen::MatrixXd::Identity(b.rows(), b.cols())).norm();
    report.deviations.push_back(dev);
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  report.ok = report.max_deviation <= report.threshold;
  return report;
}

LandscapeScanResult landscape_scan(const std::vector<RepChannel>& channels,
                                   int n_starts,
                                   const FixedPointSolverOptions& opt,
                                   const EstimatorConfig& cfg) {
  if (n_starts < 1) fail(ErrorCode::InvalidInput, "n_starts must be >= 1");
  std::vector<std::pair<std::string, Overlap>> starts;
  starts.emplace_back("zero", Overlap::zero(channels));
  if (n_starts >= 2) starts.emplace_back("identity", Overlap::identity(channels));
  for (int s = 2; s < n_starts; ++s) {
    Rng rng(mix_seed(cfg.seed, 0x5CA1AB1EULL + s));
    starts.emplace_back("random", Overlap::random_psd(channels, rng));
  }

  std::vector<ReplicaSolution> solutions(starts.size());
  auto body = [&](std::int64_t lo, std::int64_t hi, int& /*unused*/) {
    for (std::int64_t s = lo; s < hi; ++s)
      solutions[s] = solve_fixed_point(channels, starts[s].second, opt, cfg);
  };
  parallel_chunks<int>(static_cast<std::int64_t>(starts.size()),
                       std::min<int>(cfg.threads, static_cast<int>(starts.size())),
                       body, 1);

  LandscapeScanResult result;
  const double dedup_tol = 10.0 * opt.tol;
  // Converged solutions beat unconverged ones; ties break on Ψ, then on
  // start order.
  auto better = [](const ReplicaSolution& a, const ReplicaSolution& b) {
    if (a.converged != b.converged) return a.converged;
    return a.psi_value > b.psi_value;
  };
  std::size_t best_index = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const ReplicaSolution& sol = solutions[s];
    ScanStartRecord rec;
    rec.kind = starts[s].first;
    rec.converged = sol.converged;
    rec.psi = sol.psi_value;
    rec.residual = sol.residual;
    rec.signature = sol.q_star.eigen_signature();
    result.starts.push_back(rec);
    if (sol.converged) {
      bool found = false;
      for (ScanFixedPoint& fp : result.distinct) {
        if (signatures_close(fp.signature, rec.signature, dedup_tol)) {
          ++fp.hits;
          found = true;
          break;
        }
      }
      if (!found)
        result.distinct.push_back(
            {sol.q_star, rec.signature, sol.psi_value, 1});
    }
    if (s > 0 && better(sol, solutions[best_index])) best_index = s;
  }
  result.best = solutions[best_index];
  return result;
}

}  // namespace replica_sync

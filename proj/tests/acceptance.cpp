// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Pass the CLI binary path as argv[1] to enable the
// reproducibility criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "replica_sync/finite_model.hpp"
#include "replica_sync/parallel.hpp"
#include "replica_sync/quad_assign.hpp"
#include "replica_sync/replica.hpp"

namespace rs = replica_sync;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

#define REQUIRE_NEAR(out, value, target, tol, label)                        \
  do {                                                                      \
    const double v_ = (value), t_ = (target), e_ = (tol);                   \
    if (!(std::abs(v_ - t_) <= e_)) {                                       \
      (out).pass = false;                                                   \
      (out).detail << " [" << (label) << ": " << v_ << " vs " << t_         \
                   << " tol " << e_ << "]";                                 \
    }                                                                       \
  } while (0)

#define REQUIRE_TRUE(out, cond, label)                  \
  do {                                                  \
    if (!(cond)) {                                      \
      (out).pass = false;                               \
      (out).detail << " [failed: " << (label) << "]";   \
    }                                                   \
  } while (0)

int g_threads = rs::hardware_threads();

rs::EstimatorConfig estimator(std::uint64_t seed, long mc, int inner = 256,
                              bool antithetic = false) {
  rs::EstimatorConfig cfg;
  cfg.seed = seed;
  cfg.mc_samples = mc;
  cfg.inner_resolution = inner;
  cfg.antithetic = antithetic;
  cfg.threads = g_threads;
  return cfg;
}

// --- criterion 1: SO(2) phase transition -----------------------------------

Outcome so2_phase_transition() {
  Outcome out;
  for (double lambda : {0.25, 0.5, 0.75, 1.0}) {
    const rs::ReplicaSolution sol = rs::so2_solve(lambda);
    REQUIRE_TRUE(out, sol.q_star.frobenius_norm() <= 1e-6, "q* = 0 below threshold");
    REQUIRE_TRUE(out, sol.mi_limit == 0.5 * lambda, "MI = lambda/2 exactly");
    REQUIRE_TRUE(out, sol.mmse_limits[0] == 2.0, "MMSE = 2 below threshold");
  }
  double prev_q = 0.0, prev_mmse = 2.0;
  for (double lambda : {1.25, 1.5, 2.0, 3.0, 4.0, 6.0}) {
    const rs::ReplicaSolution sol = rs::so2_solve(lambda);
    const double q = sol.q_star.block(0)(0, 0);
    REQUIRE_TRUE(out, q > 0.0, "positive root above threshold");
    REQUIRE_TRUE(out, sol.residual <= 1e-10, "bisection residual");
    REQUIRE_TRUE(out, q > prev_q, "q* strictly increasing");
    REQUIRE_TRUE(out, sol.mmse_limits[0] < prev_mmse, "MMSE strictly decreasing");
    prev_q = q;
    prev_mmse = sol.mmse_limits[0];
  }
  return out;
}

// --- criterion 2: Bessel channel properties ---------------------------------

Outcome bessel_channel() {
  Outcome out;
  REQUIRE_TRUE(out, rs::so2_state_scalar(0.0) == 0.0, "F(0) = 0 exactly");
  const double h = 1e-5;
  const double slope = (rs::so2_state_scalar(2.0 * h) - rs::so2_state_scalar(0.0)) /
                       (2.0 * h);
  REQUIRE_NEAR(out, slope, 1.0, 1e-3, "F'(0)");
  double worst = -1e9;
  for (double g = 0.1; g + 0.2 <= 10.0 + 1e-12; g += 0.1) {
    const double d2 = rs::so2_state_scalar(g + 0.2) -
                      2.0 * rs::so2_state_scalar(g + 0.1) +
                      rs::so2_state_scalar(g);
    worst = std::max(worst, d2);
  }
  REQUIRE_TRUE(out, worst <= 1e-4, "second differences nonpositive");
  out.detail << " F'(0)=" << slope << " max_d2=" << worst;
  return out;
}

// --- criterion 3: threshold table -------------------------------------------

Outcome threshold_table() {
  Outcome out;
  struct Row {
    rs::RepChannel channel;
    double rho;
    double lambda_c;
  };
  std::vector<Row> rows = {{rs::so2_harmonic_channel(1, 1.0), 2.0, 1.0},
                           {rs::sok_standard_channel(3, 1.0), 1.0, 3.0},
                           {rs::sok_standard_channel(5, 1.0), 1.0, 5.0},
                           {rs::symmetric_standard_channel(5, 1.0), 1.0, 4.0}};
  for (int l = 1; l <= 3; ++l)
    rows.push_back({rs::cyclic_plane_channel(7, l, 1.0), 2.0, 1.0});
  for (const Row& row : rows) {
    rs::Rng rng(17);
    const rs::RepClassification cls = rs::classify(row.channel, 1000000, rng);
    const double tol = std::max(3.0 * cls.rho_stderr, 1e-9);
    REQUIRE_NEAR(out, cls.rho, row.rho, tol, row.channel.describe() + " rho");
    REQUIRE_TRUE(out, cls.threshold == row.lambda_c,
                 row.channel.describe() + " lambda_c");
    REQUIRE_TRUE(out, cls.type != rs::RepType::Indeterminate,
                 row.channel.describe() + " determinate");
    // exact closed-form sign flip around the threshold
    rs::RepChannel below = row.channel, above = row.channel;
    below.snr = 0.9 * row.lambda_c;
    above.snr = 1.1 * row.lambda_c;
    REQUIRE_TRUE(out, rs::hessian_at_zero({below}, {cls}).block_max_eigs[0] < 0.0,
                 row.channel.describe() + " stable below");
    REQUIRE_TRUE(out, rs::hessian_at_zero({above}, {cls}).block_max_eigs[0] > 0.0,
                 row.channel.describe() + " unstable above");
  }
  return out;
}

// --- criterion 4: gradient correctness --------------------------------------

Eigen::MatrixXd interior_psd_point(int k, rs::Rng& rng) {
  Eigen::MatrixXd a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd b = a.transpose() * a;
  b /= b.trace();  // eigenvalues in [0, 1], summing to 1
  return 0.2 * Eigen::MatrixXd::Identity(k, k) + 0.6 * b;
}

Outcome gradient_correctness() {
  Outcome out;
  struct Model {
    rs::RepChannel channel;
    long mc;
  };
  const std::vector<Model> models = {{rs::so2_harmonic_channel(1, 2.0), 30000},
                                     {rs::sok_standard_channel(3, 4.0), 10000},
                                     {rs::cyclic_plane_channel(5, 1, 2.0), 60000},
                                     {rs::symmetric_standard_channel(5, 3.0), 20000},
                                     {rs::z2_channel(1.5), 60000}};
  rs::Rng rng(23);
  const double delta = 0.02;
  for (const Model& model : models) {
    const std::vector<rs::RepChannel> channels = {model.channel};
    const int k = model.channel.dim;
    const double lambda = model.channel.snr;
    const rs::EstimatorConfig cfg = estimator(29, model.mc);
    for (int point = 0; point < 5; ++point) {
      const rs::Overlap q({interior_psd_point(k, rng)});
      std::vector<Eigen::MatrixXd> dirs;
      for (int d = 0; d < 3; ++d) {
        Eigen::MatrixXd x(k, k);
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) x(i, j) = rng.normal();
        x = 0.5 * (x + x.transpose()).eval();
        dirs.push_back(x / x.norm());
      }
      // paired pass: posterior gram at q plus log-partitions at q ± δx
      const rs::SingleLetterEvaluator at_q(channels, q, cfg);
      std::vector<rs::SingleLetterEvaluator> plus, minus;
      for (const Eigen::MatrixXd& x : dirs) {
        plus.emplace_back(channels,
                          rs::Overlap({Eigen::MatrixXd(q.block(0) + delta * x)}),
                          cfg);
        minus.emplace_back(channels,
                           rs::Overlap({Eigen::MatrixXd(q.block(0) - delta * x)}),
                           cfg);
      }
      struct Chunk {
        std::vector<rs::MeanAccumulator> gram_proj, fd_diff;
      };
      auto body = [&](std::int64_t lo, std::int64_t hi, Chunk& chunk) {
        chunk.gram_proj.resize(dirs.size());
        chunk.fd_diff.resize(dirs.size());
        for (std::int64_t m = lo; m < hi; ++m) {
          const rs::SingleLetterDraw d_q = at_q.draw(m);
          const Eigen::MatrixXd pm = at_q.posterior_mean(d_q)[0];
          const Eigen::MatrixXd gram = pm.transpose() * pm;
          for (std::size_t d = 0; d < dirs.size(); ++d) {
            chunk.gram_proj[d].add(gram.cwiseProduct(dirs[d]).sum());
            chunk.fd_diff[d].add(
                plus[d].log_partition(plus[d].draw(m)) -
                minus[d].log_partition(minus[d].draw(m)));
          }
        }
      };
      const std::vector<Chunk> chunks =
          rs::parallel_chunks<Chunk>(cfg.mc_samples, cfg.threads, body);
      for (std::size_t d = 0; d < dirs.size(); ++d) {
        rs::MeanAccumulator gram_proj, fd_diff;
        for (const Chunk& c : chunks) {
          gram_proj.merge(c.gram_proj[d]);
          fd_diff.merge(c.fd_diff[d]);
        }
        const double analytic =
            -0.5 * lambda *
            (q.block(0).cwiseProduct(dirs[d]).sum() - gram_proj.mean());
        const double analytic_se = 0.5 * lambda * gram_proj.stderr_of_mean();
        auto quadratic = [&](double sign) {
          const Eigen::MatrixXd qq = q.block(0) + sign * delta * dirs[d];
          return -0.25 * lambda * qq.squaredNorm() - 0.5 * lambda * qq.trace();
        };
        const double fd =
            (quadratic(1.0) - quadratic(-1.0) + fd_diff.mean()) / (2.0 * delta);
        const double fd_se = fd_diff.stderr_of_mean() / (2.0 * delta);
        REQUIRE_NEAR(out, analytic, fd,
                     std::max(1e-3, 4.0 * (analytic_se + fd_se)),
                     model.channel.describe() + " point " +
                         std::to_string(point) + " dir " + std::to_string(d));
      }
    }
  }
  return out;
}

// --- criterion 5: Z2 oracle equivalence -------------------------------------

Outcome z2_oracle_equivalence() {
  Outcome out;
  for (double lambda : {1.5, 2.0, 3.0}) {
    const std::vector<rs::RepChannel> channels = {rs::z2_channel(lambda)};
    const rs::EstimatorConfig cfg = estimator(31, 2000000, 256, true);
    const rs::ReplicaSolution sol = rs::solve_fixed_point(
        channels, rs::Overlap::identity(channels, 0.5),
        rs::FixedPointSolverOptions{0.5, 4e-4, 400}, cfg);
    const double oracle = oracles::z2_fixed_point(lambda);
    REQUIRE_TRUE(out, sol.converged, "Z2 solve converged");
    REQUIRE_NEAR(out, sol.q_star.block(0)(0, 0), oracle, 1e-3,
                 "Z2 q* at lambda=" + std::to_string(lambda));
    out.detail << " q*(" << lambda << ")=" << sol.q_star.block(0)(0, 0);
  }
  return out;
}

// --- criterion 6: exact enumeration vs replica ------------------------------

Outcome enumeration_vs_replica() {
  Outcome out;
  const double lambda = 2.0;
  const std::vector<rs::RepChannel> channels = {rs::z2_channel(lambda)};
  const double sup_psi =
      oracles::z2_psi(lambda, oracles::z2_fixed_point(lambda));
  // Disorder-averaged |F_N - sup Psi| over a shared (nested) seed family;
  // the replica-consistency diagnostics run on the first 32 draws.
  const int draws = 256, diag_draws = 32;
  double prev_gap = 1e18;
  double final_gap = 0.0;
  double worst_nishimori = 0.0;
  for (int n : {8, 12, 16, 20}) {
    std::vector<double> gap_fe(draws), gap_nish(diag_draws);
    auto body = [&](std::int64_t lo, std::int64_t hi, int&) {
      for (std::int64_t d = lo; d < hi; ++d) {
        const rs::ExactFreeEnergyResult res = rs::exact_free_energy(
            rs::generate_sync(n, channels, 1000 + d), d < diag_draws);
        gap_fe[d] = std::abs(res.free_energy - sup_psi);
        if (d < diag_draws) gap_nish[d] = res.nishimori_gap;
      }
    };
    rs::parallel_chunks<int>(draws, g_threads, body, 1);
    rs::MeanAccumulator acc;
    for (int d = 0; d < draws; ++d) acc.add(gap_fe[d]);
    for (int d = 0; d < diag_draws; ++d)
      worst_nishimori = std::max(worst_nishimori, gap_nish[d]);
    const double gap = acc.mean();
    out.detail << " gap(N=" << n << ")=" << gap;
    REQUIRE_TRUE(out, gap < prev_gap, "gap shrinks at N=" + std::to_string(n));
    prev_gap = gap;
    final_gap = gap;
  }
  REQUIRE_TRUE(out, final_gap <= 0.5 / std::sqrt(20.0), "final gap bound");
  REQUIRE_TRUE(out, worst_nishimori <= 1e-10, "Nishimori gap exact");
  out.detail << " worst_nishimori=" << worst_nishimori;
  return out;
}

// --- criterion 7: finite-N overlap concentration ----------------------------

Outcome overlap_concentration() {
  Outcome out;
  const int n = 200, seeds = 20;
  const int burn_in = 2000, samples = 2000, thinning = 5;

  // subcritical: lambda = 0.5
  {
    const std::vector<rs::RepChannel> channels = {rs::so2_harmonic_channel(1, 0.5)};
    std::vector<double> sqnorm(seeds);
    auto body = [&](std::int64_t lo, std::int64_t hi, int&) {
      for (std::int64_t s = lo; s < hi; ++s) {
        const rs::SyncInstance inst = rs::generate_sync(n, channels, 7000 + s);
        rs::GibbsChain chain(inst, rs::mix_seed(7000 + s, 1));
        sqnorm[s] =
            rs::measure(inst, chain, burn_in, samples, thinning).overlap_sqnorm[0];
      }
    };
    rs::parallel_chunks<int>(seeds, g_threads, body, 1);
    int ok = 0;
    double worst = 0.0;
    for (double v : sqnorm) {
      if (v <= 0.4) ++ok;
      worst = std::max(worst, v);
    }
    out.detail << " subcritical_ok=" << ok << "/" << seeds << " max=" << worst;
    REQUIRE_TRUE(out, ok >= 18, "subcritical overlap small in >= 90% of seeds");
  }

  // supercritical: lambda = 4
  {
    const double lambda = 4.0;
    const std::vector<rs::RepChannel> channels = {rs::so2_harmonic_channel(1, lambda)};
    const rs::ReplicaSolution scalar = rs::so2_solve(lambda);
    const double q = scalar.q_star.block(0)(0, 0);
    const double mmse_limit = 2.0 - 2.0 * q * q;
    std::vector<double> orbit(seeds), mmse(seeds);
    auto body = [&](std::int64_t lo, std::int64_t hi, int&) {
      for (std::int64_t s = lo; s < hi; ++s) {
        const rs::SyncInstance inst = rs::generate_sync(n, channels, 9000 + s);
        rs::GibbsChain chain(inst, rs::mix_seed(9000 + s, 1));
        const rs::DiagnosticsReport rep = rs::measure(
            inst, chain, burn_in, samples, thinning, scalar.q_star);
        orbit[s] = rep.orbit_distance;
        mmse[s] = rep.matrix_mmse[0];
      }
    };
    rs::parallel_chunks<int>(seeds, g_threads, body, 1);
    int orbit_ok = 0, mmse_ok = 0;
    double worst_orbit = 0.0, worst_mmse_err = 0.0;
    for (int s = 0; s < seeds; ++s) {
      if (orbit[s] <= 0.1) ++orbit_ok;
      if (std::abs(mmse[s] - mmse_limit) <= 0.15) ++mmse_ok;
      worst_orbit = std::max(worst_orbit, orbit[s]);
      worst_mmse_err = std::max(worst_mmse_err, std::abs(mmse[s] - mmse_limit));
    }
    out.detail << " orbit_ok=" << orbit_ok << "/" << seeds
               << " max_orbit=" << worst_orbit << " mmse_ok=" << mmse_ok << "/"
               << seeds << " max_mmse_err=" << worst_mmse_err
               << " target_mmse=" << mmse_limit;
    REQUIRE_TRUE(out, orbit_ok >= 18, "orbit distance <= 0.1 in >= 90% of seeds");
    REQUIRE_TRUE(out, mmse_ok >= 18, "matrix MMSE near 2 - 2q*^2 in >= 90%");
  }
  return out;
}

// --- criterion 8: SO(k) rank-one branch -------------------------------------

Outcome sok_branch() {
  Outcome out;
  for (int k : {3, 4}) {
    for (double lambda_factor : {0.5, 2.0}) {
      const double lambda = lambda_factor * k;
      // the finer inner ensemble keeps the q = 0 inner-MC bias floor of the
      // damped iteration well below the 1e-2 sub-threshold bound
      const rs::EstimatorConfig cfg = estimator(37, 60000, 1024);
      const rs::RankOneBranchResult res = rs::sok_rank_one_branch(
          k, lambda, rs::FixedPointSolverOptions{0.5, 1e-3, 200}, cfg);
      REQUIRE_NEAR(out, res.slope_at_zero, lambda / k,
                   std::max(0.02, 4.0 * res.slope_stderr),
                   "slope k=" + std::to_string(k) + " lambda=" +
                       std::to_string(lambda));
      if (lambda_factor > 1.0) {
        REQUIRE_TRUE(out, res.q_star > 0.1,
                     "positive fixed point at lambda=2k, k=" + std::to_string(k));
      } else {
        REQUIRE_TRUE(out, res.q_star <= 1e-2,
                     "no fixed point at lambda=k/2, k=" + std::to_string(k));
      }
      out.detail << " (k=" << k << ",lam=" << lambda
                 << ") slope=" << res.slope_at_zero << " q*=" << res.q_star;
    }
  }
  return out;
}

// --- criterion 9: QA-Z2 equivalence -----------------------------------------

Outcome qa_z2_equivalence() {
  Outcome out;
  const double lambda = 2.0;
  const rs::KernelSpec kernel = rs::KernelSpec::rank_one(std::sqrt(lambda));
  const rs::MercerTruncation trunc = rs::mercer_truncate(kernel, 1, 0);
  const rs::EstimatorConfig cfg = estimator(41, 4000000, 64, true);
  const rs::QaSolveResult sol = rs::qa_solve(
      trunc, Eigen::MatrixXd::Identity(1, 1),
      rs::QaSolverOptions{0.5, 4e-4, 400}, cfg);
  const double p = oracles::z2_fixed_point(lambda);
  const double psi_oracle = oracles::z2_psi(lambda, p);
  REQUIRE_TRUE(out, sol.converged, "qa solve converged");
  REQUIRE_NEAR(out, sol.psi_value, psi_oracle,
               std::max(1e-3, 3.0 * sol.psi_stderr), "psi vs Z2 oracle");
  REQUIRE_NEAR(out, sol.q_star(0, 0), std::sqrt(lambda) * p, 1e-3,
               "q* vs sqrt(lambda) p*");
  const double e_kappa2 = rs::kernel_second_moment(kernel);
  REQUIRE_NEAR(out, e_kappa2, lambda, 1e-10, "E[kappa^2]");
  const double mi = 0.25 * e_kappa2 - sol.psi_value;
  const double mi_oracle = 0.25 * lambda - psi_oracle;
  REQUIRE_NEAR(out, mi, mi_oracle, std::max(1e-3, 3.0 * sol.psi_stderr),
               "mi vs Z2 oracle");
  out.detail << " psi=" << sol.psi_value << " q*=" << sol.q_star(0, 0)
             << " mi=" << mi;
  return out;
}

// --- criterion 10: QA truncation monotonicity -------------------------------

Outcome qa_truncation() {
  Outcome out;
  const rs::KernelSpec kernel = rs::KernelSpec::gaussian_rbf(1.0, 2.0);
  const rs::EstimatorConfig cfg = estimator(43, 15000, 64);
  const rs::QASolution sol = rs::qa_mi_mmse(
      kernel, {1, 2, 3, 4, 5, 6}, rs::QaSolverOptions{0.5, 2e-3, 120}, cfg);
  for (std::size_t i = 1; i < sol.per_rank.size(); ++i)
    REQUIRE_TRUE(out, sol.per_rank[i].psi >= sol.per_rank[i - 1].psi - 1e-12,
                 "sup psi nondecreasing at L=" + std::to_string(i + 1));
  REQUIRE_TRUE(out, sol.cauchy_gap < 1e-3, "Cauchy gap at L=6");
  out.detail << " cauchy_gap=" << sol.cauchy_gap << " psi_inf=" << sol.psi_infinity;
  // trace identity: diagonal deficit equals the dropped spectrum
  const rs::MercerTruncation full = rs::mercer_truncate(kernel, 24, 256);
  for (int rank : {1, 2, 3, 4, 5, 6}) {
    const rs::MercerTruncation t = rs::mercer_truncate(kernel, rank, 256);
    double dropped = 0.0;
    for (int l = rank; l < full.rank; ++l) dropped += full.mu(l);
    REQUIRE_NEAR(out, t.trace_residual, dropped, 1e-6,
                 "trace identity at L=" + std::to_string(rank));
  }
  return out;
}

// --- criterion 11: CLI reproducibility --------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_reproducibility(const std::string& cli) {
  Outcome out;
  if (cli.empty()) {
    out.pass = false;
    out.detail << " [CLI path not supplied]";
    return out;
  }
  const std::vector<std::string> commands = {
      " so2 --lambda 0.5,1.25,4 --out {out}",
      " classify --group cyclic --k 5 --harmonic 2 --samples 20000 --seed 5 --out {out}",
      " solve --group z2 --snr 2 --mc-samples 4000 --tol 0.005 --seed 3 --threads 2 --out {out}",
      " exact-fe --group z2 --snr 2 --n 8 --draws 3 --seed 4 --out {out}",
      " qa-mi --kernel rank_one --scale 1.2 --ranks 1 --mc-samples 2000 --seed 9 --out {out}"};
  int index = 0;
  for (const std::string& tmpl : commands) {
    const std::string out_a = "acc_repro_" + std::to_string(index) + "_a.csv";
    const std::string out_b = "acc_repro_" + std::to_string(index) + "_b.csv";
    for (const std::string& path : {out_a, out_b}) {
      std::string cmd = cli + tmpl + " > /dev/null";
      const std::size_t pos = cmd.find("{out}");
      cmd.replace(pos, 5, path);
      const int rc = std::system(cmd.c_str());
      REQUIRE_TRUE(out, rc == 0, "command " + std::to_string(index) + " runs");
    }
    const std::string a = read_file(out_a), b = read_file(out_b);
    REQUIRE_TRUE(out, !a.empty() && a == b,
                 "byte-identical rerun of command " + std::to_string(index));
    std::remove(out_a.c_str());
    std::remove(out_b.c_str());
    ++index;
  }
  return out;
}

int run_all(const std::string& cli) {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "SO(2) phase transition", 5.0, so2_phase_transition},
      {2, "Bessel channel properties", 10.0, bessel_channel},
      {3, "threshold table", 60.0, threshold_table},
      {4, "gradient correctness", 300.0, gradient_correctness},
      {5, "Z2 oracle equivalence", 600.0, z2_oracle_equivalence},
      {6, "exact enumeration vs replica", 600.0, enumeration_vs_replica},
      {7, "finite-N overlap concentration", 1800.0, overlap_concentration},
      {8, "SO(k) rank-one branch", 600.0, sok_branch},
      {9, "QA-Z2 equivalence", 600.0, qa_z2_equivalence},
      {10, "QA truncation monotonicity", 600.0, qa_truncation},
      {11, "CLI reproducibility", 600.0,
       [&cli] { return cli_reproducibility(cli); }},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (seconds > c.budget_seconds) {
      out.pass = false;
      out.detail << " [runtime " << seconds << "s over the " << c.budget_seconds
                 << "s budget]";
    }
    std::printf("%s  criterion %2d: %s (%.1fs)%s\n", out.pass ? "PASS" : "FAIL",
                c.id, c.name, seconds, out.detail.str().c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  if (argc > 1) cli = argv[1];
  return run_all(cli);
}

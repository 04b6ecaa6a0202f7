// replica-sync: replica predictions, finite-N experiments, and kernel
// quadratic assignment from one command line.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "replica_sync/config.hpp"
#include "replica_sync/errors.hpp"
#include "replica_sync/finite_model.hpp"
#include "replica_sync/parallel.hpp"
#include "replica_sync/replica.hpp"

namespace rs = replica_sync;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNotConverged = 3;

class RecordWriter {
 public:
  json& new_row() {
    rows_.push_back(json::object());
    return rows_.back();
  }

  void write(const std::string& path, const std::string& format) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) rs::fail(rs::ErrorCode::InvalidInput, "cannot write " + path);
    if (format == "json") {
      os << json(rows_).dump(2) << "\n";
      return;
    }
    if (rows_.empty()) return;
    bool first = true;
    for (const auto& item : rows_.front().items()) {
      os << (first ? "" : ",") << item.key();
      first = false;
    }
    os << "\n";
    for (const json& row : rows_) {
      first = true;
      for (const auto& item : row.items()) {
        os << (first ? "" : ",");
        first = false;
        if (item.value().is_number_float())
          os << rs::format_double(item.value().get<double>());
        else if (item.value().is_string())
          os << item.value().get<std::string>();
        else
          os << item.value().dump();
      }
      os << "\n";
    }
  }

  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<json> rows_;
};

void stamp(json& row, const rs::RunConfig& cfg) {
  row["seed"] = static_cast<std::uint64_t>(cfg.estimator.seed);
  row["mc_samples"] = cfg.estimator.mc_samples;
  row["version"] = rs::version_string();
}

int default_threads() {
  if (const char* env = std::getenv("REPLICA_SYNC_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return rs::hardware_threads();
}

struct ChannelFlags {
  std::string group;
  int k = 0;
  int harmonic = 1;
  double snr = 1.0;
};

rs::RepChannel channel_from_flags(const ChannelFlags& f) {
  if (f.group == "so2") return rs::so2_harmonic_channel(f.harmonic, f.snr);
  if (f.group == "sok") return rs::sok_standard_channel(f.k, f.snr);
  if (f.group == "cyclic") return rs::cyclic_plane_channel(f.k, f.harmonic, f.snr);
  if (f.group == "sym" || f.group == "symmetric")
    return rs::symmetric_standard_channel(f.k, f.snr);
  if (f.group == "z2") return rs::z2_channel(f.snr);
  rs::fail(rs::ErrorCode::InvalidInput,
           "unknown --group '" + f.group + "' (so2|sok|cyclic|sym|z2)");
}

std::vector<rs::RepChannel> resolve_channels(const rs::RunConfig& cfg,
                                             const ChannelFlags& flags,
                                             bool group_given) {
  if (group_given) return {channel_from_flags(flags)};
  if (!cfg.channels.empty()) return cfg.channels;
  rs::fail(rs::ErrorCode::InvalidInput,
           "no channels: pass --group or a config with [channel] sections");
}

rs::KernelSpec resolve_kernel(const rs::RunConfig& cfg, const std::string& kind,
                              double scale, double bandwidth,
                              const std::vector<double>& mu, bool kind_given) {
  if (!kind_given && cfg.kernel) return *cfg.kernel;
  if (kind == "rank_one") return rs::KernelSpec::rank_one(scale);
  if (kind == "rank_one_uniform")
    return rs::KernelSpec::rank_one(scale, rs::BaseMeasure::UniformInterval);
  if (kind == "gaussian_rbf") return rs::KernelSpec::gaussian_rbf(bandwidth, scale);
  if (kind == "finite_rank") {
    if (mu.empty())
      rs::fail(rs::ErrorCode::InvalidInput, "finite_rank kernel needs --mu");
    return rs::KernelSpec::finite_rank(mu, scale);
  }
  rs::fail(rs::ErrorCode::InvalidInput, "unknown --kernel '" + kind + "'");
}

std::string out_path_or_default(const rs::RunConfig& cfg,
                                const std::string& command) {
  if (!cfg.out_path.empty()) return cfg.out_path;
  return command + "." + cfg.format;
}

rs::FixedPointSolverOptions solver_options(const rs::RunConfig& cfg) {
  rs::FixedPointSolverOptions opt;
  opt.damping = cfg.damping;
  opt.tol = cfg.tol_mc;
  opt.max_iter = cfg.max_iter;
  return opt;
}

// ---- subcommand bodies -----------------------------------------------------

int run_classify(const rs::RunConfig& cfg, const std::vector<rs::RepChannel>& channels) {
  RecordWriter out;
  for (const rs::RepChannel& ch : channels) {
    rs::Rng rng(rs::mix_seed(cfg.estimator.seed, 0xC1A55ULL));
    const rs::RepClassification cls = rs::classify(ch, cfg.classify_samples, rng);
    json& row = out.new_row();
    row["channel"] = ch.describe();
    row["dim"] = ch.dim;
    row["rho"] = cls.rho;
    row["rho_stderr"] = cls.rho_stderr;
    row["type"] = rs::rep_type_name(cls.type);
    row["threshold"] = cls.threshold;
    row["classify_samples"] = cfg.classify_samples;
    stamp(row, cfg);
    std::cout << "classify " << ch.describe() << ": rho=" << cls.rho
              << " type=" << rs::rep_type_name(cls.type)
              << " lambda_c=" << cls.threshold << "\n";
  }
  out.write(out_path_or_default(cfg, "classify"), cfg.format);
  return kExitOk;
}

int run_threshold(const rs::RunConfig& cfg, const std::vector<rs::RepChannel>& channels) {
  RecordWriter out;
  for (const rs::RepChannel& ch : channels) {
    rs::Rng rng(rs::mix_seed(cfg.estimator.seed, 0xC1A55ULL));
    const rs::RepClassification cls = rs::classify(ch, cfg.classify_samples, rng);
    if (cls.type == rs::RepType::Indeterminate)
      rs::fail(rs::ErrorCode::ClassificationNeeded,
               "type of " + ch.describe() + " is indeterminate");
    const double lambda_c = cls.threshold;
    auto eig_at = [&](double lambda) {
      rs::RepChannel probe = ch;
      probe.snr = lambda;
      return rs::hessian_at_zero({probe}, {cls}).block_max_eigs[0];
    };
    json& row = out.new_row();
    row["channel"] = ch.describe();
    row["rho"] = cls.rho;
    row["type"] = rs::rep_type_name(cls.type);
    row["lambda_c"] = lambda_c;
    row["hessian_eig_below"] = eig_at(0.9 * lambda_c);
    row["hessian_eig_above"] = eig_at(1.1 * lambda_c);
    stamp(row, cfg);
    std::cout << "threshold " << ch.describe() << ": lambda_c=" << lambda_c
              << "\n";
  }
  out.write(out_path_or_default(cfg, "threshold"), cfg.format);
  return kExitOk;
}

void solution_row(json& row, const std::vector<rs::RepChannel>& channels,
                  const rs::ReplicaSolution& sol) {
  for (std::size_t l = 0; l < channels.size(); ++l)
    row["q_frobenius_" + std::to_string(l)] = sol.q_star.block(l).norm();
  row["psi"] = sol.psi_value;
  row["psi_stderr"] = sol.psi_stderr;
  row["mi"] = sol.mi_limit;
  for (std::size_t l = 0; l < channels.size(); ++l)
    row["mmse_" + std::to_string(l)] = sol.mmse_limits[l];
  row["converged"] = sol.converged ? 1 : 0;
  row["iterations"] = sol.iterations;
  row["residual"] = sol.residual;
}

int run_solve(const rs::RunConfig& cfg, const std::vector<rs::RepChannel>& channels,
              double q0_scale) {
  const rs::ReplicaSolution sol = rs::solve_fixed_point(
      channels, rs::Overlap::identity(channels, q0_scale), solver_options(cfg),
      cfg.estimator);
  RecordWriter out;
  json& row = out.new_row();
  row["command"] = "solve";
  solution_row(row, channels, sol);
  stamp(row, cfg);
  out.write(out_path_or_default(cfg, "solve"), cfg.format);
  std::cout << "solve: psi=" << sol.psi_value << " mi=" << sol.mi_limit
            << (sol.converged ? "" : " (not converged)") << "\n";
  return !sol.converged && cfg.strict ? kExitNotConverged : kExitOk;
}

int run_so2(const rs::RunConfig& cfg) {
  if (cfg.lambdas.empty())
    rs::fail(rs::ErrorCode::InvalidInput, "so2 needs --lambda values");
  RecordWriter out;
  for (double lambda : cfg.lambdas) {
    const rs::ReplicaSolution sol = rs::so2_solve(lambda);
    json& row = out.new_row();
    row["lambda"] = lambda;
    row["q_star"] = sol.q_star.block(0)(0, 0);
    row["psi"] = sol.psi_value;
    row["mi"] = sol.mi_limit;
    row["mmse"] = sol.mmse_limits[0];
    row["residual"] = sol.residual;
    stamp(row, cfg);
  }
  out.write(out_path_or_default(cfg, "so2"), cfg.format);
  std::cout << "so2: solved " << cfg.lambdas.size() << " lambda values ("
            << out_path_or_default(cfg, "so2") << ")\n";
  return kExitOk;
}

int run_phase_diagram(const rs::RunConfig& cfg,
                      const std::vector<rs::RepChannel>& channels,
                      bool include_critical_band) {
  if (cfg.lambdas.empty())
    rs::fail(rs::ErrorCode::InvalidInput, "phase-diagram needs --lambda grid");
  // Multiplier threshold: smallest grid multiplier that destabilizes q = 0.
  double lambda_c = std::numeric_limits<double>::infinity();
  for (const rs::RepChannel& ch : channels) {
    rs::Rng rng(rs::mix_seed(cfg.estimator.seed, 0xC1A55ULL));
    const rs::RepClassification cls = rs::classify(ch, cfg.classify_samples, rng);
    if (cls.type == rs::RepType::Indeterminate) continue;
    lambda_c = std::min(lambda_c, cls.threshold / ch.snr);
  }
  RecordWriter out;
  int skipped = 0;
  for (double lambda : cfg.lambdas) {
    // MMSE near the critical point may be ill-defined; skip a ±2% band.
    if (!include_critical_band && std::isfinite(lambda_c) &&
        std::abs(lambda - lambda_c) <= 0.02 * lambda_c) {
      ++skipped;
      continue;
    }
    std::vector<rs::RepChannel> scaled = channels;
    for (rs::RepChannel& ch : scaled) ch.snr *= lambda;
    const rs::LandscapeScanResult scan =
        rs::landscape_scan(scaled, cfg.n_starts, solver_options(cfg), cfg.estimator);
    json& row = out.new_row();
    row["lambda"] = lambda;
    solution_row(row, scaled, scan.best);
    row["distinct_fixed_points"] = static_cast<int>(scan.distinct.size());
    stamp(row, cfg);
  }
  out.write(out_path_or_default(cfg, "phase-diagram"), cfg.format);
  std::cout << "phase-diagram: " << out.size() << " rows";
  if (skipped > 0)
    std::cout << " (" << skipped << " grid points inside the +/-2% critical band"
              << " skipped; lambda_c=" << lambda_c << ")";
  std::cout << "\n";
  return kExitOk;
}

int run_simulate(const rs::RunConfig& cfg,
                 const std::vector<rs::RepChannel>& channels) {
  std::optional<rs::Overlap> q_star;
  if (channels.size() == 1 && channels[0].group.family == rs::Family::SO2)
    q_star = rs::so2_solve(channels[0].snr).q_star;
  RecordWriter out;
  std::vector<json> rows(cfg.n_seeds);
  auto body = [&](std::int64_t lo, std::int64_t hi, int&) {
    for (std::int64_t s = lo; s < hi; ++s) {
      const std::uint64_t instance_seed = cfg.estimator.seed + s;
      const rs::SyncInstance inst =
          rs::generate_sync(cfg.n, channels, instance_seed);
      rs::GibbsChain chain(inst, rs::mix_seed(instance_seed, 0xC4A17ULL));
      const rs::DiagnosticsReport rep = rs::measure(
          inst, chain, cfg.burn_in, cfg.n_samples, cfg.thinning, q_star);
      json row;
      row["instance_seed"] = instance_seed;
      for (std::size_t l = 0; l < channels.size(); ++l) {
        row["overlap_sqnorm_" + std::to_string(l)] = rep.overlap_sqnorm[l];
        row["matrix_mmse_" + std::to_string(l)] = rep.matrix_mmse[l];
      }
      row["orbit_distance"] = rep.orbit_distance;
      row["nishimori_gap"] = rep.nishimori_gap;
      row["mean_hamiltonian"] = rep.mean_hamiltonian;
      row["acceptance_rate"] = chain.acceptance_rate();
      row["d_gn"] = rep.d_gn;
      row["k_gn"] = rep.k_gn;
      rows[s] = std::move(row);
    }
  };
  rs::parallel_chunks<int>(cfg.n_seeds, cfg.estimator.threads, body, 1);
  for (json& row : rows) {
    stamp(row, cfg);
    out.new_row() = std::move(row);
  }
  out.write(out_path_or_default(cfg, "simulate"), cfg.format);
  std::cout << "simulate: " << cfg.n_seeds << " chains at n=" << cfg.n << "\n";
  return kExitOk;
}

int run_exact_fe(const rs::RunConfig& cfg,
                 const std::vector<rs::RepChannel>& channels) {
  RecordWriter out;
  double mean_fe = 0.0;
  std::vector<json> rows(cfg.n_seeds);
  auto body = [&](std::int64_t lo, std::int64_t hi, int&) {
    for (std::int64_t d = lo; d < hi; ++d) {
      const std::uint64_t instance_seed = cfg.estimator.seed + d;
      const rs::SyncInstance inst =
          rs::generate_sync(cfg.n, channels, instance_seed);
      const rs::ExactFreeEnergyResult fe = rs::exact_free_energy(inst);
      json row;
      row["instance_seed"] = instance_seed;
      row["free_energy"] = fe.free_energy;
      row["mean_hamiltonian"] = fe.mean_hamiltonian;
      row["nishimori_gap"] = fe.nishimori_gap;
      for (std::size_t l = 0; l < channels.size(); ++l) {
        row["two_copy_sq_" + std::to_string(l)] = fe.two_copy_sq[l];
        row["matrix_mmse_" + std::to_string(l)] = fe.matrix_mmse[l];
      }
      rows[d] = std::move(row);
    }
  };
  rs::parallel_chunks<int>(cfg.n_seeds, cfg.estimator.threads, body, 1);
  for (json& row : rows) {
    mean_fe += row["free_energy"].get<double>() / cfg.n_seeds;
    stamp(row, cfg);
    out.new_row() = std::move(row);
  }
  out.write(out_path_or_default(cfg, "exact-fe"), cfg.format);
  std::cout << "exact-fe: n=" << cfg.n << " draws=" << cfg.n_seeds
            << " mean_free_energy=" << mean_fe << "\n";
  return kExitOk;
}

int run_qa_spectrum(const rs::RunConfig& cfg, const rs::KernelSpec& kernel,
                    int rank, int nodes) {
  const rs::MercerTruncation trunc = rs::mercer_truncate(
      kernel, rank,
      kernel.base == rs::BaseMeasure::UniformInterval ? nodes : 0);
  RecordWriter out;
  for (int l = 0; l < trunc.rank; ++l) {
    json& row = out.new_row();
    row["l"] = l + 1;
    row["mu"] = trunc.mu(l);
    row["residual_sup"] = trunc.residual_sup;
    row["trace_residual"] = trunc.trace_residual;
    row["truncated_early"] = trunc.truncated_early ? 1 : 0;
    stamp(row, cfg);
  }
  out.write(out_path_or_default(cfg, "qa-spectrum"), cfg.format);
  std::cout << "qa-spectrum: rank=" << trunc.rank
            << " residual_sup=" << trunc.residual_sup << "\n";
  return kExitOk;
}

int run_qa_solve(const rs::RunConfig& cfg, const rs::KernelSpec& kernel,
                 int rank, int nodes) {
  const rs::MercerTruncation trunc = rs::mercer_truncate(
      kernel, rank,
      kernel.base == rs::BaseMeasure::UniformInterval ? nodes : 0);
  rs::QaSolverOptions opt{cfg.damping, cfg.tol_mc, cfg.max_iter};
  const int r = trunc.rank;
  rs::QaSolveResult best;
  bool have = false;
  for (double s : {0.01, 1.0}) {
    const rs::QaSolveResult res = rs::qa_solve(
        trunc, Eigen::MatrixXd(s * Eigen::MatrixXd::Identity(r, r)), opt,
        cfg.estimator);
    if (!have || res.psi_value > best.psi_value) {
      best = res;
      have = true;
    }
  }
  RecordWriter out;
  json& row = out.new_row();
  row["kernel"] = kernel.describe();
  row["lambda_scale"] = kernel.scale;
  row["rank"] = r;
  row["psi"] = best.psi_value;
  row["psi_stderr"] = best.psi_stderr;
  row["q_frob"] = best.q_frob;
  row["converged"] = best.converged ? 1 : 0;
  row["iterations"] = best.iterations;
  row["residual"] = best.residual;
  stamp(row, cfg);
  out.write(out_path_or_default(cfg, "qa-solve"), cfg.format);
  std::cout << "qa-solve: psi=" << best.psi_value << " q_frob=" << best.q_frob
            << (best.converged ? "" : " (not converged)") << "\n";
  return !best.converged && cfg.strict ? kExitNotConverged : kExitOk;
}

int run_qa_mi(const rs::RunConfig& cfg, const rs::KernelSpec& kernel) {
  std::vector<int> ranks = cfg.ranks;
  if (ranks.empty()) ranks = {1, 2, 3, 4, 5, 6};
  rs::QaSolverOptions opt{cfg.damping, cfg.tol_mc, cfg.max_iter};
  const rs::QASolution sol = rs::qa_mi_mmse(kernel, ranks, opt, cfg.estimator);
  RecordWriter out;
  double prev = 0.0;
  for (std::size_t i = 0; i < sol.per_rank.size(); ++i) {
    const rs::QaPerRank& pr = sol.per_rank[i];
    json& row = out.new_row();
    row["L"] = pr.rank;
    row["lambda_scale"] = kernel.scale;
    row["psi"] = pr.psi;
    row["q_frob"] = pr.q_frob;
    row["mi"] = 0.25 * sol.kappa_second_moment - pr.psi;
    row["mmse"] = sol.kappa_second_moment - pr.q_frob * pr.q_frob;
    row["cauchy_gap"] = i == 0 ? 0.0 : std::abs(pr.psi - prev);
    row["converged"] = pr.converged ? 1 : 0;
    prev = pr.psi;
    stamp(row, cfg);
  }
  out.write(out_path_or_default(cfg, "qa-mi"), cfg.format);
  std::cout << "qa-mi: psi_inf=" << sol.psi_infinity << " mi=" << sol.mi_limit
            << " mmse=" << sol.mmse_limit << " cauchy_gap=" << sol.cauchy_gap
            << (sol.extrapolation_reliable ? "" : " (extrapolation unreliable)")
            << "\n";
  return !sol.extrapolation_reliable && cfg.strict ? kExitNotConverged : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"replica-sync: replica predictions and finite-N checks for "
               "group synchronization and kernel quadratic assignment"};
  app.require_subcommand(1);

  rs::RunConfig cfg;
  cfg.estimator.threads = default_threads();
  std::string config_path;
  ChannelFlags flags;
  std::string kernel_kind = "rank_one";
  double kernel_scale = 1.0, kernel_bandwidth = 1.0;
  std::vector<double> kernel_mu;
  double q0_scale = 0.5;
  int qa_rank = 4, qa_nodes = 256;
  bool include_critical_band = false;

  bool group_given = false, kernel_given = false;

  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key-value config file");
    sub->add_option("--out", cfg.out_path, "output file path");
    sub->add_option("--format", cfg.format, "csv or json");
    sub->add_option("--seed", cfg.estimator.seed, "root seed");
    sub->add_option("--mc-samples", cfg.estimator.mc_samples, "outer MC draws");
    sub->add_option("--inner-resolution", cfg.estimator.inner_resolution,
                    "inner quadrature/MC size");
    sub->add_option("--threads", cfg.estimator.threads,
                    "worker threads (REPLICA_SYNC_THREADS fallback)");
    sub->add_flag("--antithetic", cfg.estimator.antithetic, "antithetic z draws");
    sub->add_flag("--strict", cfg.strict, "exit 3 on non-convergence");
    sub->add_option("--damping", cfg.damping, "fixed-point damping");
    sub->add_option("--tol", cfg.tol_mc, "fixed-point tolerance (MC paths)");
    sub->add_option("--max-iter", cfg.max_iter, "fixed-point iteration cap");
    sub->add_option("--lambda", cfg.lambdas, "SNR value(s)")->delimiter(',');
  };
  auto add_channel_flags = [&](CLI::App* sub) {
    sub->add_option("--group", flags.group, "so2|sok|cyclic|sym|z2")
        ->each([&](const std::string&) { group_given = true; });
    sub->add_option("--k", flags.k, "group parameter k");
    sub->add_option("--harmonic", flags.harmonic, "harmonic index");
    sub->add_option("--snr", flags.snr, "channel SNR lambda");
  };
  auto add_kernel_flags = [&](CLI::App* sub) {
    sub->add_option("--kernel", kernel_kind,
                    "rank_one|rank_one_uniform|gaussian_rbf|finite_rank")
        ->each([&](const std::string&) { kernel_given = true; });
    sub->add_option("--scale", kernel_scale, "kernel scale (sqrt of SNR)");
    sub->add_option("--bandwidth", kernel_bandwidth, "RBF bandwidth");
    sub->add_option("--mu", kernel_mu, "finite-rank spectrum")->delimiter(',');
    sub->add_option("--nodes", qa_nodes, "Nystrom quadrature nodes");
  };

  CLI::App* c_classify = app.add_subcommand("classify", "representation type and threshold");
  add_shared(c_classify);
  add_channel_flags(c_classify);
  c_classify->add_option("--samples", cfg.classify_samples, "classification samples");

  CLI::App* c_threshold = app.add_subcommand("threshold", "algorithmic threshold lambda_c");
  add_shared(c_threshold);
  add_channel_flags(c_threshold);
  c_threshold->add_option("--samples", cfg.classify_samples, "classification samples");

  CLI::App* c_solve = app.add_subcommand("solve", "state-evolution fixed point");
  add_shared(c_solve);
  add_channel_flags(c_solve);
  c_solve->add_option("--q0-scale", q0_scale, "initial overlap scale");

  CLI::App* c_so2 = app.add_subcommand("so2", "exact SO(2) solution");
  add_shared(c_so2);

  CLI::App* c_phase = app.add_subcommand("phase-diagram", "sweep SNR multipliers");
  add_shared(c_phase);
  add_channel_flags(c_phase);
  c_phase->add_option("--n-starts", cfg.n_starts, "multi-start count");
  c_phase->add_flag("--include-critical-band", include_critical_band,
                    "keep grid points within 2% of lambda_c");
  c_phase->add_option("--samples", cfg.classify_samples, "classification samples");

  CLI::App* c_sim = app.add_subcommand("simulate", "finite-N Gibbs diagnostics");
  add_shared(c_sim);
  add_channel_flags(c_sim);
  c_sim->add_option("--n", cfg.n, "instance size N");
  c_sim->add_option("--seeds", cfg.n_seeds, "number of chains");
  c_sim->add_option("--burn-in", cfg.burn_in, "burn-in sweeps");
  c_sim->add_option("--samples", cfg.n_samples, "posterior samples");
  c_sim->add_option("--thinning", cfg.thinning, "sweeps between samples");

  CLI::App* c_fe = app.add_subcommand("exact-fe", "enumeration free energy");
  add_shared(c_fe);
  add_channel_flags(c_fe);
  c_fe->add_option("--n", cfg.n, "instance size N");
  c_fe->add_option("--draws", cfg.n_seeds, "disorder draws");

  CLI::App* c_spec = app.add_subcommand("qa-spectrum", "Mercer spectrum");
  add_shared(c_spec);
  add_kernel_flags(c_spec);
  c_spec->add_option("--rank", qa_rank, "truncation rank");

  CLI::App* c_qsolve = app.add_subcommand("qa-solve", "QA overlap maximizer");
  add_shared(c_qsolve);
  add_kernel_flags(c_qsolve);
  c_qsolve->add_option("--rank", qa_rank, "truncation rank");

  CLI::App* c_qmi = app.add_subcommand("qa-mi", "QA MI/MMSE over ranks");
  add_shared(c_qmi);
  add_kernel_flags(c_qmi);
  c_qmi->add_option("--ranks", cfg.ranks, "rank schedule")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return kExitConfig;
  }

  try {
    // Config file first, then re-apply explicit command-line overrides.
    if (!config_path.empty()) {
      const rs::RunConfig file_cfg = rs::validate_config(config_path);
      rs::RunConfig merged = file_cfg;
      merged.strict = cfg.strict || file_cfg.strict;
      merged.estimator.threads = cfg.estimator.threads;
      CLI::App* sub = app.get_subcommands().front();
      auto overridden = [&](const std::string& flag) {
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
      };
      if (overridden("--seed")) merged.estimator.seed = cfg.estimator.seed;
      if (overridden("--mc-samples")) merged.estimator.mc_samples = cfg.estimator.mc_samples;
      if (overridden("--inner-resolution"))
        merged.estimator.inner_resolution = cfg.estimator.inner_resolution;
      if (overridden("--antithetic")) merged.estimator.antithetic = cfg.estimator.antithetic;
      if (overridden("--threads")) merged.estimator.threads = cfg.estimator.threads;
      if (overridden("--out")) merged.out_path = cfg.out_path;
      if (overridden("--format")) merged.format = cfg.format;
      if (overridden("--damping")) merged.damping = cfg.damping;
      if (overridden("--tol")) merged.tol_mc = cfg.tol_mc;
      if (overridden("--max-iter")) merged.max_iter = cfg.max_iter;
      if (overridden("--lambda")) merged.lambdas = cfg.lambdas;
      if (overridden("--n")) merged.n = cfg.n;
      if (overridden("--seeds") || overridden("--draws")) merged.n_seeds = cfg.n_seeds;
      if (overridden("--burn-in")) merged.burn_in = cfg.burn_in;
      if (overridden("--samples") && (sub == c_sim)) merged.n_samples = cfg.n_samples;
      if (overridden("--samples") && (sub == c_classify || sub == c_threshold || sub == c_phase))
        merged.classify_samples = cfg.classify_samples;
      if (overridden("--thinning")) merged.thinning = cfg.thinning;
      if (overridden("--n-starts")) merged.n_starts = cfg.n_starts;
      if (overridden("--ranks")) merged.ranks = cfg.ranks;
      cfg = merged;
    }
    cfg.estimator.validate();

    if (c_classify->parsed())
      return run_classify(cfg, resolve_channels(cfg, flags, group_given));
    if (c_threshold->parsed())
      return run_threshold(cfg, resolve_channels(cfg, flags, group_given));
    if (c_solve->parsed()) {
      ChannelFlags f = flags;
      if (!cfg.lambdas.empty()) f.snr = cfg.lambdas.front();
      return run_solve(cfg, resolve_channels(cfg, f, group_given), q0_scale);
    }
    if (c_so2->parsed()) return run_so2(cfg);
    if (c_phase->parsed())
      return run_phase_diagram(cfg, resolve_channels(cfg, flags, group_given),
                               include_critical_band);
    if (c_sim->parsed()) {
      ChannelFlags f = flags;
      if (!cfg.lambdas.empty()) f.snr = cfg.lambdas.front();
      return run_simulate(cfg, resolve_channels(cfg, f, group_given));
    }
    if (c_fe->parsed()) {
      ChannelFlags f = flags;
      if (!cfg.lambdas.empty()) f.snr = cfg.lambdas.front();
      return run_exact_fe(cfg, resolve_channels(cfg, f, group_given));
    }
    const rs::KernelSpec kernel = resolve_kernel(
        cfg, kernel_kind, kernel_scale, kernel_bandwidth, kernel_mu, kernel_given);
    if (c_spec->parsed()) return run_qa_spectrum(cfg, kernel, qa_rank, qa_nodes);
    if (c_qsolve->parsed()) return run_qa_solve(cfg, kernel, qa_rank, qa_nodes);
    if (c_qmi->parsed()) return run_qa_mi(cfg, kernel);
    std::cerr << "no subcommand\n";
    return kExitConfig;
  } catch (const rs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == rs::ErrorCode::Internal ? 1 : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

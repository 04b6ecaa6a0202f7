#pragma once

#include <optional>
#include <string>
#include <vector>

#include "replica_sync/overlap.hpp"
#include "replica_sync/quad_assign.hpp"

namespace replica_sync {

/// Fully resolved run description: subcommand, channel/kernel catalog
/// entries, sweep grids, estimator budgets, and output destination. Every
/// emitted record embeds (seed, mc_samples, version) so runs reproduce
/// byte-identically.
struct RunConfig {
  std::string command;
  std::vector<RepChannel> channels;
  std::optional<KernelSpec> kernel;
  EstimatorConfig estimator;

  double damping = 0.5;
  double tol_scalar = 1e-6;  // deterministic paths
  double tol_mc = 1e-4;      // Monte Carlo paths: max(tol_mc, 3·stderr) applies
  int max_iter = 200;
  int n_starts = 8;

  std::vector<double> lambdas;
  std::vector<int> ranks;
  long classify_samples = 1000000;

  int n = 200;          // finite-N instance size
  int n_seeds = 20;     // disorder draws / chains
  int burn_in = 2000;
  int n_samples = 2000;
  int thinning = 5;

  std::string out_path;
  std::string format = "csv";  // csv | json
  bool strict = false;
};

/// Parses the key-value experiment config format:
///   key = value lines, # comments, and repeatable [channel] / one
///   [kernel] section. Schema violations raise InvalidInput with a
///   file:line message. Defaults are applied; negative SNRs and zero
///   sample budgets are rejected.
RunConfig validate_config(const std::string& path);

/// Same, from in-memory text (tests); `name` is used in error messages.
RunConfig parse_config_text(const std::string& text, const std::string& name);

std::string format_double(double v);  // 17 significant digits, '.' decimal

const char* version_string();

}  // namespace replica_sync

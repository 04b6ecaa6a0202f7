#include "replica_sync/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "replica_sync/errors.hpp"

namespace replica_sync {

namespace {

struct Entry {
  std::string section;  // "" for the global scope
  int section_index = -1;
  std::string key;
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_fail(const std::string& name, int line,
                              const std::string& what) {
  fail(ErrorCode::InvalidInput,
       name + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const Entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    config_fail(name, e.line, "value of '" + e.key + "' is not a number");
  }
}

long parse_long(const Entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    config_fail(name, e.line, "value of '" + e.key + "' is not an integer");
  }
}

std::vector<double> parse_double_list(const Entry& e, const std::string& name) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      config_fail(name, e.line, "list entry '" + item + "' is not a number");
    }
  }
  if (out.empty()) config_fail(name, e.line, "'" + e.key + "' list is empty");
  return out;
}

struct SectionEntries {
  int header_line = 0;
  std::map<std::string, Entry> keys;
};

RepChannel build_channel(const SectionEntries& sec, const std::string& name) {
  auto get = [&](const std::string& key) -> const Entry* {
    auto it = sec.keys.find(key);
    return it == sec.keys.end() ? nullptr : &it->second;
  };
  const Entry* family = get("family");
  if (!family)
    config_fail(name, sec.header_line, "channel is missing the 'family' field");
  const Entry* snr = get("snr");
  if (!snr)
    config_fail(name, sec.header_line, "channel is missing the 'snr' field");
  const double snr_value = parse_double(*snr, name);
  if (!(snr_value > 0.0))
    config_fail(name, snr->line, "'snr' must be positive");
  int parameter = 0;
  if (const Entry* p = get("parameter"))
    parameter = static_cast<int>(parse_long(*p, name));
  int harmonic = 1;
  if (const Entry* h = get("harmonic"))
    harmonic = static_cast<int>(parse_long(*h, name));

  GroupSpec group;
  const std::string fam = family->value;
  if (fam == "so2") {
    group = GroupSpec::so2();
  } else if (fam == "sok" || fam == "so_k") {
    group = GroupSpec::sok(parameter);
  } else if (fam == "cyclic") {
    group = GroupSpec::cyclic(parameter);
  } else if (fam == "symmetric" || fam == "sym") {
    group = GroupSpec::symmetric(parameter);
  } else if (fam == "z2") {
    group = GroupSpec::z2();
  } else {
    config_fail(name, family->line, "unknown family '" + fam + "'");
  }

  RepKind kind;
  std::string kind_name;
  if (const Entry* k = get("rep_kind")) {
    kind_name = k->value;
  } else {
    switch (group.family) {  // natural default per family
      case Family::SO2: kind_name = "so2_harmonic"; break;
      case Family::SOk: kind_name = "sok_standard"; break;
      case Family::Cyclic: kind_name = "cyclic_plane"; break;
      case Family::Symmetric: kind_name = "symmetric_standard"; break;
      case Family::Z2: kind_name = "sign"; break;
    }
  }
  if (kind_name == "so2_harmonic") kind = RepKind::SO2Harmonic;
  else if (kind_name == "sok_standard") kind = RepKind::SOkStandard;
  else if (kind_name == "cyclic_plane") kind = RepKind::CyclicPlane;
  else if (kind_name == "symmetric_standard") kind = RepKind::SymmetricStandard;
  else if (kind_name == "sign") kind = RepKind::Sign;
  else if (kind_name == "trivial") kind = RepKind::Trivial;
  else if (kind_name == "cyclic_complement") kind = RepKind::CyclicComplement;
  else if (kind_name == "symmetric_action") kind = RepKind::SymmetricAction;
  else config_fail(name, sec.header_line, "unknown rep_kind '" + kind_name + "'");

  try {
    return make_channel(group, kind, snr_value, harmonic);
  } catch (const Error& err) {
    config_fail(name, sec.header_line, err.what());
  }
}

KernelSpec build_kernel(const SectionEntries& sec, const std::string& name) {
  auto get = [&](const std::string& key) -> const Entry* {
    auto it = sec.keys.find(key);
    return it == sec.keys.end() ? nullptr : &it->second;
  };
  const Entry* kind = get("kind");
  if (!kind)
    config_fail(name, sec.header_line, "kernel is missing the 'kind' field");
  double scale = 1.0;
  if (const Entry* s = get("scale")) scale = parse_double(*s, name);
  if (!(scale > 0.0))
    config_fail(name, sec.header_line, "'scale' must be positive");
  std::string base = "rademacher";
  if (const Entry* b = get("base_measure")) base = b->value;

  try {
    if (kind->value == "rank_one") {
      BaseMeasure bm;
      if (base == "rademacher") bm = BaseMeasure::Rademacher;
      else if (base == "uniform") bm = BaseMeasure::UniformInterval;
      else config_fail(name, kind->line, "unknown base_measure '" + base + "'");
      return KernelSpec::rank_one(scale, bm);
    }
    if (kind->value == "finite_rank") {
      const Entry* mu = get("mu");
      if (!mu)
        config_fail(name, sec.header_line, "finite_rank kernel needs 'mu'");
      return KernelSpec::finite_rank(parse_double_list(*mu, name), scale);
    }
    if (kind->value == "gaussian_rbf") {
      double bandwidth = 1.0;
      if (const Entry* b = get("bandwidth")) bandwidth = parse_double(*b, name);
      return KernelSpec::gaussian_rbf(bandwidth, scale);
    }
  } catch (const Error& err) {
    config_fail(name, sec.header_line, err.what());
  }
  config_fail(name, kind->line, "unknown kernel kind '" + kind->value + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& name) {
  std::vector<Entry> globals;
  std::vector<SectionEntries> channels;
  std::optional<SectionEntries> kernel;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::string section;
  SectionEntries* current = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (const auto hash = s.find('#'); hash != std::string::npos)
      s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') config_fail(name, line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section == "channel") {
        channels.push_back({line, {}});
        current = &channels.back();
      } else if (section == "kernel") {
        if (kernel) config_fail(name, line, "duplicate [kernel] section");
        kernel = SectionEntries{line, {}};
        current = &*kernel;
      } else {
        config_fail(name, line, "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      config_fail(name, line, "expected 'key = value'");
    Entry e;
    e.key = trim(s.substr(0, eq));
    e.value = trim(s.substr(eq + 1));
    e.line = line;
    if (e.key.empty()) config_fail(name, line, "empty key");
    if (section.empty()) {
      globals.push_back(e);
    } else {
      if (current->keys.count(e.key))
        config_fail(name, line, "duplicate key '" + e.key + "' in section");
      current->keys[e.key] = e;
    }
  }

  RunConfig cfg;
  for (const Entry& e : globals) {
    if (e.key == "command") cfg.command = e.value;
    else if (e.key == "seed") cfg.estimator.seed = static_cast<std::uint64_t>(parse_long(e, name));
    else if (e.key == "mc_samples") cfg.estimator.mc_samples = parse_long(e, name);
    else if (e.key == "inner_resolution") cfg.estimator.inner_resolution = static_cast<int>(parse_long(e, name));
    else if (e.key == "antithetic") cfg.estimator.antithetic = e.value == "true" || e.value == "1";
    else if (e.key == "threads") cfg.estimator.threads = static_cast<int>(parse_long(e, name));
    else if (e.key == "damping") cfg.damping = parse_double(e, name);
    else if (e.key == "tol") cfg.tol_scalar = parse_double(e, name);
    else if (e.key == "tol_mc") cfg.tol_mc = parse_double(e, name);
    else if (e.key == "max_iter") cfg.max_iter = static_cast<int>(parse_long(e, name));
    else if (e.key == "n_starts") cfg.n_starts = static_cast<int>(parse_long(e, name));
    else if (e.key == "lambda" || e.key == "lambdas") cfg.lambdas = parse_double_list(e, name);
    else if (e.key == "ranks") {
      for (double v : parse_double_list(e, name)) cfg.ranks.push_back(static_cast<int>(v));
    }
    else if (e.key == "classify_samples") cfg.classify_samples = parse_long(e, name);
    else if (e.key == "n") cfg.n = static_cast<int>(parse_long(e, name));
    else if (e.key == "n_seeds") cfg.n_seeds = static_cast<int>(parse_long(e, name));
    else if (e.key == "burn_in") cfg.burn_in = static_cast<int>(parse_long(e, name));
    else if (e.key == "n_samples") cfg.n_samples = static_cast<int>(parse_long(e, name));
    else if (e.key == "thinning") cfg.thinning = static_cast<int>(parse_long(e, name));
    else if (e.key == "out") cfg.out_path = e.value;
    else if (e.key == "format") cfg.format = e.value;
    else if (e.key == "strict") cfg.strict = e.value == "true" || e.value == "1";
    else config_fail(name, e.line, "unknown key '" + e.key + "'");
  }

  for (const SectionEntries& sec : channels)
    cfg.channels.push_back(build_channel(sec, name));
  if (kernel) cfg.kernel = build_kernel(*kernel, name);

  if (cfg.estimator.mc_samples < 100)
    fail(ErrorCode::InvalidInput, name + ": mc_samples must be >= 100");
  if (cfg.estimator.inner_resolution < 64)
    fail(ErrorCode::InvalidInput, name + ": inner_resolution must be >= 64");
  if (cfg.format != "csv" && cfg.format != "json")
    fail(ErrorCode::InvalidInput, name + ": format must be csv or json");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
    fail(ErrorCode::InvalidInput, name + ": damping must lie in (0, 1]");
  return cfg;
}

RunConfig validate_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* version_string() {
#ifdef RS_VERSION
  return RS_VERSION;
#else
  return "0.0.0";
#endif
}

}  // namespace replica_sync

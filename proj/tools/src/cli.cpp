// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bootdiag/format.hpp"
#include "bootdiag/parallel.hpp"

namespace bootdiag::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kTestTag = 1;
constexpr std::uint64_t kPermTag = 2;
constexpr std::uint64_t kReplacementTag = 3;
constexpr std::uint64_t kTableSeedTag = 0x7AB1E;

// ---- small parsing helpers --------------------------------------------------

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_double_key(const std::string& key, const std::string& value) {
  const auto v = parse_double(value);
  if (!v) throw ConfigError(key + ": cannot parse number '" + value + "'");
  return *v;
}

std::uint64_t parse_u64_key(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t.empty() || t[0] == '-')
    throw ConfigError(key + ": cannot parse nonnegative integer '" + value + "'");
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (errno != 0 || end != t.c_str() + t.size())
    throw ConfigError(key + ": cannot parse nonnegative integer '" + value + "'");
  return v;
}

std::size_t parse_size_key(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64_key(key, value));
}

bool parse_bool_key(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t == "1" || t == "true" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "no") return false;
  throw ConfigError(key + ": cannot parse boolean '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto v = parse_double(tok);
    if (!v) throw ConfigError(key + ": cannot parse number '" + trim(tok) + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ConfigError(key + ": list is empty");
  return out;
}

DiscrepancyMeasure parse_measure(const std::string& value) {
  const std::string v = trim(value);
  if (v == "ks") return KsMeasure{};
  if (v == "sks+") return SignedKsPlusMeasure{};
  if (v == "sks-") return SignedKsMinusMeasure{};
  if (v == "cvm") return CvmMeasure{};
  if (v == "ad") return AdMeasure{};
  if (v == "moment") return MomentMeasure{};
  if (v.rfind("interval:", 0) == 0) {
    const auto ends = parse_double_list("measure", v.substr(9));
    if (ends.size() != 2)
      throw ConfigError("measure: interval needs exactly two endpoints 'interval:a,b'");
    const IntervalSupMeasure m{ends[0], ends[1]};
    validate(DiscrepancyMeasure{m});
    return m;
  }
  if (v.rfind("point:", 0) == 0) {
    const PointAbsMeasure m{parse_double_key("measure", v.substr(6))};
    validate(DiscrepancyMeasure{m});
    return m;
  }
  throw ConfigError("measure: unknown measure '" + v + "'");
}

// ---- key-value collection ---------------------------------------------------

struct Entry {
  std::string key;
  std::string value;
  bool from_flag = false;
};

std::string canonical_key(std::string key) {
  for (const char* prefix : {"scenario.", "diagnostic.", "plan."}) {
    if (key.rfind(prefix, 0) == 0) {
      key = key.substr(std::string(prefix).size());
      break;
    }
  }
  // Short aliases for the experiment sizes.
  if (key == "R") return "datasets";
  if (key == "K") return "tests";
  if (key == "B") return "draws";
  if (key == "M") return "datasets";
  return key;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "command",    "scenario",  "n",          "k",        "rho",       "strength",
      "pi",         "lambda",    "scheme",     "alpha0",   "c",         "y0",
      "theta0",     "innovation", "df",        "tail_index", "m",       "measure",
      "omega",      "standardization", "prepass", "alpha", "alphas",   "datasets",
      "tests",      "draws",     "xmin",       "xmax",     "xpoints",  "threshold",
      "post",       "pool",      "with_replacement", "seed", "workers", "out",
      "m_ref",      "reps",
  };
  return keys;
}

std::vector<Entry> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file '" + path.string() + "'");
  std::vector<Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    auto sep = t.find('=');
    if (sep == std::string::npos) sep = t.find(':');
    if (sep == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value': '" + t + "'");
    Entry e;
    e.key = canonical_key(trim(t.substr(0, sep)));
    e.value = trim(t.substr(sep + 1));
    e.from_flag = false;
    if (e.key.empty())
      throw ConfigError("config: line " + std::to_string(lineno) + " has an empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

Command parse_command(const std::string& value) {
  if (value == "simulate") return Command::simulate;
  if (value == "diagnose") return Command::diagnose;
  if (value == "size-power") return Command::size_power;
  if (value == "fan-chart") return Command::fan_chart;
  if (value == "posttest") return Command::posttest;
  if (value == "external") return Command::external;
  if (value == "build-tables") return Command::build_tables;
  throw ConfigError("command: unknown command '" + value + "'");
}

std::string scheme_help(const std::string& scenario) {
  if (scenario == "iv") return "parametric|nonparametric";
  if (scenario == "ar1") return "parametric|resample";
  if (scenario == "heavytail") return "iid|wild";
  return "(no scheme)";
}

}  // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::diagnose: return "diagnose";
    case Command::size_power: return "size-power";
    case Command::fan_chart: return "fan-chart";
    case Command::posttest: return "posttest";
    case Command::external: return "external";
    case Command::build_tables: return "build-tables";
  }
  return "?";
}

RunConfig parse_config(const std::vector<std::string>& args) {
  // Phase 1: flatten file entries and flags into one ordered list.
  std::vector<Entry> entries;
  std::optional<std::string> positional_command;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("config: --config needs a file path");
      const auto file_entries = read_config_file(args[++i]);
      entries.insert(entries.end(), file_entries.begin(), file_entries.end());
      continue;
    }
    if (a.rfind("--", 0) == 0) {
      Entry e;
      e.from_flag = true;
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        e.key = canonical_key(a.substr(2, eq - 2));
        e.value = a.substr(eq + 1);
      } else {
        e.key = canonical_key(a.substr(2));
        if (e.key == "with_replacement") {
          e.value = "true";  // bare boolean flag
        } else {
          if (i + 1 >= args.size())
            throw ConfigError(e.key + ": flag needs a value");
          e.value = args[++i];
        }
      }
      entries.push_back(std::move(e));
      continue;
    }
    if (positional_command)
      throw ConfigError("command: unexpected extra positional argument '" + a + "'");
    positional_command = a;
  }
  if (positional_command)
    entries.push_back(Entry{"command", *positional_command, true});

  // Phase 2: last occurrence wins; flags always beat file entries.
  std::map<std::string, Entry> merged;
  std::vector<std::string> order;
  std::vector<std::string> overridden;
  for (const Entry& e : entries) {
    if (known_keys().count(e.key) == 0)
      throw ConfigError("config: unknown key '" + e.key + "'");
    const auto it = merged.find(e.key);
    if (it == merged.end()) {
      merged[e.key] = e;
      order.push_back(e.key);
    } else {
      if (e.from_flag && !it->second.from_flag) overridden.push_back(e.key);
      if (e.from_flag || !it->second.from_flag) it->second = e;
      // A file entry never overrides an earlier flag.
    }
  }
  auto has = [&](const char* key) { return merged.count(key) != 0; };
  auto get = [&](const char* key) -> const std::string& { return merged.at(key).value; };

  RunConfig cfg;
  cfg.overridden = std::move(overridden);
  if (!has("command")) throw ConfigError("command: required (positional or key)");
  cfg.command = parse_command(get("command"));

  // Scenario family first; regime sub-keys hang off it.
  std::string family = has("scenario") ? trim(get("scenario")) : "ar1";
  const std::size_t n_default = (family == "boundary") ? 400 : 1000;
  const std::size_t n = has("n") ? parse_size_key("n", get("n")) : n_default;

  if (family == "iv") {
    IvSpec s;
    s.n = n;
    s.k = has("k") ? parse_size_key("k", get("k")) : 1;
    if (has("rho")) s.rho_uv = parse_double_key("rho", get("rho"));
    const bool has_pi = has("pi");
    const bool has_lambda = has("lambda");
    if (has_pi && has_lambda) throw ConfigError("iv: give either pi or lambda, not both");
    std::string strength = has("strength") ? trim(get("strength"))
                                           : (has_lambda ? "weak" : "strong");
    if (strength == "strong") {
      std::vector<double> pi(s.k, 0.0);
      pi[0] = 1.0;
      if (has_pi) pi = parse_double_list("pi", get("pi"));
      s.strength = IvStrong{std::move(pi)};
    } else if (strength == "weak") {
      std::vector<double> lambda(s.k, 0.0);
      lambda[0] = 1.0;
      if (has_lambda) lambda = parse_double_list("lambda", get("lambda"));
      s.strength = IvWeak{std::move(lambda)};
    } else {
      throw ConfigError("strength: expected strong|weak, got '" + strength + "'");
    }
    if (has("scheme")) {
      const std::string v = trim(get("scheme"));
      if (v == "parametric" || v == "gaussian")
        s.scheme = IvScheme::parametric_gaussian;
      else if (v == "nonparametric" || v == "resample")
        s.scheme = IvScheme::nonparametric_iid;
      else
        throw ConfigError("scheme: iv expects " + scheme_help("iv") + ", got '" + v + "'");
    }
    cfg.scenario = std::move(s);
  } else if (family == "ar1") {
    Ar1Spec s;
    s.n = n;
    if (has("alpha0") && has("c"))
      throw ConfigError("ar1: give either alpha0 (stationary) or c (local-to-unity)");
    if (has("c"))
      s.regime = Ar1LocalToUnity{parse_double_key("c", get("c"))};
    else if (has("alpha0"))
      s.regime = Ar1Stationary{parse_double_key("alpha0", get("alpha0"))};
    if (has("y0")) s.y0 = parse_double_key("y0", get("y0"));
    if (has("scheme")) {
      const std::string v = trim(get("scheme"));
      if (v == "parametric" || v == "gaussian")
        s.scheme = Ar1Scheme::parametric_gaussian;
      else if (v == "resample" || v == "nonparametric")
        s.scheme = Ar1Scheme::residual_resample;
      else
        throw ConfigError("scheme: ar1 expects " + scheme_help("ar1") + ", got '" + v + "'");
    }
    cfg.scenario = std::move(s);
  } else if (family == "boundary") {
    BoundarySpec s;
    s.n = n;
    if (has("theta0") && has("c"))
      throw ConfigError("boundary: give either theta0 (interior) or c (near boundary)");
    if (has("theta0"))
      s.regime = BoundaryInterior{parse_double_key("theta0", get("theta0"))};
    else if (has("c"))
      s.regime = BoundaryNearBoundary{parse_double_key("c", get("c"))};
    cfg.scenario = std::move(s);
  } else if (family == "heavytail") {
    HeavyTailSpec s;
    s.n = n;
    const bool finite_keys = has("innovation") || has("df");
    if (has("tail_index") && finite_keys)
      throw ConfigError("heavytail: tail_index conflicts with innovation/df");
    if (has("tail_index")) {
      s.regime = HeavyStable{parse_double_key("tail_index", get("tail_index"))};
    } else {
      HeavyFiniteVariance fv;
      if (has("innovation")) {
        const std::string v = trim(get("innovation"));
        if (v == "gaussian")
          fv.innovation = HeavyInnovation::gaussian;
        else if (v == "student")
          fv.innovation = HeavyInnovation::student_t;
        else
          throw ConfigError("innovation: expected gaussian|student, got '" + v + "'");
      }
      if (has("df")) fv.df = parse_double_key("df", get("df"));
      s.regime = fv;
    }
    if (has("scheme")) {
      const std::string v = trim(get("scheme"));
      if (v == "iid" || v == "resample")
        s.scheme = HeavyScheme::iid_resample;
      else if (v == "wild")
        s.scheme = HeavyScheme::wild_rademacher;
      else
        throw ConfigError("scheme: heavytail expects " + scheme_help("heavytail") +
                          ", got '" + v + "'");
    }
    cfg.scenario = std::move(s);
  } else if (family == "delta") {
    DeltaSpec s;
    s.n = n;
    if (has("theta0") && has("c"))
      throw ConfigError("delta: give either theta0 (regular) or c (near singular)");
    if (has("theta0"))
      s.regime = DeltaRegular{parse_double_key("theta0", get("theta0"))};
    else if (has("c"))
      s.regime = DeltaNearSingular{parse_double_key("c", get("c"))};
    cfg.scenario = std::move(s);
  } else {
    throw ConfigError("scenario: unknown scenario '" + family + "'");
  }
  validate(cfg.scenario);

  if (has("m")) cfg.diagnostic.m = parse_size_key("m", get("m"));
  if (has("measure")) cfg.diagnostic.measure = parse_measure(get("measure"));
  if (has("omega")) {
    const auto w = parse_double_list("omega", get("omega"));
    if (w.size() != 3) throw ConfigError("omega: expected three values 'w11,w12,w22'");
    if (!std::holds_alternative<MomentMeasure>(cfg.diagnostic.measure))
      throw ConfigError("omega: only valid with measure = moment");
    cfg.diagnostic.measure = MomentMeasure{Omega2{w[0], w[1], w[2]}};
  }
  if (has("standardization")) {
    const std::string v = trim(get("standardization"));
    if (v == "none")
      cfg.diagnostic.standardization = Standardization::none;
    else if (v == "scale")
      cfg.diagnostic.standardization = Standardization::scale_only;
    else if (v == "locscale")
      cfg.diagnostic.standardization = Standardization::location_scale;
    else
      throw ConfigError("standardization: expected none|scale|locscale, got '" + v + "'");
  }
  if (has("prepass")) cfg.diagnostic.prepass_m = parse_size_key("prepass", get("prepass"));
  if (has("alpha")) {
    const double a = parse_double_key("alpha", get("alpha"));
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("alpha: level_alpha must be strictly inside (0,1)");
    cfg.diagnostic.level_alpha = a;
  }
  validate(cfg.diagnostic);

  if (has("alphas")) {
    cfg.alphas = parse_double_list("alphas", get("alphas"));
    for (double a : cfg.alphas)
      if (!(a > 0.0 && a < 1.0))
        throw ConfigError("alphas: every level must be strictly inside (0,1)");
    std::sort(cfg.alphas.begin(), cfg.alphas.end());
    cfg.alphas.erase(std::unique(cfg.alphas.begin(), cfg.alphas.end()), cfg.alphas.end());
  }
  if (has("datasets")) cfg.datasets = parse_size_key("datasets", get("datasets"));
  if (has("tests")) cfg.tests_per_dataset = parse_size_key("tests", get("tests"));
  if (has("draws")) cfg.draws = parse_size_key("draws", get("draws"));
  if (has("xmin")) cfg.xmin = parse_double_key("xmin", get("xmin"));
  if (has("xmax")) cfg.xmax = parse_double_key("xmax", get("xmax"));
  if (has("xpoints")) cfg.xpoints = parse_size_key("xpoints", get("xpoints"));
  if (has("threshold")) cfg.threshold = parse_double_key("threshold", get("threshold"));
  if (has("post")) {
    const std::string v = trim(get("post"));
    if (v == "auto")
      cfg.post = PostChoice::automatic;
    else if (v == "iv")
      cfg.post = PostChoice::iv_t;
    else if (v == "ar1")
      cfg.post = PostChoice::ar1_t;
    else if (v == "mean")
      cfg.post = PostChoice::mean_t;
    else
      throw ConfigError("post: expected auto|iv|ar1|mean, got '" + v + "'");
  }
  if (has("pool")) cfg.pool_path = trim(get("pool"));
  if (has("with_replacement"))
    cfg.with_replacement = parse_bool_key("with_replacement", get("with_replacement"));
  if (has("seed")) cfg.master_seed = parse_u64_key("seed", get("seed"));
  if (has("workers")) {
    cfg.workers = static_cast<unsigned>(parse_u64_key("workers", get("workers")));
    if (cfg.workers < 1) throw ConfigError("workers: must be at least 1");
  }
  if (has("out")) cfg.out_dir = trim(get("out"));
  if (has("m_ref")) cfg.m_ref = parse_size_key("m_ref", get("m_ref"));
  if (has("reps")) cfg.reps = parse_size_key("reps", get("reps"));

  if (cfg.command == Command::external && cfg.pool_path.empty())
    throw ConfigError("pool: external command needs a pool file");
  if (cfg.datasets < 1) throw ConfigError("datasets: must be at least 1");
  if (cfg.tests_per_dataset < 1) throw ConfigError("tests: must be at least 1");
  if (cfg.draws < 1) throw ConfigError("draws: must be at least 1");
  if (cfg.command == Command::fan_chart) {
    if (!(cfg.xmin < cfg.xmax)) throw ConfigError("xmin: requires xmin < xmax");
    if (cfg.xpoints < 2) throw ConfigError("xpoints: must be at least 2");
  }

  // Effective configuration echo, in merge order.
  for (const std::string& key : order)
    cfg.effective.emplace_back(key, merged.at(key).value);
  return cfg;
}

// ---- external pools ---------------------------------------------------------

ExternalPool load_pool_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("pool: cannot open file '" + path.string() + "'");
  ExternalPool pool;
  std::string line;
  std::size_t lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto v = parse_double(t);
    if (!v) {
      if (first_content) {
        // A single leading header line is tolerated.
        first_content = false;
        continue;
      }
      throw ConfigError("pool: line " + std::to_string(lineno) + ": cannot parse value '" +
                        t + "'");
    }
    first_content = false;
    if (!std::isfinite(*v))
      throw ConfigError("pool: line " + std::to_string(lineno) + ": non-finite value '" + t +
                        "'");
    pool.draws.push_back(*v);
  }
  return pool;
}

ExternalResult run_external(const ExternalPool& pool, const DiagnosticConfig& diagnostic,
                            std::size_t tests, const SeedSpec& seed, bool with_replacement,
                            std::span<const double> alphas, const ReferenceLibrary* refs) {
  validate(diagnostic.measure);
  const std::size_t b = pool.draws.size();
  const std::size_t m = diagnostic.m;
  if (b == 0) throw ConfigError("external: pool is empty");
  if (m < 1) throw ConfigError("external: m must be at least 1");
  if (tests < 1) throw ConfigError("external: tests must be at least 1");
  if (!with_replacement && tests * m > b)
    throw ConfigError("external: tests*m = " + std::to_string(tests * m) +
                      " exceeds pool size " + std::to_string(b) +
                      " (set with_replacement to allow reuse)");
  if (alphas.empty()) throw ConfigError("external: alphas must be nonempty");

  // Location-scale standardization over the whole pool, before any split.
  double mean = 0.0;
  for (double v : pool.draws) mean += v;
  mean /= static_cast<double>(b);
  double ss = 0.0;
  for (double v : pool.draws) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(b));
  if (sd == 0.0) throw DegenerateFitError("external: pool variance exactly zero");
  std::vector<double> std_pool(b);
  for (std::size_t i = 0; i < b; ++i) std_pool[i] = (pool.draws[i] - mean) / sd;

  std::vector<std::size_t> perm;
  if (!with_replacement) {
    perm.resize(b);
    for (std::size_t i = 0; i < b; ++i) perm[i] = i;
    const Stream shuffle(seed.child(kPermTag));
    std::uint64_t ctr = 0;
    for (std::size_t i = b - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform_at(ctr++) *
                                              static_cast<double>(i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
  }

  ExternalResult result;
  result.outcomes.reserve(tests);
  std::vector<double> pvals;
  pvals.reserve(tests);
  for (std::size_t k = 0; k < tests; ++k) {
    std::vector<double> block(m);
    if (with_replacement) {
      const Stream pick(seed.child(kReplacementTag).child(k));
      for (std::size_t j = 0; j < m; ++j) {
        auto idx = static_cast<std::size_t>(pick.uniform_at(j) * static_cast<double>(b));
        if (idx >= b) idx = b - 1;
        block[j] = std_pool[idx];
      }
    } else {
      for (std::size_t j = 0; j < m; ++j) block[j] = std_pool[perm[k * m + j]];
    }
    DiagnosticOutcome outcome = evaluate_sample(SortedSample(std::move(block)),
                                                diagnostic.measure, refs);
    pvals.push_back(outcome.p_value.value());
    result.outcomes.push_back(std::move(outcome));
  }
  result.profile = profile_from_pvalues(std::move(pvals), 0, m, alphas);
  return result;
}

// ---- output helpers ---------------------------------------------------------

namespace {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex_u64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::string standardization_name(Standardization s) {
  switch (s) {
    case Standardization::none: return "none";
    case Standardization::scale_only: return "scale";
    case Standardization::location_scale: return "locscale";
  }
  return "?";
}

std::string reference_name(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::kolmogorov_series: return "kolmogorov";
    case ReferenceKind::one_sided_exact: return "one-sided";
    case ReferenceKind::simulated_table: return "table";
  }
  return "?";
}

std::filesystem::path tables_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("BOOTDIAG_CACHE_DIR"); env != nullptr && *env != '\0')
    return std::filesystem::path(env);
  return std::filesystem::path(cfg.out_dir) / "tables";
}

ReferenceLibrary load_reference_library(const std::filesystem::path& dir) {
  ReferenceLibrary lib;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return lib;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".table")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) lib.add(ReferenceTable::load(f));
  return lib;
}

std::string sanitize_filename(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                      c == '.' || c == '+';
    out.push_back(keep ? c : '_');
  }
  return out;
}

struct OutputRecorder {
  std::filesystem::path dir;
  json files = json::array();

  void emit(const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    files.push_back(json{{"file", name},
                         {"bytes", content.size()},
                         {"fnv1a64", hex_u64(fnv1a64(content))}});
  }
};

json config_echo(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.effective) j[k] = v;
  return j;
}

std::vector<double> default_experiment_alphas() { return {0.01, 0.05, 0.10}; }

}  // namespace

int run(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");

  OutputRecorder rec{std::filesystem::path(cfg.out_dir)};
  json manifest;
  manifest["tool"] = "bootdiag";
  manifest["version"] = "0.1.0";
  manifest["table_format"] = 1;
  manifest["command"] = command_name(cfg.command);
  manifest["master_seed"] = cfg.master_seed;
  manifest["workers"] = cfg.workers;
  manifest["config"] = config_echo(cfg);
  manifest["overrides"] = cfg.overridden;

  // Simulated reference tables; only some measures need them.
  const bool needs_tables =
      !std::holds_alternative<KsMeasure>(cfg.diagnostic.measure) &&
      !std::holds_alternative<SignedKsPlusMeasure>(cfg.diagnostic.measure) &&
      !std::holds_alternative<SignedKsMinusMeasure>(cfg.diagnostic.measure) &&
      cfg.command != Command::build_tables && cfg.command != Command::simulate;
  ReferenceLibrary refs;
  if (needs_tables) refs = load_reference_library(tables_dir(cfg));

  const SeedSpec root{cfg.master_seed, {}};
  const SeedSpec dataset0 = root.child(0).child(0);

  switch (cfg.command) {
    case Command::simulate: {
      const FittedModel fitted = simulate(cfg.scenario, dataset0);
      std::ostringstream csv;
      csv << "scenario,n,original_statistic\n";
      csv << scenario_label(cfg.scenario) << ',' << scenario_n(cfg.scenario) << ','
          << format_double(original_statistic(fitted)) << '\n';
      rec.emit("results.csv", csv.str());
      break;
    }
    case Command::diagnose: {
      const FittedModel fitted = simulate(cfg.scenario, dataset0);
      const ModelDrawStream stream(fitted, dataset0.child(kTestTag).child(0));
      const DiagnosticOutcome out = run_test(stream, cfg.diagnostic, &refs);
      std::ostringstream csv;
      csv << "scenario,n,m,measure,standardization,d_star,t_star,p_value,reference,table_id\n";
      csv << scenario_label(cfg.scenario) << ',' << scenario_n(cfg.scenario) << ',' << out.m
          << ',' << measure_label(cfg.diagnostic.measure) << ','
          << standardization_name(cfg.diagnostic.standardization) << ','
          << format_double(out.d_star.value) << ',' << format_double(out.t_star) << ','
          << format_double(out.p_value.value()) << ',' << reference_name(out.reference) << ','
          << out.table_id << '\n';
      rec.emit("results.csv", csv.str());
      manifest["reject_at_level"] = (out.p_value.value() <= cfg.diagnostic.level_alpha);
      break;
    }
    case Command::size_power: {
      ExperimentPlan plan;
      plan.scenarios = {cfg.scenario};
      plan.diagnostic = cfg.diagnostic;
      plan.datasets = cfg.datasets;
      plan.tests_per_dataset = cfg.tests_per_dataset;
      plan.seed = root;
      plan.alphas = cfg.alphas.empty() ? default_experiment_alphas() : cfg.alphas;
      plan.workers = cfg.workers;
      const auto rows = size_power_table(plan, &refs);
      rec.emit("results.csv", size_power_csv(rows));
      manifest["degenerate"] = rows.front().degenerate;
      manifest["ok"] = rows.front().ok;
      break;
    }
    case Command::fan_chart: {
      std::vector<double> grid(cfg.xpoints);
      for (std::size_t j = 0; j < cfg.xpoints; ++j)
        grid[j] = cfg.xmin + (cfg.xmax - cfg.xmin) * static_cast<double>(j) /
                                 static_cast<double>(cfg.xpoints - 1);
      const FanChartData fan =
          fan_chart(cfg.scenario, cfg.datasets, cfg.draws, grid, root.child(0), cfg.workers);
      rec.emit("fan.csv", fan_chart_csv(fan));
      manifest["degenerate"] = fan.degenerate;
      break;
    }
    case Command::posttest: {
      PostStatistic post;
      switch (cfg.post) {
        case PostChoice::iv_t: post = PostStatistic::iv_t; break;
        case PostChoice::ar1_t: post = PostStatistic::ar1_t; break;
        case PostChoice::mean_t: post = PostStatistic::mean_t; break;
        case PostChoice::automatic:
        default:
          if (std::holds_alternative<IvSpec>(cfg.scenario))
            post = PostStatistic::iv_t;
          else if (std::holds_alternative<Ar1Spec>(cfg.scenario))
            post = PostStatistic::ar1_t;
          else
            post = PostStatistic::mean_t;
          break;
      }
      const double threshold =
          cfg.threshold ? *cfg.threshold : kolmogorov_quantile(Prob(0.95));
      const PostTestReport report =
          post_test_bias(cfg.scenario, cfg.diagnostic, post, threshold, cfg.datasets,
                         root.child(0), cfg.workers, &refs);
      rec.emit("results.csv", post_test_csv(report));
      manifest["kept"] = report.kept;
      manifest["degenerate"] = report.degenerate;
      break;
    }
    case Command::external: {
      const ExternalPool pool = load_pool_csv(cfg.pool_path);
      const std::vector<double> alphas =
          cfg.alphas.empty() ? default_alpha_grid() : cfg.alphas;
      const ExternalResult result =
          run_external(pool, cfg.diagnostic, cfg.tests_per_dataset, root,
                       cfg.with_replacement, alphas, &refs);
      std::ostringstream csv;
      csv << "test,d_star,t_star,p_value,reference\n";
      for (std::size_t k = 0; k < result.outcomes.size(); ++k) {
        const auto& o = result.outcomes[k];
        csv << k << ',' << format_double(o.d_star.value) << ',' << format_double(o.t_star)
            << ',' << format_double(o.p_value.value()) << ',' << reference_name(o.reference)
            << '\n';
      }
      rec.emit("results.csv", csv.str());
      rec.emit("profile.csv", profile_csv(result.profile));
      const BandDiagnostic band = band_diagnostic(result.profile);
      manifest["pool_size"] = pool.draws.size();
      manifest["tests"] = result.profile.tests;
      manifest["with_replacement"] = cfg.with_replacement;
      manifest["band"] = json{{"statistic", band.statistic},
                              {"p_value", band.p_value.value()}};
      break;
    }
    case Command::build_tables: {
      const ReferenceTable table =
          build_reference_table(cfg.diagnostic.measure, cfg.m_ref, cfg.reps,
                                SeedSpec{cfg.master_seed, {kTableSeedTag}}, cfg.workers);
      const std::filesystem::path dir = tables_dir(cfg);
      std::filesystem::create_directories(dir, ec);
      if (ec) throw IoError("cannot create table directory '" + dir.string() + "'");
      const std::string name = sanitize_filename(table.key()) + "-" +
                               hex_u64(fnv1a64(table.key())).substr(2, 8) + ".table";
      table.save(dir / name);
      manifest["table"] = json{{"key", table.key()},
                               {"m_ref", table.m_ref()},
                               {"reps", table.reps()},
                               {"file", (dir / name).string()}};
      break;
    }
  }

  const auto end = std::chrono::steady_clock::now();
  manifest["wall_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
  manifest["outputs"] = rec.files;
  write_file(std::filesystem::path(cfg.out_dir) / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

int main_entry(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    const RunConfig cfg = parse_config(args);
    return run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SingularOmegaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingTableError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DegenerateFitError& e) {
    std::cerr << "degenerate data: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const DegenerateTailError& e) {
    std::cerr << "degenerate data: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bootdiag::cli

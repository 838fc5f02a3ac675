// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bootdiag/format.hpp"
#include "bootdiag/parallel.hpp"

namespace bootdiag {

void validate(const DiagnosticConfig& config) {
  if (config.m < 1) throw ConfigError("diagnostic: m must be at least 1");
  validate(config.measure);
  if (config.standardization != Standardization::none && config.prepass_m != 0 &&
      config.prepass_m < 10 * config.m)
    throw ConfigError("diagnostic: prepass_m must be at least 10*m");
  if (!(config.level_alpha > 0.0 && config.level_alpha < 1.0))
    throw ConfigError("diagnostic: level_alpha must be strictly inside (0,1)");
}

std::size_t effective_prepass(const DiagnosticConfig& config) {
  if (config.standardization == Standardization::none) return 0;
  if (config.prepass_m != 0) return config.prepass_m;
  return std::max<std::size_t>(10000, 100 * config.m);
}

// ---- reference tables -------------------------------------------------------

ReferenceTable::ReferenceTable(DiscrepancyMeasure measure, std::size_t m_ref, std::size_t reps,
                               SeedSpec seed, std::vector<double> sorted_stats)
    : measure_(std::move(measure)), m_ref_(m_ref), seed_(std::move(seed)),
      stats_(std::move(sorted_stats)) {
  validate(measure_);
  if (m_ref_ < 1) throw ConfigError("reference table: m_ref must be at least 1");
  if (stats_.empty() || stats_.size() != reps)
    throw ConfigError("reference table: stats size must equal reps");
  for (double v : stats_)
    if (!std::isfinite(v)) throw DomainError("reference table: non-finite statistic");
  if (!std::is_sorted(stats_.begin(), stats_.end()))
    throw DomainError("reference table: statistics not sorted");
  key_ = table_key(measure_, m_ref_);
}

Prob ReferenceTable::cdf(double t) const {
  if (std::isnan(t)) throw DomainError("reference table cdf: NaN argument");
  const auto it = std::upper_bound(stats_.begin(), stats_.end(), t);
  return static_cast<double>(it - stats_.begin()) / static_cast<double>(stats_.size());
}

double ReferenceTable::quantile(Prob p) const {
  const double v = p.value();
  const auto count = static_cast<double>(stats_.size());
  auto idx = static_cast<std::size_t>(std::ceil(v * count));
  if (idx > 0) --idx;
  if (idx >= stats_.size()) idx = stats_.size() - 1;
  return stats_[idx];
}

namespace {

constexpr int kTableFormatVersion = 1;

std::string measure_line(const DiscrepancyMeasure& m) {
  struct Visitor {
    std::string operator()(const KsMeasure&) const { return "ks"; }
    std::string operator()(const SignedKsPlusMeasure&) const { return "sks+"; }
    std::string operator()(const SignedKsMinusMeasure&) const { return "sks-"; }
    std::string operator()(const CvmMeasure&) const { return "cvm"; }
    std::string operator()(const AdMeasure&) const { return "ad"; }
    std::string operator()(const IntervalSupMeasure& v) const {
      return "interval " + format_double_hex(v.lo) + " " + format_double_hex(v.hi);
    }
    std::string operator()(const PointAbsMeasure& v) const {
      return "point " + format_double_hex(v.x);
    }
    std::string operator()(const MomentMeasure& v) const {
      return "moment " + format_double_hex(v.omega.w11) + " " + format_double_hex(v.omega.w12) +
             " " + format_double_hex(v.omega.w22);
    }
  };
  return std::visit(Visitor{}, m);
}

DiscrepancyMeasure parse_measure_line(const std::string& line, const std::string& path) {
  std::istringstream ss(line);
  std::string name;
  ss >> name;
  auto next_hex = [&]() {
    std::string tok;
    if (!(ss >> tok)) throw IoError("reference table " + path + ": truncated measure line");
    const auto v = parse_double(tok);
    if (!v) throw IoError("reference table " + path + ": bad measure parameter '" + tok + "'");
    return *v;
  };
  if (name == "ks") return KsMeasure{};
  if (name == "sks+") return SignedKsPlusMeasure{};
  if (name == "sks-") return SignedKsMinusMeasure{};
  if (name == "cvm") return CvmMeasure{};
  if (name == "ad") return AdMeasure{};
  if (name == "interval") {
    const double lo = next_hex();
    const double hi = next_hex();
    return IntervalSupMeasure{lo, hi};
  }
  if (name == "point") return PointAbsMeasure{next_hex()};
  if (name == "moment") {
    Omega2 w;
    w.w11 = next_hex();
    w.w12 = next_hex();
    w.w22 = next_hex();
    return MomentMeasure{w};
  }
  throw IoError("reference table " + path + ": unknown measure '" + name + "'");
}

}  // namespace

void ReferenceTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open reference table for writing: " + path.string());
  out << "bootdiag-table " << kTableFormatVersion << "\n";
  out << "measure " << measure_line(measure_) << "\n";
  out << "m_ref " << m_ref_ << "\n";
  out << "reps " << stats_.size() << "\n";
  out << "seed " << seed_.master_seed;
  for (std::uint64_t e : seed_.stream_path) out << " " << e;
  out << "\n";
  out << "values " << stats_.size() << "\n";
  for (double v : stats_) out << format_double_hex(v) << "\n";
  if (!out) throw IoError("write failure on reference table: " + path.string());
}

ReferenceTable ReferenceTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open reference table: " + path.string());
  const std::string p = path.string();
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "bootdiag-table")
    throw IoError("reference table " + p + ": bad magic header");
  if (version != kTableFormatVersion)
    throw IoError("reference table " + p + ": unsupported format version " +
                  std::to_string(version));
  if (!(in >> word) || word != "measure")
    throw IoError("reference table " + p + ": missing measure line");
  std::string rest;
  std::getline(in, rest);
  const DiscrepancyMeasure measure = parse_measure_line(rest, p);
  std::size_t m_ref = 0, reps = 0, count = 0;
  if (!(in >> word >> m_ref) || word != "m_ref")
    throw IoError("reference table " + p + ": missing m_ref line");
  if (!(in >> word >> reps) || word != "reps")
    throw IoError("reference table " + p + ": missing reps line");
  if (!(in >> word) || word != "seed")
    throw IoError("reference table " + p + ": missing seed line");
  SeedSpec seed;
  {
    std::getline(in, rest);
    std::istringstream ss(rest);
    if (!(ss >> seed.master_seed))
      throw IoError("reference table " + p + ": bad seed line");
    std::uint64_t e;
    while (ss >> e) seed.stream_path.push_back(e);
  }
  if (!(in >> word >> count) || word != "values")
    throw IoError("reference table " + p + ": missing values line");
  if (count != reps) throw IoError("reference table " + p + ": count does not match reps");
  std::vector<double> stats;
  stats.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string tok;
    if (!(in >> tok)) throw IoError("reference table " + p + ": truncated values block");
    const auto v = parse_double(tok);
    if (!v) throw IoError("reference table " + p + ": bad value '" + tok + "'");
    stats.push_back(*v);
  }
  return ReferenceTable(measure, m_ref, reps, std::move(seed), std::move(stats));
}

ReferenceTable build_reference_table(const DiscrepancyMeasure& measure, std::size_t m_ref,
                                     std::size_t reps, const SeedSpec& seed,
                                     unsigned workers) {
  validate(measure);
  if (norm_type(measure)) {
    if (m_ref < 1000)
      throw ConfigError("build_reference_table: m_ref must be at least 1000");
  } else if (m_ref < 1) {
    throw ConfigError("build_reference_table: m_ref must be at least 1");
  }
  if (reps < 10000) throw ConfigError("build_reference_table: reps must be at least 10000");
  const bool is_norm = norm_type(measure);
  const double scale = is_norm ? std::sqrt(static_cast<double>(m_ref))
                               : static_cast<double>(m_ref);
  std::vector<double> stats(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    const Stream s(seed.child(r));
    std::vector<double> draws(m_ref);
    for (std::size_t j = 0; j < m_ref; ++j) draws[j] = std_normal_at(s, j);
    const SortedSample sample(std::move(draws));
    stats[r] = scale * evaluate_discrepancy(sample, measure).value;
  });
  std::sort(stats.begin(), stats.end());
  return ReferenceTable(measure, m_ref, reps, seed, std::move(stats));
}

void ReferenceLibrary::add(ReferenceTable table) {
  const std::string key = table.key();
  tables_.insert_or_assign(key, std::move(table));
}

const ReferenceTable* ReferenceLibrary::find(const DiscrepancyMeasure& measure,
                                             std::size_t m) const {
  const std::string key =
      table_key(measure, std::holds_alternative<MomentMeasure>(measure) ? m : 0);
  const auto it = tables_.find(key);
  return (it == tables_.end()) ? nullptr : &it->second;
}

// ---- run_test ---------------------------------------------------------------

DiagnosticOutcome evaluate_sample(const SortedSample& sample, const DiscrepancyMeasure& measure,
                                  const ReferenceLibrary* refs) {
  validate(measure);
  const std::size_t m = sample.size();
  const Discrepancy d = evaluate_discrepancy(sample, measure);
  const bool is_norm = norm_type(measure);
  const double t = (is_norm ? std::sqrt(static_cast<double>(m)) : static_cast<double>(m)) *
                   d.value;

  DiagnosticOutcome out;
  out.m = m;
  out.d_star = d;
  out.t_star = t;
  if (std::holds_alternative<KsMeasure>(measure)) {
    out.p_value = Prob(1.0 - kolmogorov_cdf(t).value());
    out.reference = ReferenceKind::kolmogorov_series;
  } else if (std::holds_alternative<SignedKsPlusMeasure>(measure) ||
             std::holds_alternative<SignedKsMinusMeasure>(measure)) {
    out.p_value = Prob(std::exp(-2.0 * t * t));
    out.reference = ReferenceKind::one_sided_exact;
  } else {
    const ReferenceTable* table = (refs != nullptr) ? refs->find(measure, m) : nullptr;
    if (table == nullptr)
      throw MissingTableError("evaluate_sample: no reference table for measure '" +
                              table_key(measure, m) + "'");
    out.p_value = Prob(1.0 - table->cdf(t).value());
    out.reference = ReferenceKind::simulated_table;
    out.table_id = table->key();
  }
  return out;
}

DiagnosticOutcome run_test(const DrawStream& stream, const DiagnosticConfig& config,
                           const ReferenceLibrary* refs) {
  validate(config);
  const std::size_t m = config.m;
  std::vector<double> draws(m);
  for (std::size_t i = 0; i < m; ++i) draws[i] = stream.draw_at(i);

  if (config.standardization != Standardization::none) {
    const std::size_t big_m = effective_prepass(config);
    const auto prepass = stream.prepass_stream();
    // Welford accumulation in fixed index order: deterministic.
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < big_m; ++i) {
      const double x = prepass->draw_at(i);
      const double delta = x - mean;
      mean += delta / static_cast<double>(i + 1);
      m2 += delta * (x - mean);
    }
    const double sd = std::sqrt(m2 / static_cast<double>(big_m));
    if (sd == 0.0) throw DegenerateFitError("run_test: prepass variance exactly zero");
    for (double& d : draws) {
      if (config.standardization == Standardization::location_scale) d -= mean;
      d /= sd;
    }
  }

  return evaluate_sample(SortedSample(std::move(draws)), config.measure, refs);
}

// ---- draw-count rules -------------------------------------------------------

std::size_t choose_m(std::size_t n, const MRule& rule) {
  if (n < 1) throw ConfigError("choose_m: n must be at least 1");
  struct Visitor {
    std::size_t n;
    std::size_t operator()(const LogRule& r) const {
      if (!(r.scale > 0.0)) throw ConfigError("choose_m: log rule scale must be positive");
      const double ln_up = std::ceil(std::log(static_cast<double>(n)));
      const auto m = static_cast<std::size_t>(std::ceil(r.scale * ln_up));
      return std::max<std::size_t>(10, m);
    }
    std::size_t operator()(const PowerRule& r) const {
      if (!(r.gamma > 0.0 && r.gamma < 0.5))
        throw ConfigError("choose_m: power rule gamma must be strictly inside (0,1/2)");
      const auto m = static_cast<std::size_t>(
          std::ceil(std::pow(static_cast<double>(n), r.gamma)));
      return std::max<std::size_t>(10, m);
    }
  };
  return std::visit(Visitor{n}, rule);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  grid.reserve(100);
  for (int i = 0; i < 99; ++i)
    grid.push_back(0.001 + static_cast<double>(i) * (0.100 - 0.001) / 98.0);
  grid.push_back(0.05);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// ---- rejection profiles -----------------------------------------------------

RejectionProfile profile_from_pvalues(std::vector<double> p_values, std::size_t degenerate,
                                      std::size_t m, std::span<const double> alphas) {
  if (p_values.empty()) throw ConfigError("rejection profile: no completed tests");
  std::sort(p_values.begin(), p_values.end());
  const double k = static_cast<double>(p_values.size());
  RejectionProfile out;
  out.alphas.assign(alphas.begin(), alphas.end());
  out.pi_hat.reserve(alphas.size());
  out.tests = p_values.size();
  out.degenerate = degenerate;
  out.m = m;
  double sup = 0.0;
  for (double a : alphas) {
    const auto it = std::upper_bound(p_values.begin(), p_values.end(), a);
    const double pi = static_cast<double>(it - p_values.begin()) / k;
    out.pi_hat.push_back(pi);
    sup = std::max(sup, std::fabs(pi - a));
  }
  out.uniform_band_stat = std::sqrt(k) * sup;
  return out;
}

RejectionProfile rejection_profile(const std::vector<const DrawStream*>& streams,
                                   const DiagnosticConfig& config,
                                   std::span<const double> alphas,
                                   const ReferenceLibrary* refs, unsigned workers) {
  validate(config);
  const std::size_t k = streams.size();
  if (k == 0) throw ConfigError("rejection profile: needs at least one stream");
  std::vector<double> pvals(k);
  std::vector<char> ok(k, 0);
  parallel_for(k, workers, [&](std::size_t i) {
    try {
      pvals[i] = run_test(*streams[i], config, refs).p_value.value();
      ok[i] = 1;
    } catch (const DegenerateFitError&) {
      ok[i] = 0;
    }
  });
  std::vector<double> completed;
  completed.reserve(k);
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (ok[i])
      completed.push_back(pvals[i]);
    else
      ++degenerate;
  }
  if (completed.empty())
    throw DegenerateFitError("rejection profile: every stream degenerate");
  return profile_from_pvalues(std::move(completed), degenerate, config.m, alphas);
}

}  // namespace bootdiag

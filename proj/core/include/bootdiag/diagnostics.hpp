// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bootdiag/discrepancy.hpp"
#include "bootdiag/models.hpp"

namespace bootdiag {

// Optional draw transforms estimated on a prepass over the same conditional
// law.  ScaleOnly divides by the prepass standard deviation; LocationScale
// also subtracts the prepass mean.
enum class Standardization { none, scale_only, location_scale };

struct DiagnosticConfig {
  std::size_t m = 20;
  DiscrepancyMeasure measure = KsMeasure{};
  Standardization standardization = Standardization::none;
  // 0 selects the default max(10000, 100*m); any explicit value must be at
  // least 10*m.
  std::size_t prepass_m = 0;
  double level_alpha = 0.05;
};

void validate(const DiagnosticConfig& config);

// Prepass length actually used by run_test for this config.
std::size_t effective_prepass(const DiagnosticConfig& config);

// Which null reference produced the p-value.
enum class ReferenceKind {
  kolmogorov_series,  // closed-form Kolmogorov limit law
  one_sided_exact,    // exp(-2 t^2) one-sided limit
  simulated_table,    // finite-sample simulated reference table
};

struct DiagnosticOutcome {
  std::size_t m = 0;
  Discrepancy d_star{0.0, KsMeasure{}};
  double t_star = 0.0;
  Prob p_value{1.0};
  ReferenceKind reference = ReferenceKind::kolmogorov_series;
  std::string table_id;  // empty unless reference == simulated_table
};

// ---- simulated reference tables ---------------------------------------------

// Sorted null statistics simulated from exact standard normal draws.  The
// moment measure's law depends on the draw count, so its tables are exact at
// m == m_ref and keyed accordingly; norm-type tables are asymptotic stand-ins
// usable at any m.
class ReferenceTable {
 public:
  ReferenceTable(DiscrepancyMeasure measure, std::size_t m_ref, std::size_t reps,
                 SeedSpec seed, std::vector<double> sorted_stats);

  [[nodiscard]] const DiscrepancyMeasure& measure() const noexcept { return measure_; }
  [[nodiscard]] const std::string& key() const noexcept { return key_; }
  [[nodiscard]] std::size_t m_ref() const noexcept { return m_ref_; }
  [[nodiscard]] std::size_t reps() const noexcept { return stats_.size(); }
  [[nodiscard]] const SeedSpec& seed() const noexcept { return seed_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return stats_; }

  // Fraction of simulated null statistics <= t.
  [[nodiscard]] Prob cdf(double t) const;

  // Order-statistic quantile of the simulated null law.
  [[nodiscard]] double quantile(Prob p) const;

  // Versioned text cache with hexfloat payload: reloading is bit-exact.
  void save(const std::filesystem::path& path) const;
  static ReferenceTable load(const std::filesystem::path& path);

 private:
  DiscrepancyMeasure measure_;
  std::string key_;
  std::size_t m_ref_;
  SeedSpec seed_;
  std::vector<double> stats_;
};

// Simulates a reference table from exact N(0,1) draws.  Norm-type measures
// require m_ref >= 1000 and reps >= 10000; the moment measure only reps >=
// 10000 (its m_ref is the target draw count, which may be small).
ReferenceTable build_reference_table(const DiscrepancyMeasure& measure, std::size_t m_ref,
                                     std::size_t reps, const SeedSpec& seed,
                                     unsigned workers = 1);

// In-memory table collection keyed by table_key().
class ReferenceLibrary {
 public:
  void add(ReferenceTable table);
  [[nodiscard]] const ReferenceTable* find(const DiscrepancyMeasure& measure,
                                           std::size_t m) const;
  [[nodiscard]] std::size_t size() const noexcept { return tables_.size(); }

 private:
  std::map<std::string, ReferenceTable> tables_;
};

// ---- the diagnostic test ----------------------------------------------------

// Distance, scaled statistic, and p-value for an already-assembled sample of
// m draws.  Measures without a closed-form null need a matching table in
// `refs`, else MissingTableError.
DiagnosticOutcome evaluate_sample(const SortedSample& sample, const DiscrepancyMeasure& measure,
                                  const ReferenceLibrary* refs = nullptr);

// Runs the diagnostic on draws 0..m-1 of the stream.  Pure in its inputs:
// the same stream and config give bit-identical outcomes, regardless of any
// prior cursor use of the stream.
DiagnosticOutcome run_test(const DrawStream& stream, const DiagnosticConfig& config,
                           const ReferenceLibrary* refs = nullptr);

// ---- draw-count rules -------------------------------------------------------

// m = max(10, ceil(scale * ln n)).
struct LogRule {
  double scale = 3.0;
};
// m = max(10, ceil(n^gamma)); requires gamma in (0, 1/2).
struct PowerRule {
  double gamma = 0.25;
};
using MRule = std::variant<LogRule, PowerRule>;

std::size_t choose_m(std::size_t n, const MRule& rule);

// ---- rejection profiles -----------------------------------------------------

// 99 evenly spaced levels on [0.001, 0.10] plus 0.05 exactly.
std::vector<double> default_alpha_grid();

struct RejectionProfile {
  std::vector<double> alphas;
  std::vector<double> pi_hat;   // rejection rate at each level
  std::size_t tests = 0;        // completed tests K
  std::size_t degenerate = 0;   // streams abandoned on degenerate redraws
  std::size_t m = 0;
  // sqrt(K) * sup over the level grid of |pi_hat - alpha|.
  double uniform_band_stat = 0.0;
};

// One run_test per stream; pi_hat from the pooled p-values.
RejectionProfile rejection_profile(const std::vector<const DrawStream*>& streams,
                                   const DiagnosticConfig& config,
                                   std::span<const double> alphas,
                                   const ReferenceLibrary* refs = nullptr,
                                   unsigned workers = 1);

// Profile from already-computed p-values (used by the external-pool driver).
RejectionProfile profile_from_pvalues(std::vector<double> p_values, std::size_t degenerate,
                                      std::size_t m, std::span<const double> alphas);

}  // namespace bootdiag

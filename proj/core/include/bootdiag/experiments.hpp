// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bootdiag/diagnostics.hpp"
#include "bootdiag/models.hpp"

namespace bootdiag {

// Shared experiment layout: R datasets per scenario, K tests per dataset.
// Dataset r of scenario index s is seeded at seed.child(s).child(r); test k
// of that dataset draws from seed.child(s).child(r).child(1).child(k).
// Results are reduced in index order, so output is byte-identical for any
// worker count.
struct ExperimentPlan {
  std::vector<ScenarioSpec> scenarios;
  DiagnosticConfig diagnostic;
  std::size_t datasets = 500;          // R
  std::size_t tests_per_dataset = 1;   // K
  SeedSpec seed;
  std::vector<double> alphas = {0.01, 0.05, 0.10};
  unsigned workers = 1;
};

void validate(const ExperimentPlan& plan);

// ---- size and power ---------------------------------------------------------

struct SizePowerRow {
  std::string scenario;
  std::size_t n = 0;
  std::size_t m = 0;
  std::string measure;
  std::vector<double> alphas;
  std::vector<double> rates;       // rejection rate at each level
  std::vector<double> std_errors;  // sqrt(rate*(1-rate)/datasets_completed)
  std::size_t datasets = 0;        // requested R
  std::size_t degenerate = 0;      // datasets abandoned on degenerate fits/redraws
  bool ok = true;                  // false when degenerate exceeds 1% of R
};

// One row per scenario in the plan.
std::vector<SizePowerRow> size_power_table(const ExperimentPlan& plan,
                                           const ReferenceLibrary* refs = nullptr);

// ---- conditioning on the diagnostic ----------------------------------------

// Post statistic whose conditional law is examined; each applies only to the
// matching scenario family.
enum class PostStatistic {
  iv_t,    // sqrt(n) * beta_hat * |pi_hat|
  ar1_t,   // (alpha_hat - alpha0) / se
  mean_t,  // location t-ratio (boundary, heavytail, delta)
};

struct PostTestReport {
  double threshold = 0.0;           // keep datasets with t_star <= threshold
  std::size_t datasets = 0;         // requested R
  std::size_t kept = 0;             // datasets passing the condition
  std::size_t degenerate = 0;
  std::vector<double> unconditional;  // sorted post statistics, all datasets
  std::vector<double> conditional;    // sorted post statistics, kept datasets
  double sup_vs_normal = 0.0;         // sup |edf(conditional) - Phi|
  double sup_vs_unconditional = 0.0;  // two-sample sup distance
};

PostTestReport post_test_bias(const ScenarioSpec& scenario, const DiagnosticConfig& diagnostic,
                              PostStatistic post, double threshold, std::size_t datasets,
                              const SeedSpec& seed, unsigned workers = 1,
                              const ReferenceLibrary* refs = nullptr);

// ---- fan charts -------------------------------------------------------------

inline constexpr std::array<double, 7> kFanQuantiles = {0.01, 0.10, 0.25,
                                                        0.50, 0.75, 0.90, 0.99};

// Pointwise envelope of bootstrap edfs across datasets: bands[q][j] is the
// kFanQuantiles[q] order statistic of edf(x[j]) over datasets.
struct FanChartData {
  std::vector<double> x;
  std::array<std::vector<double>, 7> bands;
  std::size_t datasets = 0;  // requested M
  std::size_t draws = 0;     // B per dataset
  std::size_t degenerate = 0;
};

FanChartData fan_chart(const ScenarioSpec& scenario, std::size_t datasets, std::size_t draws,
                       std::span<const double> x_grid, const SeedSpec& seed,
                       unsigned workers = 1);

// ---- uniform-band summary ---------------------------------------------------

struct BandDiagnostic {
  double statistic = 0.0;  // sqrt(K) * sup |pi_hat - alpha|
  Prob p_value{1.0};       // descriptive, from the Kolmogorov limit law
};

BandDiagnostic band_diagnostic(const RejectionProfile& profile);

// ---- CSV writers ------------------------------------------------------------
// All numbers use shortest round-trip formatting; output is a pure function
// of the data, hence byte-identical across runs and worker counts.

std::string size_power_csv(const std::vector<SizePowerRow>& rows);
std::string fan_chart_csv(const FanChartData& data);
std::string post_test_csv(const PostTestReport& report);
std::string profile_csv(const RejectionProfile& profile);

}  // namespace bootdiag

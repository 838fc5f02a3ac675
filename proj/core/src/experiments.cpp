// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bootdiag/format.hpp"
#include "bootdiag/parallel.hpp"

namespace bootdiag {

namespace {

// Sub-stream tag separating the test draws from the dataset draw space.
constexpr std::uint64_t kTestTag = 1;

void validate_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("plan: alphas must be nonempty");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("plan: every level must be strictly inside (0,1)");
}

std::size_t order_stat_index(double q, std::size_t count) {
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(count)));
  if (idx > 0) --idx;
  if (idx >= count) idx = count - 1;
  return idx;
}

}  // namespace

void validate(const ExperimentPlan& plan) {
  if (plan.scenarios.empty()) throw ConfigError("plan: scenarios must be nonempty");
  for (const auto& s : plan.scenarios) validate(s);
  validate(plan.diagnostic);
  if (plan.datasets < 1) throw ConfigError("plan: datasets must be at least 1");
  if (plan.tests_per_dataset < 1)
    throw ConfigError("plan: tests_per_dataset must be at least 1");
  validate_alphas(plan.alphas);
  if (plan.workers < 1) throw ConfigError("plan: workers must be at least 1");
}

std::vector<SizePowerRow> size_power_table(const ExperimentPlan& plan,
                                           const ReferenceLibrary* refs) {
  validate(plan);
  const std::size_t r_total = plan.datasets;
  const std::size_t k_tests = plan.tests_per_dataset;
  const std::size_t n_alpha = plan.alphas.size();
  std::vector<SizePowerRow> rows;
  rows.reserve(plan.scenarios.size());

  for (std::size_t si = 0; si < plan.scenarios.size(); ++si) {
    const ScenarioSpec& scenario = plan.scenarios[si];
    // Per-dataset slots: rejection counts per level, or the degenerate flag.
    std::vector<std::vector<std::uint32_t>> counts(r_total);
    std::vector<char> bad(r_total, 0);
    parallel_for(r_total, plan.workers, [&](std::size_t r) {
      const SeedSpec dataset_seed = plan.seed.child(si).child(r);
      try {
        const FittedModel fitted = simulate(scenario, dataset_seed);
        std::vector<std::uint32_t> local(n_alpha, 0);
        for (std::size_t k = 0; k < k_tests; ++k) {
          const ModelDrawStream stream(fitted, dataset_seed.child(kTestTag).child(k));
          const double p = run_test(stream, plan.diagnostic, refs).p_value.value();
          for (std::size_t a = 0; a < n_alpha; ++a)
            if (p <= plan.alphas[a]) ++local[a];
        }
        counts[r] = std::move(local);
      } catch (const DegenerateFitError&) {
        bad[r] = 1;
      } catch (const DegenerateTailError&) {
        bad[r] = 1;
      }
    });

    SizePowerRow row;
    row.scenario = scenario_label(scenario);
    row.n = scenario_n(scenario);
    row.m = plan.diagnostic.m;
    row.measure = measure_label(plan.diagnostic.measure);
    row.alphas = plan.alphas;
    row.datasets = r_total;
    std::vector<std::uint64_t> total(n_alpha, 0);
    std::size_t completed = 0;
    for (std::size_t r = 0; r < r_total; ++r) {
      if (bad[r]) {
        ++row.degenerate;
        continue;
      }
      ++completed;
      for (std::size_t a = 0; a < n_alpha; ++a) total[a] += counts[r][a];
    }
    if (completed == 0) throw DegenerateFitError("size_power_table: every dataset degenerate");
    row.rates.resize(n_alpha);
    row.std_errors.resize(n_alpha);
    const double denom = static_cast<double>(completed * k_tests);
    for (std::size_t a = 0; a < n_alpha; ++a) {
      const double rate = static_cast<double>(total[a]) / denom;
      row.rates[a] = rate;
      row.std_errors[a] = std::sqrt(rate * (1.0 - rate) / static_cast<double>(completed));
    }
    row.ok = (static_cast<double>(row.degenerate) <= 0.01 * static_cast<double>(r_total));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

double post_statistic_value(PostStatistic post, const FittedModel& fitted) {
  const ScenarioSpec& spec = fitted.spec();
  switch (post) {
    case PostStatistic::iv_t: {
      if (!std::holds_alternative<IvSpec>(spec))
        throw ConfigError("post_test_bias: iv_t needs the iv scenario");
      return original_statistic(fitted);
    }
    case PostStatistic::ar1_t: {
      if (!std::holds_alternative<Ar1Spec>(spec))
        throw ConfigError("post_test_bias: ar1_t needs the ar1 scenario");
      return original_statistic(fitted);
    }
    case PostStatistic::mean_t: {
      if (const auto* bs = std::get_if<BoundarySpec>(&spec)) {
        const auto& f = std::get<BoundaryFit>(fitted.fit());
        const double rn = std::sqrt(static_cast<double>(bs->n));
        return rn * (f.ybar - boundary_theta0(*bs));  // unit known variance
      }
      if (const auto* hs = std::get_if<HeavyTailSpec>(&spec)) {
        const auto& f = std::get<HeavyFit>(fitted.fit());
        return std::sqrt(static_cast<double>(hs->n)) * f.theta_hat / f.sigma_hat;
      }
      if (const auto* ds = std::get_if<DeltaSpec>(&spec)) {
        const auto& f = std::get<DeltaFit>(fitted.fit());
        return std::sqrt(static_cast<double>(ds->n)) * (f.theta_hat - delta_theta0(*ds)) /
               f.sigma_hat;
      }
      throw ConfigError("post_test_bias: mean_t needs a location scenario");
    }
  }
  throw ConfigError("post_test_bias: unknown post statistic");
}

}  // namespace

PostTestReport post_test_bias(const ScenarioSpec& scenario, const DiagnosticConfig& diagnostic,
                              PostStatistic post, double threshold, std::size_t datasets,
                              const SeedSpec& seed, unsigned workers,
                              const ReferenceLibrary* refs) {
  validate(scenario);
  validate(diagnostic);
  if (datasets < 1) throw ConfigError("post_test_bias: datasets must be at least 1");
  if (!std::isfinite(threshold)) throw ConfigError("post_test_bias: threshold must be finite");

  struct Slot {
    double rho = 0.0;
    double t_star = 0.0;
    char ok = 0;
  };
  std::vector<Slot> slots(datasets);
  parallel_for(datasets, workers, [&](std::size_t r) {
    const SeedSpec dataset_seed = seed.child(r);
    try {
      const FittedModel fitted = simulate(scenario, dataset_seed);
      const double rho = post_statistic_value(post, fitted);
      const ModelDrawStream stream(fitted, dataset_seed.child(kTestTag).child(0));
      const DiagnosticOutcome outcome = run_test(stream, diagnostic, refs);
      slots[r] = {rho, outcome.t_star, 1};
    } catch (const DegenerateFitError&) {
      slots[r].ok = 0;
    } catch (const DegenerateTailError&) {
      slots[r].ok = 0;
    }
  });

  PostTestReport report;
  report.threshold = threshold;
  report.datasets = datasets;
  for (const Slot& s : slots) {
    if (!s.ok) {
      ++report.degenerate;
      continue;
    }
    report.unconditional.push_back(s.rho);
    if (s.t_star <= threshold) report.conditional.push_back(s.rho);
  }
  if (report.unconditional.empty())
    throw DegenerateFitError("post_test_bias: every dataset degenerate");
  if (report.conditional.empty())
    throw DegenerateFitError("post_test_bias: conditioning event never occurred");
  report.kept = report.conditional.size();
  std::sort(report.unconditional.begin(), report.unconditional.end());
  std::sort(report.conditional.begin(), report.conditional.end());
  const SortedSample cond = SortedSample::from_sorted(report.conditional);
  const SortedSample uncond = SortedSample::from_sorted(report.unconditional);
  report.sup_vs_normal = ks_distance(cond).value;
  report.sup_vs_unconditional = two_sample_sup_distance(cond, uncond);
  return report;
}

FanChartData fan_chart(const ScenarioSpec& scenario, std::size_t datasets, std::size_t draws,
                       std::span<const double> x_grid, const SeedSpec& seed,
                       unsigned workers) {
  validate(scenario);
  if (datasets < 1) throw ConfigError("fan_chart: datasets must be at least 1");
  if (draws < 1) throw ConfigError("fan_chart: draws must be at least 1");
  if (x_grid.empty()) throw ConfigError("fan_chart: x grid must be nonempty");
  for (double x : x_grid)
    if (!std::isfinite(x)) throw ConfigError("fan_chart: x grid must be finite");
  if (!std::is_sorted(x_grid.begin(), x_grid.end()))
    throw ConfigError("fan_chart: x grid must be sorted ascending");

  const std::size_t nx = x_grid.size();
  std::vector<std::vector<double>> edf_rows(datasets);
  std::vector<char> bad(datasets, 0);
  parallel_for(datasets, workers, [&](std::size_t r) {
    const SeedSpec dataset_seed = seed.child(r);
    try {
      const FittedModel fitted = simulate(scenario, dataset_seed);
      const ModelDrawStream stream(fitted, dataset_seed.child(kTestTag).child(0));
      std::vector<double> sample(draws);
      for (std::size_t b = 0; b < draws; ++b) sample[b] = stream.draw_at(b);
      const SortedSample sorted(std::move(sample));
      std::vector<double> row(nx);
      for (std::size_t j = 0; j < nx; ++j) row[j] = sorted.edf(x_grid[j]).value();
      edf_rows[r] = std::move(row);
    } catch (const DegenerateFitError&) {
      bad[r] = 1;
    } catch (const DegenerateTailError&) {
      bad[r] = 1;
    }
  });

  FanChartData out;
  out.x.assign(x_grid.begin(), x_grid.end());
  out.datasets = datasets;
  out.draws = draws;
  std::vector<std::size_t> keep;
  keep.reserve(datasets);
  for (std::size_t r = 0; r < datasets; ++r) {
    if (bad[r])
      ++out.degenerate;
    else
      keep.push_back(r);
  }
  if (keep.empty()) throw DegenerateFitError("fan_chart: every dataset degenerate");
  std::vector<double> column(keep.size());
  for (auto& band : out.bands) band.resize(nx);
  for (std::size_t j = 0; j < nx; ++j) {
    for (std::size_t i = 0; i < keep.size(); ++i) column[i] = edf_rows[keep[i]][j];
    std::sort(column.begin(), column.end());
    for (std::size_t q = 0; q < kFanQuantiles.size(); ++q)
      out.bands[q][j] = column[order_stat_index(kFanQuantiles[q], column.size())];
  }
  return out;
}

BandDiagnostic band_diagnostic(const RejectionProfile& profile) {
  BandDiagnostic out;
  out.statistic = profile.uniform_band_stat;
  out.p_value = Prob(1.0 - kolmogorov_cdf(out.statistic).value());
  return out;
}

// ---- CSV writers ------------------------------------------------------------

std::string size_power_csv(const std::vector<SizePowerRow>& rows) {
  std::ostringstream out;
  out << "scenario,n,m,measure,alpha,rate,std_error,datasets,degenerate,ok\n";
  for (const auto& row : rows) {
    for (std::size_t a = 0; a < row.alphas.size(); ++a) {
      out << row.scenario << ',' << row.n << ',' << row.m << ',' << row.measure << ','
          << format_double(row.alphas[a]) << ',' << format_double(row.rates[a]) << ','
          << format_double(row.std_errors[a]) << ',' << row.datasets << ','
          << row.degenerate << ',' << (row.ok ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string fan_chart_csv(const FanChartData& data) {
  std::ostringstream out;
  out << "x,q01,q10,q25,q50,q75,q90,q99\n";
  for (std::size_t j = 0; j < data.x.size(); ++j) {
    out << format_double(data.x[j]);
    for (const auto& band : data.bands) out << ',' << format_double(band[j]);
    out << '\n';
  }
  return out.str();
}

std::string post_test_csv(const PostTestReport& report) {
  std::ostringstream out;
  out << "threshold,datasets,kept,degenerate,sup_vs_normal,sup_vs_unconditional\n";
  out << format_double(report.threshold) << ',' << report.datasets << ',' << report.kept << ','
      << report.degenerate << ',' << format_double(report.sup_vs_normal) << ','
      << format_double(report.sup_vs_unconditional) << '\n';
  return out.str();
}

std::string profile_csv(const RejectionProfile& profile) {
  std::ostringstream out;
  out << "alpha,pi_hat\n";
  for (std::size_t i = 0; i < profile.alphas.size(); ++i)
    out << format_double(profile.alphas[i]) << ',' << format_double(profile.pi_hat[i]) << '\n';
  return out.str();
}

}  // namespace bootdiag

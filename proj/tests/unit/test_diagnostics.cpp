// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bootdiag/diagnostics.hpp"
#include "bootdiag/models.hpp"
#include "bootdiag/probkernel.hpp"

namespace {

using namespace bootdiag;

// Tables shared by the cases below; built once.
const ReferenceLibrary& shared_tables() {
  static const ReferenceLibrary lib = [] {
    ReferenceLibrary l;
    l.add(build_reference_table(CvmMeasure{}, 1000, 10000, SeedSpec{31337, {0xC}}, 4));
    l.add(build_reference_table(MomentMeasure{}, 20, 10000, SeedSpec{31337, {0xD}}, 4));
    l.add(build_reference_table(DiscrepancyMeasure{IntervalSupMeasure{-1.0, 1.0}}, 1000, 10000,
                                SeedSpec{31337, {0xE}}, 4));
    return l;
  }();
  return lib;
}

double uniform_ks(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double k = static_cast<double>(p.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sup = std::max(sup, (static_cast<double>(i) + 1.0) / k - p[i]);
    sup = std::max(sup, p[i] - static_cast<double>(i) / k);
  }
  return sup;
}

std::filesystem::path temp_table_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "bootdiag_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("diagnostic config validation") {
  DiagnosticConfig c;
  CHECK_NOTHROW(validate(c));
  c.m = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.m = 20;
  c.level_alpha = 0.0;
  CHECK_THROWS_WITH_AS(validate(c), "diagnostic: level_alpha must be strictly inside (0,1)",
                       ConfigError);
  c.level_alpha = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.level_alpha = 0.05;
  c.standardization = Standardization::scale_only;
  c.prepass_m = 199;  // below 10*m
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.prepass_m = 200;
  CHECK_NOTHROW(validate(c));
  // Without standardization the prepass length is ignored by run_test, but a
  // nonzero value must still be coherent.
  CHECK(effective_prepass(DiagnosticConfig{.m = 20}) == 0);
  CHECK(effective_prepass(DiagnosticConfig{
            .m = 20, .standardization = Standardization::scale_only}) == 10000);
  CHECK(effective_prepass(DiagnosticConfig{
            .m = 200, .standardization = Standardization::location_scale}) == 20000);
  CHECK(effective_prepass(DiagnosticConfig{.m = 20,
                                           .standardization = Standardization::scale_only,
                                           .prepass_m = 5000}) == 5000);
}

TEST_CASE("scaled statistic uses root m for sup measures and m for the moment form") {
  const DirectNormalStream s(SeedSpec{100, {1}});
  const auto ks = run_test(s, DiagnosticConfig{.m = 100});
  CHECK(ks.m == 100);
  CHECK(ks.t_star == 10.0 * ks.d_star.value);
  CHECK(ks.reference == ReferenceKind::kolmogorov_series);
  CHECK(ks.table_id.empty());
  const auto mm = run_test(
      s, DiagnosticConfig{.m = 20, .measure = MomentMeasure{}}, &shared_tables());
  CHECK(mm.t_star == 20.0 * mm.d_star.value);
  CHECK(mm.reference == ReferenceKind::simulated_table);
  CHECK(mm.table_id == table_key(MomentMeasure{}, 20));
}

TEST_CASE("p-values follow the declared references") {
  const DirectNormalStream s(SeedSpec{101, {1}});
  {
    const auto out = run_test(s, DiagnosticConfig{.m = 50});
    CHECK(out.p_value.value() == 1.0 - kolmogorov_cdf(out.t_star).value());
  }
  {
    const auto out = run_test(s, DiagnosticConfig{.m = 50, .measure = SignedKsPlusMeasure{}});
    CHECK(out.p_value.value() == std::exp(-2.0 * out.t_star * out.t_star));
    CHECK(out.reference == ReferenceKind::one_sided_exact);
  }
  {
    const auto out = run_test(s, DiagnosticConfig{.m = 50, .measure = SignedKsMinusMeasure{}});
    CHECK(out.p_value.value() == std::exp(-2.0 * out.t_star * out.t_star));
  }
  {
    const auto out = run_test(s, DiagnosticConfig{.m = 50, .measure = CvmMeasure{}},
                              &shared_tables());
    const ReferenceTable* table = shared_tables().find(CvmMeasure{}, 50);
    REQUIRE(table != nullptr);
    CHECK(out.p_value.value() == 1.0 - table->cdf(out.t_star).value());
  }
}

TEST_CASE("larger distances give smaller p-values") {
  // Push the sample away from the null by shifting: distance grows, p falls.
  std::vector<double> base = sample_std_normal(SeedSpec{102, {1}}, 200);
  double last_p = 1.1;
  for (double shift : {0.0, 0.1, 0.2, 0.4}) {
    std::vector<double> shifted = base;
    for (double& x : shifted) x += shift;
    const auto out = evaluate_sample(SortedSample(std::move(shifted)), KsMeasure{});
    CHECK(out.p_value.value() < last_p);
    CHECK(out.p_value.value() > 0.0);
    last_p = out.p_value.value();
  }
  // Far from the null the closed-form tail underflows to an exact zero.
  std::vector<double> far = base;
  for (double& x : far) x += 3.0;
  CHECK(evaluate_sample(SortedSample(std::move(far)), KsMeasure{}).p_value.value() == 0.0);
}

TEST_CASE("missing tables are reported with the lookup key") {
  const DirectNormalStream s(SeedSpec{103, {1}});
  try {
    run_test(s, DiagnosticConfig{.m = 20, .measure = MomentMeasure{}});
    FAIL("expected MissingTableError");
  } catch (const MissingTableError& e) {
    CHECK(std::string(e.what()).find("moment:m20") != std::string::npos);
  }
  // A moment table is exact only at its own draw count.
  CHECK_THROWS_AS(
      run_test(s, DiagnosticConfig{.m = 40, .measure = MomentMeasure{}}, &shared_tables()),
      MissingTableError);
  // Norm-type tables stand in for any draw count.
  CHECK_NOTHROW(run_test(
      s, DiagnosticConfig{.m = 40, .measure = IntervalSupMeasure{-1.0, 1.0}},
      &shared_tables()));
}

TEST_CASE("standardization matches a direct reimplementation") {
  const ScenarioSpec spec{HeavyTailSpec{.n = 300, .scheme = HeavyScheme::iid_resample}};
  const auto fitted = simulate(spec, SeedSpec{44, {0, 0}});
  const ModelDrawStream stream(fitted, SeedSpec{44, {0, 0, 1, 0}});
  for (const auto mode : {Standardization::scale_only, Standardization::location_scale}) {
    const DiagnosticConfig cfg{.m = 30, .standardization = mode, .prepass_m = 600};
    const auto out = run_test(stream, cfg);
    // Recompute with naive two-pass moments over the same prepass draws.
    const auto prepass = stream.prepass_stream();
    std::vector<double> pre(600);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = prepass->draw_at(i);
    double mean = 0.0;
    for (double x : pre) mean += x;
    mean /= 600.0;
    double var = 0.0;
    for (double x : pre) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / 600.0);
    std::vector<double> draws(30);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      draws[i] = stream.draw_at(i);
      if (mode == Standardization::location_scale) draws[i] -= mean;
      draws[i] /= sd;
    }
    const auto manual = evaluate_sample(SortedSample(std::move(draws)), cfg.measure);
    CHECK(std::fabs(out.t_star - manual.t_star) <= 1e-10);
    CHECK(std::fabs(out.p_value.value() - manual.p_value.value()) <= 1e-10);
  }
}

TEST_CASE("run_test is deterministic and ignores the cursor") {
  const ScenarioSpec spec{Ar1Spec{.n = 120}};
  const auto fitted = simulate(spec, SeedSpec{45, {0, 0}});
  ModelDrawStream stream(fitted, SeedSpec{45, {0, 0, 1, 0}});
  const DiagnosticConfig cfg{.m = 25, .standardization = Standardization::location_scale};
  const auto first = run_test(stream, cfg);
  bootstrap_draw(stream);
  bootstrap_draw(stream);
  const auto again = run_test(stream, cfg);
  CHECK(first.t_star == again.t_star);
  CHECK(first.p_value.value() == again.p_value.value());
  CHECK(first.d_star.value == again.d_star.value);
}

TEST_CASE("evaluate_sample agrees with run_test on raw draws") {
  const DirectNormalStream s(SeedSpec{104, {1}});
  std::vector<double> draws(50);
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = s.draw_at(i);
  const auto manual = evaluate_sample(SortedSample(std::move(draws)), KsMeasure{});
  const auto full = run_test(s, DiagnosticConfig{.m = 50});
  CHECK(manual.t_star == full.t_star);
  CHECK(manual.p_value.value() == full.p_value.value());
}

TEST_CASE("reference table construction rejects bad inputs") {
  CHECK_THROWS_AS(build_reference_table(KsMeasure{}, 500, 10000, SeedSpec{1, {}}),
                  ConfigError);
  CHECK_THROWS_AS(build_reference_table(KsMeasure{}, 1000, 5000, SeedSpec{1, {}}),
                  ConfigError);
  CHECK_THROWS_AS(build_reference_table(MomentMeasure{}, 0, 10000, SeedSpec{1, {}}),
                  ConfigError);
  CHECK_THROWS_AS(ReferenceTable(KsMeasure{}, 1000, 3, SeedSpec{1, {}}, {3.0, 2.0, 1.0}),
                  DomainError);
  CHECK_THROWS_AS(ReferenceTable(KsMeasure{}, 1000, 2, SeedSpec{1, {}}, {1.0, 2.0, 3.0}),
                  ConfigError);
}

TEST_CASE("reference table cdf and quantile are coherent") {
  // A hand-made table with a transparent law: values 1..100.
  std::vector<double> vals(100);
  for (std::size_t i = 0; i < 100; ++i) vals[i] = static_cast<double>(i + 1);
  const ReferenceTable t(PointAbsMeasure{0.0}, 1, 100, SeedSpec{0, {}}, std::move(vals));
  CHECK(t.cdf(0.5).value() == 0.0);
  CHECK(t.cdf(1.0).value() == 0.01);
  CHECK(t.cdf(50.0).value() == 0.5);
  CHECK(t.cdf(100.0).value() == 1.0);
  CHECK(t.cdf(1e9).value() == 1.0);
  CHECK(t.quantile(Prob(0.5)) == 50.0);
  CHECK(t.quantile(Prob(0.95)) == 95.0);
  CHECK(t.quantile(Prob(1.0)) == 100.0);
  CHECK(t.quantile(Prob(0.0)) == 1.0);
  for (double p : {0.1, 0.33, 0.77, 0.99}) {
    CHECK(t.cdf(t.quantile(Prob(p))).value() >= p - 1e-12);
  }
}

TEST_CASE("reference tables reload bit-exact") {
  const auto table =
      build_reference_table(MomentMeasure{}, 20, 10000, SeedSpec{9001, {7, 8}}, 2);
  const auto path = temp_table_path("roundtrip.table");
  table.save(path);
  const auto back = ReferenceTable::load(path);
  CHECK(back.values() == table.values());
  CHECK(back.key() == table.key());
  CHECK(back.m_ref() == table.m_ref());
  CHECK(back.reps() == table.reps());
  CHECK(back.seed() == table.seed());
  // Interval parameters survive the hexfloat round trip exactly.
  const std::vector<double> stats = table.values();
  const ReferenceTable it(DiscrepancyMeasure{IntervalSupMeasure{-0.1, 0.30000000000000004}},
                          1000, stats.size(), SeedSpec{1, {2}}, stats);
  const auto ipath = temp_table_path("interval.table");
  it.save(ipath);
  const auto iback = ReferenceTable::load(ipath);
  const auto& im = std::get<IntervalSupMeasure>(iback.measure());
  CHECK(im.lo == -0.1);
  CHECK(im.hi == 0.30000000000000004);
  CHECK(iback.key() == it.key());
}

TEST_CASE("reference table load failures carry the path") {
  CHECK_THROWS_AS(ReferenceTable::load(temp_table_path("missing.table")), IoError);
  const auto bad = temp_table_path("bad.table");
  std::ofstream(bad) << "not-a-table 1\n";
  CHECK_THROWS_AS(ReferenceTable::load(bad), IoError);
  const auto trunc = temp_table_path("trunc.table");
  std::ofstream(trunc) << "bootdiag-table 1\nmeasure ks\nm_ref 1000\nreps 3\nseed 1\nvalues 3\n"
                       << "0x1p+0\n0x1p+1\n";
  CHECK_THROWS_AS(ReferenceTable::load(trunc), IoError);
}

TEST_CASE("table building is reproducible across worker counts") {
  const SeedSpec seed{8080, {42}};
  const auto serial = build_reference_table(MomentMeasure{}, 20, 10000, seed, 1);
  const auto threaded = build_reference_table(MomentMeasure{}, 20, 10000, seed, 4);
  CHECK(serial.values() == threaded.values());
}

TEST_CASE("library lookups honor the moment draw-count key") {
  const auto& lib = shared_tables();
  CHECK(lib.size() == 3);
  CHECK(lib.find(MomentMeasure{}, 20) != nullptr);
  CHECK(lib.find(MomentMeasure{}, 21) == nullptr);
  CHECK(lib.find(CvmMeasure{}, 17) != nullptr);
  CHECK(lib.find(CvmMeasure{}, 9999) != nullptr);
  CHECK(lib.find(KsMeasure{}, 20) == nullptr);
  CHECK(lib.find(DiscrepancyMeasure{IntervalSupMeasure{-1.0, 1.0}}, 5) != nullptr);
  CHECK(lib.find(DiscrepancyMeasure{IntervalSupMeasure{-1.0, 1.1}}, 5) == nullptr);
}

TEST_CASE("draw-count rules") {
  CHECK(choose_m(1000, MRule{LogRule{}}) == 21);   // 3 * ceil(ln 1000) = 21
  CHECK(choose_m(8, MRule{LogRule{}}) == 10);      // floor at 10
  CHECK(choose_m(100000, MRule{LogRule{2.0}}) == 24);
  CHECK(choose_m(10000, MRule{PowerRule{0.25}}) == 10);
  CHECK(choose_m(160000, MRule{PowerRule{0.25}}) == 20);
  CHECK(choose_m(1000, MRule{PowerRule{0.49}}) == 30);  // ceil(1000^0.49)
  CHECK_THROWS_AS(choose_m(0, MRule{LogRule{}}), ConfigError);
  CHECK_THROWS_AS(choose_m(100, MRule{LogRule{0.0}}), ConfigError);
  CHECK_THROWS_AS(choose_m(100, MRule{PowerRule{0.5}}), ConfigError);
  CHECK_THROWS_AS(choose_m(100, MRule{PowerRule{0.0}}), ConfigError);
}

TEST_CASE("default alpha grid") {
  const auto grid = default_alpha_grid();
  CHECK(grid.size() == 100);
  CHECK(grid.front() == 0.001);
  CHECK(grid.back() == 0.100);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(std::adjacent_find(grid.begin(), grid.end()) == grid.end());
  CHECK(std::find(grid.begin(), grid.end(), 0.05) != grid.end());
}

TEST_CASE("profiles count rejections at or below each level") {
  const std::vector<double> pvals = {0.01, 0.04, 0.05, 0.2, 0.5};
  const std::vector<double> alphas = {0.05, 0.3};
  const auto prof = profile_from_pvalues(pvals, 2, 20, alphas);
  CHECK(prof.tests == 5);
  CHECK(prof.degenerate == 2);
  CHECK(prof.m == 20);
  CHECK(prof.pi_hat[0] == doctest::Approx(0.6));  // p == alpha rejects
  CHECK(prof.pi_hat[1] == doctest::Approx(0.8));
  const double sup = std::max(std::fabs(0.6 - 0.05), std::fabs(0.8 - 0.3));
  CHECK(prof.uniform_band_stat == doctest::Approx(std::sqrt(5.0) * sup));
  CHECK_THROWS_AS(profile_from_pvalues({}, 0, 20, alphas), ConfigError);
}

TEST_CASE("rejection profiles are deterministic across worker counts") {
  std::vector<DirectNormalStream> storage;
  storage.reserve(300);
  std::vector<const DrawStream*> streams;
  for (std::size_t k = 0; k < 300; ++k) {
    storage.emplace_back(SeedSpec{616, {1, k}});
  }
  for (const auto& s : storage) streams.push_back(&s);
  const DiagnosticConfig cfg{.m = 50};
  const auto grid = default_alpha_grid();
  const auto serial = rejection_profile(streams, cfg, grid, nullptr, 1);
  const auto threaded = rejection_profile(streams, cfg, grid, nullptr, 4);
  CHECK(serial.pi_hat == threaded.pi_hat);
  CHECK(serial.uniform_band_stat == threaded.uniform_band_stat);
  CHECK(serial.tests == 300);
  CHECK(serial.degenerate == 0);
  CHECK(std::is_sorted(serial.pi_hat.begin(), serial.pi_hat.end()));
}

TEST_CASE("null p-values are near-uniform at large draw counts") {
  // Draws that satisfy the null exactly; at m = 1000 the limiting reference
  // laws apply to within a few percent.
  const std::size_t k_tests = 2000;
  std::vector<double> ks_p(k_tests), cvm_p(k_tests);
  for (std::size_t k = 0; k < k_tests; ++k) {
    const DirectNormalStream s(SeedSpec{717171, {1, k}});
    ks_p[k] = run_test(s, DiagnosticConfig{.m = 1000}).p_value.value();
    cvm_p[k] = run_test(s, DiagnosticConfig{.m = 1000, .measure = CvmMeasure{}},
                        &shared_tables())
                   .p_value.value();
  }
  // 0.1% two-sided band: sqrt(ln(2/0.001) / (2 * 2000)).
  const double band = std::sqrt(std::log(2.0 / 0.001) / (2.0 * static_cast<double>(k_tests)));
  CHECK(uniform_ks(ks_p) < band + 0.01);
  CHECK(uniform_ks(cvm_p) < band + 0.01);
}

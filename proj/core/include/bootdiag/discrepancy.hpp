// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "bootdiag/errors.hpp"
#include "bootdiag/probkernel.hpp"

namespace bootdiag {

// Immutable sorted draw vector.  All distance evaluations take this type so
// sorting happens exactly once per sample.
class SortedSample {
 public:
  // Sorts a copy of `draws`; rejects empty input and non-finite entries.
  explicit SortedSample(std::vector<double> draws);

  // Adopts already-sorted data; verifies order and finiteness.
  static SortedSample from_sorted(std::vector<double> draws);

  [[nodiscard]] const std::vector<double>& draws() const noexcept { return draws_; }
  [[nodiscard]] std::size_t size() const noexcept { return draws_.size(); }

  // Empirical cdf at u: fraction of draws <= u.
  [[nodiscard]] Prob edf(double u) const;

  // Count of draws strictly below u.
  [[nodiscard]] std::size_t count_below(double u) const;

 private:
  struct AlreadySorted {};
  SortedSample(std::vector<double> draws, AlreadySorted);
  std::vector<double> draws_;
};

// ---- measure descriptors ----------------------------------------------------

struct KsMeasure {};
struct SignedKsPlusMeasure {};
struct SignedKsMinusMeasure {};
struct CvmMeasure {};
struct AdMeasure {};

// Sup distance restricted to the closed interval [lo, hi]; either end may be
// infinite.  Requires lo <= hi.
struct IntervalSupMeasure {
  double lo;
  double hi;
};

// Absolute cdf deviation at the single point x.
struct PointAbsMeasure {
  double x;
};

// Symmetric 2x2 weighting matrix for the moment discrepancy.
struct Omega2 {
  double w11 = 15.0;
  double w12 = 0.0;
  double w22 = 96.0;
};

struct MomentMeasure {
  Omega2 omega{};
};

using DiscrepancyMeasure =
    std::variant<KsMeasure, SignedKsPlusMeasure, SignedKsMinusMeasure, CvmMeasure, AdMeasure,
                 IntervalSupMeasure, PointAbsMeasure, MomentMeasure>;

// Throws ConfigError on an empty interval, non-finite point, or ill-formed
// omega (SingularOmegaError when not positive-definite).
void validate(const DiscrepancyMeasure& measure);

// True for the sup- and integral-type measures whose test statistic scales
// with sqrt(m); false for the quadratic-form moment measure.
bool norm_type(const DiscrepancyMeasure& measure);

// Short command-line label: "ks", "sks+", "sks-", "cvm", "ad",
// "interval:a,b", "point:x", "moment".
std::string measure_label(const DiscrepancyMeasure& measure);

// Canonical identity string used to key simulated reference tables.  Interval
// and point measures are keyed by the normal-cdf image of their abscissas (the
// null law depends on nothing else); the moment measure additionally carries
// the draw count its finite-m table was built for.
std::string table_key(const DiscrepancyMeasure& measure, std::size_t moment_m = 0);

// ---- evaluation -------------------------------------------------------------

struct Discrepancy {
  double value;
  DiscrepancyMeasure measure;
};

// Two-sided Kolmogorov-Smirnov sup distance to the standard normal cdf.
Discrepancy ks_distance(const SortedSample& sample);

enum class KsSide { plus, minus };

// One-sided sup: plus is sup(edf - Phi), minus is sup(Phi - edf), floored at 0.
Discrepancy signed_ks(const SortedSample& sample, KsSide side);

// Cramer-von Mises L2 distance (square root of the classical quadratic form).
Discrepancy cvm_distance(const SortedSample& sample);

// Anderson-Darling tail-weighted distance.  Throws DegenerateTailError when a
// draw maps to cdf value exactly 0 or 1 in double precision.
Discrepancy ad_distance(const SortedSample& sample);

// Exact sup of |edf - Phi| over the closed interval.
Discrepancy interval_sup(const SortedSample& sample, const IntervalSupMeasure& measure);

// |edf(x) - Phi(x)| at one point.
Discrepancy point_abs(const SortedSample& sample, double x);

// Quadratic form v' * inverse(omega) * v in the third and excess-fourth
// moment deviations v = (mean(T^3), mean(T^4) - 3).
Discrepancy moment_discrepancy(const SortedSample& sample, const Omega2& omega);

// Dispatch on the measure variant.
Discrepancy evaluate_discrepancy(const SortedSample& sample, const DiscrepancyMeasure& measure);

// Exact sup distance between two empirical cdfs.
double two_sample_sup_distance(const SortedSample& a, const SortedSample& b);

}  // namespace bootdiag

// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bootdiag/format.hpp"

namespace bootdiag {

namespace {

void require_finite(const std::vector<double>& draws) {
  for (double v : draws) {
    if (!std::isfinite(v)) throw DomainError("SortedSample: non-finite draw");
  }
}

Prob phi(double x) { return std_normal_cdf(x); }

}  // namespace

SortedSample::SortedSample(std::vector<double> draws) : draws_(std::move(draws)) {
  if (draws_.empty()) throw DomainError("SortedSample: empty sample");
  require_finite(draws_);
  std::sort(draws_.begin(), draws_.end());
}

SortedSample::SortedSample(std::vector<double> draws, AlreadySorted) : draws_(std::move(draws)) {}

SortedSample SortedSample::from_sorted(std::vector<double> draws) {
  if (draws.empty()) throw DomainError("SortedSample: empty sample");
  require_finite(draws);
  if (!std::is_sorted(draws.begin(), draws.end()))
    throw DomainError("SortedSample: draws not sorted");
  return SortedSample(std::move(draws), AlreadySorted{});
}

Prob SortedSample::edf(double u) const {
  if (std::isnan(u)) throw DomainError("edf: NaN argument");
  const auto it = std::upper_bound(draws_.begin(), draws_.end(), u);
  return static_cast<double>(it - draws_.begin()) / static_cast<double>(draws_.size());
}

std::size_t SortedSample::count_below(double u) const {
  const auto it = std::lower_bound(draws_.begin(), draws_.end(), u);
  return static_cast<std::size_t>(it - draws_.begin());
}

void validate(const DiscrepancyMeasure& measure) {
  if (const auto* iv = std::get_if<IntervalSupMeasure>(&measure)) {
    if (!(iv->lo <= iv->hi)) throw ConfigError("interval measure: requires lo <= hi");
    if (!(iv->hi > -std::numeric_limits<double>::infinity()) ||
        !(iv->lo < std::numeric_limits<double>::infinity()))
      throw ConfigError("interval measure: interval must meet the real line");
  } else if (const auto* pt = std::get_if<PointAbsMeasure>(&measure)) {
    if (!std::isfinite(pt->x)) throw ConfigError("point measure: x must be finite");
  } else if (const auto* mm = std::get_if<MomentMeasure>(&measure)) {
    const Omega2& w = mm->omega;
    if (!std::isfinite(w.w11) || !std::isfinite(w.w12) || !std::isfinite(w.w22) ||
        !(w.w11 > 0.0) || !(w.w11 * w.w22 - w.w12 * w.w12 > 0.0))
      throw SingularOmegaError("moment measure: omega is not positive-definite");
  }
}

bool norm_type(const DiscrepancyMeasure& measure) {
  return !std::holds_alternative<MomentMeasure>(measure);
}

std::string measure_label(const DiscrepancyMeasure& measure) {
  struct Visitor {
    std::string operator()(const KsMeasure&) const { return "ks"; }
    std::string operator()(const SignedKsPlusMeasure&) const { return "sks+"; }
    std::string operator()(const SignedKsMinusMeasure&) const { return "sks-"; }
    std::string operator()(const CvmMeasure&) const { return "cvm"; }
    std::string operator()(const AdMeasure&) const { return "ad"; }
    std::string operator()(const IntervalSupMeasure& m) const {
      return "interval:" + format_double(m.lo) + "," + format_double(m.hi);
    }
    std::string operator()(const PointAbsMeasure& m) const {
      return "point:" + format_double(m.x);
    }
    std::string operator()(const MomentMeasure&) const { return "moment"; }
  };
  return std::visit(Visitor{}, measure);
}

std::string table_key(const DiscrepancyMeasure& measure, std::size_t moment_m) {
  struct Visitor {
    std::size_t moment_m;
    std::string operator()(const KsMeasure&) const { return "ks"; }
    std::string operator()(const SignedKsPlusMeasure&) const { return "sks+"; }
    std::string operator()(const SignedKsMinusMeasure&) const { return "sks-"; }
    std::string operator()(const CvmMeasure&) const { return "cvm"; }
    std::string operator()(const AdMeasure&) const { return "ad"; }
    std::string operator()(const IntervalSupMeasure& m) const {
      // The null law of the restricted sup depends on the interval only
      // through its image under the normal cdf.
      const double plo = (m.lo == -std::numeric_limits<double>::infinity())
                             ? 0.0
                             : std_normal_cdf(m.lo).value();
      const double phi_ = (m.hi == std::numeric_limits<double>::infinity())
                              ? 1.0
                              : std_normal_cdf(m.hi).value();
      return "interval:p" + format_double_hex(plo) + "," + format_double_hex(phi_);
    }
    std::string operator()(const PointAbsMeasure& m) const {
      return "point:p" + format_double_hex(std_normal_cdf(m.x).value());
    }
    std::string operator()(const MomentMeasure& m) const {
      return "moment:m" + std::to_string(moment_m) + ":w" + format_double_hex(m.omega.w11) +
             "," + format_double_hex(m.omega.w12) + "," + format_double_hex(m.omega.w22);
    }
  };
  return std::visit(Visitor{moment_m}, measure);
}

Discrepancy ks_distance(const SortedSample& sample) {
  const auto& x = sample.draws();
  const double m = static_cast<double>(x.size());
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = phi(x[i]);
    const double up = static_cast<double>(i + 1) / m - p;   // post-jump deviation
    const double down = p - static_cast<double>(i) / m;     // pre-jump deviation
    best = std::max({best, up, down});
  }
  return {best, KsMeasure{}};
}

Discrepancy signed_ks(const SortedSample& sample, KsSide side) {
  const auto& x = sample.draws();
  const double m = static_cast<double>(x.size());
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = phi(x[i]);
    const double v = (side == KsSide::plus) ? static_cast<double>(i + 1) / m - p
                                            : p - static_cast<double>(i) / m;
    best = std::max(best, v);
  }
  if (side == KsSide::plus) return {best, SignedKsPlusMeasure{}};
  return {best, SignedKsMinusMeasure{}};
}

Discrepancy cvm_distance(const SortedSample& sample) {
  const auto& x = sample.draws();
  const double m = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = phi(x[i]);
    const double c = (2.0 * static_cast<double>(i + 1) - 1.0) / (2.0 * m);
    s += (p - c) * (p - c);
  }
  const double v2 = (s + 1.0 / (12.0 * m)) / m;
  return {std::sqrt(v2), CvmMeasure{}};
}

Discrepancy ad_distance(const SortedSample& sample) {
  const auto& x = sample.draws();
  const std::size_t n = x.size();
  const double m = static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo_p = phi(x[i]);
    // Upper tail via Phi(-x) keeps precision where 1 - Phi(x) would not.
    const double hi_q = phi(-x[n - 1 - i]);
    if (lo_p == 0.0 || hi_q == 0.0)
      throw DegenerateTailError("ad_distance: draw at cdf value 0 or 1");
    s += (2.0 * static_cast<double>(i + 1) - 1.0) * (std::log(lo_p) + std::log(hi_q));
  }
  const double v2 = -1.0 - s / (m * m);
  return {std::sqrt(v2), AdMeasure{}};
}

Discrepancy interval_sup(const SortedSample& sample, const IntervalSupMeasure& measure) {
  validate(DiscrepancyMeasure{measure});
  const auto& x = sample.draws();
  const double m = static_cast<double>(x.size());
  const double lo = measure.lo;
  const double hi = measure.hi;
  double best = 0.0;
  // Finite endpoints: the edf is right-continuous, so the value at the
  // endpoint itself is attained.
  if (std::isfinite(lo)) best = std::max(best, std::fabs(sample.edf(lo).value() - phi(lo)));
  if (std::isfinite(hi)) best = std::max(best, std::fabs(sample.edf(hi).value() - phi(hi)));
  // Jump candidates inside the interval, walked per tie block so only levels
  // the edf actually attains are considered.  The pre-jump level at a draw
  // equal to lo lies outside the closed interval and is excluded.
  const auto first = std::lower_bound(x.begin(), x.end(), lo);
  const auto last = std::upper_bound(x.begin(), x.end(), hi);
  for (auto it = first; it != last;) {
    const auto block_end = std::upper_bound(it, last, *it);
    const double below = static_cast<double>(it - x.begin());
    const double at = static_cast<double>(block_end - x.begin());
    const double p = phi(*it);
    best = std::max(best, std::fabs(at / m - p));
    if (*it > lo) best = std::max(best, std::fabs(below / m - p));
    it = block_end;
  }
  return {best, measure};
}

Discrepancy point_abs(const SortedSample& sample, double x) {
  validate(DiscrepancyMeasure{PointAbsMeasure{x}});
  const double v = std::fabs(sample.edf(x).value() - phi(x));
  return {v, PointAbsMeasure{x}};
}

Discrepancy moment_discrepancy(const SortedSample& sample, const Omega2& omega) {
  validate(DiscrepancyMeasure{MomentMeasure{omega}});
  const auto& x = sample.draws();
  const double m = static_cast<double>(x.size());
  double s3 = 0.0;
  double s4 = 0.0;
  for (double v : x) {
    const double v2 = v * v;
    s3 += v2 * v;
    s4 += v2 * v2;
  }
  const double v1 = s3 / m;
  const double v2 = s4 / m - 3.0;
  const double det = omega.w11 * omega.w22 - omega.w12 * omega.w12;
  const double q = (omega.w22 * v1 * v1 - 2.0 * omega.w12 * v1 * v2 + omega.w11 * v2 * v2) / det;
  return {q, MomentMeasure{omega}};
}

double two_sample_sup_distance(const SortedSample& a, const SortedSample& b) {
  const auto& xa = a.draws();
  const auto& xb = b.draws();
  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < xa.size() || j < xb.size()) {
    double x;
    if (j >= xb.size() || (i < xa.size() && xa[i] <= xb[j]))
      x = xa[i];
    else
      x = xb[j];
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
    best = std::max(best, std::fabs(static_cast<double>(i) / na -
                                    static_cast<double>(j) / nb));
  }
  return best;
}

Discrepancy evaluate_discrepancy(const SortedSample& sample, const DiscrepancyMeasure& measure) {
  struct Visitor {
    const SortedSample& s;
    Discrepancy operator()(const KsMeasure&) const { return ks_distance(s); }
    Discrepancy operator()(const SignedKsPlusMeasure&) const {
      return signed_ks(s, KsSide::plus);
    }
    Discrepancy operator()(const SignedKsMinusMeasure&) const {
      return signed_ks(s, KsSide::minus);
    }
    Discrepancy operator()(const CvmMeasure&) const { return cvm_distance(s); }
    Discrepancy operator()(const AdMeasure&) const { return ad_distance(s); }
    Discrepancy operator()(const IntervalSupMeasure& m) const { return interval_sup(s, m); }
    Discrepancy operator()(const PointAbsMeasure& m) const { return point_abs(s, m.x); }
    Discrepancy operator()(const MomentMeasure& m) const {
      return moment_discrepancy(s, m.omega);
    }
  };
  return std::visit(Visitor{sample}, measure);
}

}  // namespace bootdiag

// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/probkernel.hpp"

#include <algorithm>
#include <cmath>

namespace bootdiag {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kPi = 3.141592653589793;

// PPND16: Wichura (1988), algorithm AS 241.  Relative error below 1e-15 for
// p in (0,1); the central branch covers |p - 1/2| <= 0.425.
double ppnd16(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) *
                    r +
                4.5921953931549871457e+4) *
                   r +
               1.3731693765509461125e+4) *
                  r +
              1.9715909503065514427e+3) *
                 r +
             1.3314166789178437745e+2) *
                r +
            3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) *
                    r +
                2.1213794301586595867e+4) *
                   r +
               5.3941960214247511077e+3) *
                  r +
              6.8718700749205790830e+2) *
                 r +
             4.2313330701600911252e+1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e+0) *
                  r +
              3.64784832476320460504e+0) *
                 r +
             5.76949722146069140550e+0) *
                r +
            4.63033784615654529590e+0) *
               r +
           1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e+0) *
                r +
            2.05319162663775882187e+0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e+0) *
                r +
            5.46378491116411436990e+0) *
               r +
           6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

// Small-t series for the Kolmogorov law: theta-function dual of the usual
// alternating series, accurate and strictly positive near 0.
double kolmogorov_cdf_small(double t) {
  const double a = kPi * kPi / (8.0 * t * t);
  double sum = 0.0;
  for (int j = 0; j < 64; ++j) {
    const double odd = 2.0 * j + 1.0;
    const double term = std::exp(-odd * odd * a);
    sum += term;
    if (term < 1e-16 * (sum + 1e-300)) break;
  }
  return std::sqrt(2.0 * kPi) / t * sum;
}

// Large-t alternating series 1 - 2*sum((-1)^{k-1} exp(-2 k^2 t^2)).
double kolmogorov_cdf_large(double t) {
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k < 256; ++k) {
    const double term = std::exp(-2.0 * static_cast<double>(k) * static_cast<double>(k) * t * t);
    if (term < 1e-16) break;
    sum += sign * term;
    sign = -sign;
  }
  return 1.0 - 2.0 * sum;
}

}  // namespace

Prob std_normal_cdf(double x) {
  if (std::isnan(x)) throw DomainError("std_normal_cdf: NaN argument");
  return 0.5 * std::erfc(-x / kSqrt2);
}

double std_normal_quantile(Prob p) {
  const double v = p.value();
  if (v <= 0.0 || v >= 1.0)
    throw DomainError("std_normal_quantile: p must be strictly inside (0,1)");
  return ppnd16(v);
}

Prob kolmogorov_cdf(double t) {
  if (std::isnan(t)) throw DomainError("kolmogorov_cdf: NaN argument");
  if (t <= 0.0) return 0.0;
  // Below ~0.04 even the dual series underflows to 0.
  const double h = (t < 0.755) ? kolmogorov_cdf_small(t) : kolmogorov_cdf_large(t);
  return std::clamp(h, 0.0, 1.0);
}

double kolmogorov_quantile(Prob p) {
  const double v = p.value();
  if (v <= 0.0 || v >= 1.0)
    throw DomainError("kolmogorov_quantile: p must be strictly inside (0,1)");
  double lo = 0.0;
  double hi = 8.0;  // cdf(8) == 1 to double precision
  for (int i = 0; i < 90; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (kolmogorov_cdf(mid).value() < v)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double std_normal_at(const Stream& stream, std::uint64_t index) {
  return ppnd16(stream.uniform_at(index));
}

double symmetric_stable_at(const Stream& stream, TailIndex alpha, std::uint64_t index) {
  const double a = alpha.value();
  const double u = kPi * (stream.uniform_at(2 * index) - 0.5);  // Unif(-pi/2, pi/2)
  const double e = stream.exponential_at(2 * index + 1);
  // Chambers-Mallows-Stuck, symmetric case.
  const double s = std::sin(a * u) / std::pow(std::cos(u), 1.0 / a);
  const double w = std::pow(std::cos((1.0 - a) * u) / e, (1.0 - a) / a);
  return s * w;
}

namespace {

// Marsaglia-Tsang gamma(shape a >= 1, scale 1) on a private substream.
// `ctr` advances by two per attempt; rejection cannot desynchronise anything
// outside this draw's substream.
double gamma_mt(const Stream& sub, double a, std::uint64_t& ctr) {
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double z = ppnd16(sub.uniform_at(ctr++));
    const double v = (1.0 + c * z) * (1.0 + c * z) * (1.0 + c * z);
    const double u = sub.uniform_at(ctr++);
    if (v <= 0.0) continue;
    if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

double student_t_at(const Stream& stream, double df, std::uint64_t index) {
  if (!(df > 0.0)) throw DomainError("student_t_at: df must be positive");
  const Stream sub = stream.substream(index);
  std::uint64_t ctr = 0;
  const double z = ppnd16(sub.uniform_at(ctr++));
  const double half = 0.5 * df;
  double g;
  if (half >= 1.0) {
    g = gamma_mt(sub, half, ctr);
  } else {
    // Boost a gamma(half + 1) draw down by a uniform power.
    const double boost = std::pow(sub.uniform_at(ctr++), 1.0 / half);
    g = gamma_mt(sub, half + 1.0, ctr) * boost;
  }
  const double chi2 = 2.0 * g;
  return z / std::sqrt(chi2 / df);
}

std::vector<double> sample_std_normal(const SeedSpec& seed, std::size_t count) {
  const Stream s(seed);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std_normal_at(s, i);
  return out;
}

std::vector<double> sample_symmetric_stable(const SeedSpec& seed, TailIndex alpha,
                                            std::size_t count) {
  const Stream s(seed);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = symmetric_stable_at(s, alpha, i);
  return out;
}

std::vector<double> sample_student_t(const SeedSpec& seed, double df, std::size_t count) {
  const Stream s(seed);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = student_t_at(s, df, i);
  return out;
}

std::vector<double> sample_rademacher(const SeedSpec& seed, std::size_t count) {
  const Stream s(seed);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = s.rademacher_at(i);
  return out;
}

}  // namespace bootdiag

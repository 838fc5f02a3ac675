// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "bootdiag/errors.hpp"
#include "bootdiag/rng.hpp"

namespace bootdiag {

// Probability validated on construction: value in [0,1], NaN rejected.
class Prob {
 public:
  Prob(double v) : v_(v) {
    if (!(v_ >= 0.0 && v_ <= 1.0)) throw DomainError("Prob: value outside [0,1]");
  }
  operator double() const noexcept { return v_; }
  [[nodiscard]] double value() const noexcept { return v_; }

 private:
  double v_;
};

// Stable tail index restricted to (1,2]: finite mean, possibly infinite
// variance; 2 is the Gaussian edge case.
class TailIndex {
 public:
  explicit TailIndex(double a) : a_(a) {
    if (!(a_ > 1.0 && a_ <= 2.0)) throw DomainError("TailIndex: alpha outside (1,2]");
  }
  [[nodiscard]] double value() const noexcept { return a_; }

 private:
  double a_;
};

// Standard normal cdf, absolute error below 1e-15 everywhere.
Prob std_normal_cdf(double x);

// Standard normal quantile (Wichura's PPND16 rational approximation).
// Throws DomainError at p == 0 or p == 1.
double std_normal_quantile(Prob p);

// Cdf of the Kolmogorov sup-norm limit law.  Two complementary series are
// used so the result is accurate and monotone on both tails; terms are
// accumulated until they fall below 1e-16.
Prob kolmogorov_cdf(double t);

// Inverse of kolmogorov_cdf by bisection; |cdf(quantile(p)) - p| <= 1e-10.
// Throws DomainError at p == 0 or p == 1.
double kolmogorov_quantile(Prob p);

// Counter-indexed samplers.  Each returns the index-th draw of the stream's
// sequence; random access, no mutable state.
double std_normal_at(const Stream& stream, std::uint64_t index);

// Symmetric alpha-stable draw via the Chambers-Mallows-Stuck transform,
// standard scale (characteristic function exp(-|t|^alpha)).  Consumes the
// stream's counters 2*index and 2*index+1.
double symmetric_stable_at(const Stream& stream, TailIndex alpha, std::uint64_t index);

// Student-t draw with df > 0 degrees of freedom.  Internally rejection
// sampling on a per-index substream, so acceptance-loop length cannot shift
// later draws.
double student_t_at(const Stream& stream, double df, std::uint64_t index);

// Bulk convenience wrappers over the counter-indexed samplers.
std::vector<double> sample_std_normal(const SeedSpec& seed, std::size_t count);
std::vector<double> sample_symmetric_stable(const SeedSpec& seed, TailIndex alpha,
                                            std::size_t count);
std::vector<double> sample_student_t(const SeedSpec& seed, double df, std::size_t count);
std::vector<double> sample_rademacher(const SeedSpec& seed, std::size_t count);

}  // namespace bootdiag

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "bootdiag/discrepancy.hpp"
#include "bootdiag/errors.hpp"
#include "bootdiag/probkernel.hpp"
#include "bootdiag/rng.hpp"

namespace bootdiag {

// ---- scenario specifications ------------------------------------------------

// Linear IV with k fixed orthonormal instruments (Z'Z/n == I).  The true
// structural coefficient is 0; errors (u,v) are bivariate normal with unit
// variances and correlation rho_uv.
struct IvStrong {
  std::vector<double> pi;  // first-stage coefficients, length k
};
struct IvWeak {
  std::vector<double> lambda;  // pi = lambda / sqrt(n), length k
};
enum class IvScheme {
  parametric_gaussian,  // redraw (u*,v*) from the known error law
  nonparametric_iid,    // resample centered residual pairs
};
struct IvSpec {
  std::size_t n = 1000;
  std::size_t k = 1;
  double rho_uv = 0.9;
  std::variant<IvStrong, IvWeak> strength = IvStrong{{1.0}};
  IvScheme scheme = IvScheme::parametric_gaussian;
};

// AR(1) with intercept-free least squares, started at y0.  The bootstrap
// recursion restarts at y0 with the fitted coefficient.
struct Ar1Stationary {
  double alpha0 = 0.5;
};
struct Ar1LocalToUnity {
  double c = 0.0;  // alpha0 = 1 + c/n
};
enum class Ar1Scheme {
  parametric_gaussian,  // N(0, sigma_hat^2) innovations
  residual_resample,    // iid draws from centered residuals
};
struct Ar1Spec {
  std::size_t n = 1000;
  std::variant<Ar1Stationary, Ar1LocalToUnity> regime = Ar1Stationary{};
  double y0 = 0.0;
  Ar1Scheme scheme = Ar1Scheme::parametric_gaussian;
};

// Mean restricted to [0, inf): theta_hat = max(0, mean).  Data are
// N(theta0, 1); the near-boundary regime sets theta0 = c/sqrt(n).
struct BoundaryInterior {
  double theta0 = 1.0;  // must be > 0
};
struct BoundaryNearBoundary {
  double c = 0.0;  // must be >= 0
};
struct BoundarySpec {
  std::size_t n = 400;
  std::variant<BoundaryInterior, BoundaryNearBoundary> regime = BoundaryNearBoundary{};
};

// Location model with possibly infinite-variance innovations; the statistic
// studentizes by the original-sample standard deviation.
enum class HeavyInnovation { gaussian, student_t };
struct HeavyFiniteVariance {
  HeavyInnovation innovation = HeavyInnovation::student_t;
  double df = 5.0;  // student_t only; must be > 4 so fourth moments exist
};
struct HeavyStable {
  double alpha = 1.5;  // strict (1,2): genuinely infinite variance
};
enum class HeavyScheme {
  iid_resample,     // resample observations with replacement
  wild_rademacher,  // sign-flip centered observations
};
struct HeavyTailSpec {
  std::size_t n = 1000;
  std::variant<HeavyFiniteVariance, HeavyStable> regime = HeavyFiniteVariance{};
  HeavyScheme scheme = HeavyScheme::iid_resample;
};

// Smooth transform g(theta) = theta^2 of a normal mean, delta-method
// studentization by g'(theta_hat).  Near-singular regime: theta0 =
// c/(2 sqrt(n)), where the derivative at the truth degenerates.
struct DeltaRegular {
  double theta0 = 1.0;  // g'(theta0) must be nonzero
};
struct DeltaNearSingular {
  double c = 0.0;  // must be >= 0
};
struct DeltaSpec {
  std::size_t n = 1000;
  std::variant<DeltaRegular, DeltaNearSingular> regime = DeltaRegular{};
};

using ScenarioSpec = std::variant<IvSpec, Ar1Spec, BoundarySpec, HeavyTailSpec, DeltaSpec>;

// Throws ConfigError naming the offending field.
void validate(const ScenarioSpec& spec);

// Regime parameters at the sample size actually in force.
double ar1_alpha0(const Ar1Spec& spec);
double boundary_theta0(const BoundarySpec& spec);
double delta_theta0(const DeltaSpec& spec);

// Stable identifier: "iv", "ar1", "boundary", "heavytail", "delta".
std::string scenario_label(const ScenarioSpec& spec);

std::size_t scenario_n(const ScenarioSpec& spec);

// ---- fitted state -----------------------------------------------------------

struct IvFit {
  std::vector<double> z;       // n x k instruments, column-major, Z'Z/n == I
  std::vector<double> z_pi;    // fitted first-stage means Z * pi_hat
  std::vector<double> pi_hat;  // k
  double pi_norm2 = 0.0;       // pi_hat' pi_hat
  double beta_hat = 0.0;
  double omega_hat = 0.0;  // (pi_hat' pi_hat)^{-1/2}
  std::vector<double> u_c;  // centered structural residuals (resampling scheme)
  std::vector<double> v_c;  // centered first-stage residuals
};

struct Ar1Fit {
  double alpha_hat = 0.0;
  double sigma_hat = 0.0;  // sqrt of mean squared residual, uncentered
  double se_hat = 0.0;     // sigma_hat / sqrt(sum y_{t-1}^2)
  double y0 = 0.0;
  std::vector<double> resid_c;  // centered residuals (resampling scheme)
};

struct BoundaryFit {
  double ybar = 0.0;
  double theta_hat = 0.0;  // max(0, ybar)
};

struct HeavyFit {
  double theta_hat = 0.0;
  double sigma_hat = 0.0;
  std::vector<double> y;
};

struct DeltaFit {
  double theta_hat = 0.0;
  double sigma_hat = 0.0;
  double tau_hat = 0.0;  // theta_hat^2
};

using FitState = std::variant<IvFit, Ar1Fit, BoundaryFit, HeavyFit, DeltaFit>;

// One simulated dataset together with everything the bootstrap law needs.
class FittedModel {
 public:
  FittedModel(ScenarioSpec spec, FitState fit);

  [[nodiscard]] const ScenarioSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const FitState& fit() const noexcept { return fit_; }

  // Digest of the fitted state.  Seeds the shared standardization prepass, so
  // it must be a pure function of data-measurable quantities.
  [[nodiscard]] std::uint64_t digest() const noexcept { return digest_; }

 private:
  ScenarioSpec spec_;
  FitState fit_;
  std::uint64_t digest_;
};

// Draws one dataset and fits it.  The IV instrument matrix comes from a
// design sub-stream keyed only by (master seed, n, k), so every replication
// under one master seed shares the same fixed design.
// Throws DegenerateFitError on exact-zero denominators; callers count these.
FittedModel simulate(const ScenarioSpec& spec, const SeedSpec& seed);

// The variant's original-sample statistic T_n at the true parameter values
// (for the stable heavy-tail regime, where no population scale exists, the
// feasible studentized form is reported).
double original_statistic(const FittedModel& fitted);

// ---- bootstrap draw streams -------------------------------------------------

// Random-access stream of bootstrap statistic draws.  draw_at(i) is a pure
// function of (fitted state, seed, i): calling it twice, in any order, from
// any thread, gives identical values.
class DrawStream {
 public:
  virtual ~DrawStream() = default;

  [[nodiscard]] virtual double draw_at(std::uint64_t index) const = 0;

  // Digest identifying the conditional law; streams over the same fitted
  // model share it regardless of their seed.
  [[nodiscard]] virtual std::uint64_t digest() const = 0;

  // Independent stream over the same conditional law, seeded from the digest
  // alone.  Used for standardization prepasses so every test on one dataset
  // sees the same standardizers.
  [[nodiscard]] virtual std::unique_ptr<DrawStream> prepass_stream() const = 0;

  // Sequential convenience cursor over draw_at(0), draw_at(1), ...
  double next() { return draw_at(cursor_++); }

 private:
  std::uint64_t cursor_ = 0;
};

inline double bootstrap_draw(DrawStream& stream) { return stream.next(); }

class ModelDrawStream final : public DrawStream {
 public:
  ModelDrawStream(const FittedModel& fitted, const SeedSpec& seed);

  [[nodiscard]] double draw_at(std::uint64_t index) const override;
  [[nodiscard]] std::uint64_t digest() const override;
  [[nodiscard]] std::unique_ptr<DrawStream> prepass_stream() const override;

  [[nodiscard]] const FittedModel& fitted() const noexcept { return *fitted_; }

 private:
  const FittedModel* fitted_;  // not owned; must outlive the stream
  Stream stream_;
};

// Draws that are exactly standard normal: the reference-table generator and
// a null fixture for calibration studies.
class DirectNormalStream final : public DrawStream {
 public:
  explicit DirectNormalStream(const SeedSpec& seed);

  [[nodiscard]] double draw_at(std::uint64_t index) const override;
  [[nodiscard]] std::uint64_t digest() const override;
  [[nodiscard]] std::unique_ptr<DrawStream> prepass_stream() const override;

 private:
  Stream stream_;
};

// ---- boundary closed forms --------------------------------------------------

// For the boundary scenario the conditional law is known exactly:
// G_n(x) = Phi(x) 1{x >= -sqrt(n) theta_hat}.
Prob boundary_closed_form_cdf(const FittedModel& fitted, double x);

// Exact sup distance to Phi: Phi(-sqrt(n) theta_hat).
Discrepancy boundary_closed_form_distance(const FittedModel& fitted);

}  // namespace bootdiag

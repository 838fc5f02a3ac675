// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/models.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace bootdiag {

namespace {

// Path tags for derived streams.  Arbitrary but fixed: changing them changes
// every seeded result.
constexpr std::uint64_t kDesignTag = 0x5A11D0;
constexpr std::uint64_t kPrepassTag = 0x9E9A55;
constexpr std::uint64_t kDirectDigest = 0xD12EC7;

std::uint64_t fold_u64(std::uint64_t acc, std::uint64_t v) {
  return detail::fold_key(acc, v);
}

std::uint64_t fold_d(std::uint64_t acc, double v) {
  return fold_u64(acc, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t fold_vec(std::uint64_t acc, const std::vector<double>& v) {
  acc = fold_u64(acc, v.size());
  for (double x : v) acc = fold_d(acc, x);
  return acc;
}

// Index into [0, n) from a uniform draw on the open unit interval.
std::size_t resample_index(double u, std::size_t n) {
  auto idx = static_cast<std::size_t>(u * static_cast<double>(n));
  return (idx >= n) ? n - 1 : idx;
}

}  // namespace

double ar1_alpha0(const Ar1Spec& spec) {
  if (const auto* st = std::get_if<Ar1Stationary>(&spec.regime)) return st->alpha0;
  return 1.0 + std::get<Ar1LocalToUnity>(spec.regime).c / static_cast<double>(spec.n);
}

double boundary_theta0(const BoundarySpec& spec) {
  if (const auto* in = std::get_if<BoundaryInterior>(&spec.regime)) return in->theta0;
  return std::get<BoundaryNearBoundary>(spec.regime).c / std::sqrt(static_cast<double>(spec.n));
}

double delta_theta0(const DeltaSpec& spec) {
  if (const auto* re = std::get_if<DeltaRegular>(&spec.regime)) return re->theta0;
  return std::get<DeltaNearSingular>(spec.regime).c /
         (2.0 * std::sqrt(static_cast<double>(spec.n)));
}

void validate(const ScenarioSpec& spec) {
  struct Visitor {
    void operator()(const IvSpec& s) const {
      if (s.n < 8) throw ConfigError("iv: n must be at least 8");
      if (s.k < 1 || s.k > 64) throw ConfigError("iv: k must be in [1,64]");
      if (s.k >= s.n) throw ConfigError("iv: k must be smaller than n");
      if (!(s.rho_uv > -1.0 && s.rho_uv < 1.0))
        throw ConfigError("iv: rho_uv must be strictly inside (-1,1)");
      const std::size_t len = std::holds_alternative<IvStrong>(s.strength)
                                  ? std::get<IvStrong>(s.strength).pi.size()
                                  : std::get<IvWeak>(s.strength).lambda.size();
      if (len != s.k) throw ConfigError("iv: strength vector length must equal k");
      const auto& vec = std::holds_alternative<IvStrong>(s.strength)
                            ? std::get<IvStrong>(s.strength).pi
                            : std::get<IvWeak>(s.strength).lambda;
      for (double v : vec)
        if (!std::isfinite(v)) throw ConfigError("iv: strength vector must be finite");
    }
    void operator()(const Ar1Spec& s) const {
      if (s.n < 8) throw ConfigError("ar1: n must be at least 8");
      if (!std::isfinite(s.y0)) throw ConfigError("ar1: y0 must be finite");
      if (const auto* st = std::get_if<Ar1Stationary>(&s.regime)) {
        if (!(std::fabs(st->alpha0) < 1.0))
          throw ConfigError("ar1: alpha0 must satisfy |alpha0| < 1");
      } else {
        const double c = std::get<Ar1LocalToUnity>(s.regime).c;
        if (!std::isfinite(c)) throw ConfigError("ar1: c must be finite");
      }
    }
    void operator()(const BoundarySpec& s) const {
      if (s.n < 8) throw ConfigError("boundary: n must be at least 8");
      if (const auto* in = std::get_if<BoundaryInterior>(&s.regime)) {
        if (!(in->theta0 > 0.0)) throw ConfigError("boundary: theta0 must be positive");
      } else {
        const double c = std::get<BoundaryNearBoundary>(s.regime).c;
        if (!(c >= 0.0)) throw ConfigError("boundary: c must be nonnegative");
      }
    }
    void operator()(const HeavyTailSpec& s) const {
      if (s.n < 8) throw ConfigError("heavytail: n must be at least 8");
      if (const auto* fv = std::get_if<HeavyFiniteVariance>(&s.regime)) {
        if (fv->innovation == HeavyInnovation::student_t && !(fv->df > 4.0))
          throw ConfigError("heavytail: df must exceed 4");
      } else {
        const double a = std::get<HeavyStable>(s.regime).alpha;
        if (!(a > 1.0 && a < 2.0))
          throw ConfigError("heavytail: stable alpha must be strictly inside (1,2)");
      }
    }
    void operator()(const DeltaSpec& s) const {
      if (s.n < 8) throw ConfigError("delta: n must be at least 8");
      if (const auto* re = std::get_if<DeltaRegular>(&s.regime)) {
        if (!std::isfinite(re->theta0) || re->theta0 == 0.0)
          throw ConfigError("delta: theta0 must be finite and nonzero");
      } else {
        const double c = std::get<DeltaNearSingular>(s.regime).c;
        if (!(c >= 0.0)) throw ConfigError("delta: c must be nonnegative");
      }
    }
  };
  std::visit(Visitor{}, spec);
}

std::string scenario_label(const ScenarioSpec& spec) {
  struct Visitor {
    std::string operator()(const IvSpec&) const { return "iv"; }
    std::string operator()(const Ar1Spec&) const { return "ar1"; }
    std::string operator()(const BoundarySpec&) const { return "boundary"; }
    std::string operator()(const HeavyTailSpec&) const { return "heavytail"; }
    std::string operator()(const DeltaSpec&) const { return "delta"; }
  };
  return std::visit(Visitor{}, spec);
}

std::size_t scenario_n(const ScenarioSpec& spec) {
  return std::visit([](const auto& s) { return s.n; }, spec);
}

FittedModel::FittedModel(ScenarioSpec spec, FitState fit)
    : spec_(std::move(spec)), fit_(std::move(fit)) {
  std::uint64_t d = detail::root_key(0xF17D16E57ull + fit_.index());
  struct Visitor {
    std::uint64_t& d;
    void operator()(const IvFit& f) const {
      d = fold_vec(d, f.pi_hat);
      d = fold_d(d, f.beta_hat);
      d = fold_d(d, f.omega_hat);
      d = fold_vec(d, f.z);
      d = fold_vec(d, f.u_c);
      d = fold_vec(d, f.v_c);
    }
    void operator()(const Ar1Fit& f) const {
      d = fold_d(d, f.alpha_hat);
      d = fold_d(d, f.sigma_hat);
      d = fold_d(d, f.se_hat);
      d = fold_d(d, f.y0);
      d = fold_vec(d, f.resid_c);
    }
    void operator()(const BoundaryFit& f) const {
      d = fold_d(d, f.ybar);
      d = fold_d(d, f.theta_hat);
    }
    void operator()(const HeavyFit& f) const {
      d = fold_d(d, f.theta_hat);
      d = fold_d(d, f.sigma_hat);
      d = fold_vec(d, f.y);
    }
    void operator()(const DeltaFit& f) const {
      d = fold_d(d, f.theta_hat);
      d = fold_d(d, f.sigma_hat);
    }
  };
  std::visit(Visitor{d}, fit_);
  digest_ = d;
}

namespace {

IvFit fit_iv(const IvSpec& spec, const SeedSpec& seed) {
  const std::size_t n = spec.n;
  const std::size_t k = spec.k;
  // Fixed design shared by all replications under one master seed.
  const Stream design(SeedSpec{seed.master_seed, {kDesignTag, n, k}});
  std::vector<double> z(n * k);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std_normal_at(design, i);
  // Two-pass modified Gram-Schmidt, then scale columns to norm sqrt(n) so
  // that Z'Z/n is the identity to machine precision.
  for (std::size_t j = 0; j < k; ++j) {
    double* zj = z.data() + j * n;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t l = 0; l < j; ++l) {
        const double* zl = z.data() + l * n;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += zl[i] * zj[i];
        // Earlier columns have norm sqrt(n), not 1.
        dot /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) zj[i] -= dot * zl[i];
      }
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm2 += zj[i] * zj[i];
    if (norm2 == 0.0) throw DegenerateFitError("iv: rank-deficient design");
    const double scale = std::sqrt(static_cast<double>(n) / norm2);
    for (std::size_t i = 0; i < n; ++i) zj[i] *= scale;
  }

  std::vector<double> pi(k);
  if (const auto* strong = std::get_if<IvStrong>(&spec.strength)) {
    pi = strong->pi;
  } else {
    const auto& lambda = std::get<IvWeak>(spec.strength).lambda;
    const double root_n = std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < k; ++j) pi[j] = lambda[j] / root_n;
  }

  const Stream data(seed);
  const double rho = spec.rho_uv;
  const double rho_c = std::sqrt(1.0 - rho * rho);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = std_normal_at(data, 2 * i);
    const double e = std_normal_at(data, 2 * i + 1);
    const double v = rho * u + rho_c * e;
    double zpi = 0.0;
    for (std::size_t j = 0; j < k; ++j) zpi += z[j * n + i] * pi[j];
    x[i] = zpi + v;
    y[i] = u;  // true structural coefficient is 0
  }

  IvFit fit;
  fit.pi_hat.resize(k);
  std::vector<double> s_zy(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double* zj = z.data() + j * n;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += zj[i] * x[i];
      sy += zj[i] * y[i];
    }
    fit.pi_hat[j] = sx / static_cast<double>(n);
    s_zy[j] = sy / static_cast<double>(n);
  }
  double pn2 = 0.0, cross = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    pn2 += fit.pi_hat[j] * fit.pi_hat[j];
    cross += fit.pi_hat[j] * s_zy[j];
  }
  if (pn2 == 0.0) throw DegenerateFitError("iv: first stage exactly zero");
  fit.pi_norm2 = pn2;
  fit.beta_hat = cross / pn2;
  fit.omega_hat = 1.0 / std::sqrt(pn2);

  fit.z_pi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double zpi = 0.0;
    for (std::size_t j = 0; j < k; ++j) zpi += z[j * n + i] * fit.pi_hat[j];
    fit.z_pi[i] = zpi;
  }
  if (spec.scheme == IvScheme::nonparametric_iid) {
    fit.u_c.resize(n);
    fit.v_c.resize(n);
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      fit.u_c[i] = y[i] - fit.beta_hat * x[i];
      fit.v_c[i] = x[i] - fit.z_pi[i];
      mu += fit.u_c[i];
      mv += fit.v_c[i];
    }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      fit.u_c[i] -= mu;
      fit.v_c[i] -= mv;
    }
  }
  fit.z = std::move(z);
  return fit;
}

Ar1Fit fit_ar1(const Ar1Spec& spec, const SeedSpec& seed) {
  const std::size_t n = spec.n;
  const double a0 = ar1_alpha0(spec);
  const Stream data(seed);
  std::vector<double> y(n + 1);
  y[0] = spec.y0;
  for (std::size_t t = 1; t <= n; ++t)
    y[t] = a0 * y[t - 1] + std_normal_at(data, t - 1);
  double denom = 0.0, cross = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    denom += y[t - 1] * y[t - 1];
    cross += y[t - 1] * y[t];
  }
  if (denom == 0.0) throw DegenerateFitError("ar1: zero lag sum of squares");
  Ar1Fit fit;
  fit.alpha_hat = cross / denom;
  double rss = 0.0;
  std::vector<double> resid(n);
  for (std::size_t t = 1; t <= n; ++t) {
    resid[t - 1] = y[t] - fit.alpha_hat * y[t - 1];
    rss += resid[t - 1] * resid[t - 1];
  }
  fit.sigma_hat = std::sqrt(rss / static_cast<double>(n));
  if (fit.sigma_hat == 0.0) throw DegenerateFitError("ar1: zero residual variance");
  fit.se_hat = fit.sigma_hat / std::sqrt(denom);
  fit.y0 = spec.y0;
  if (spec.scheme == Ar1Scheme::residual_resample) {
    double mean = 0.0;
    for (double r : resid) mean += r;
    mean /= static_cast<double>(n);
    for (double& r : resid) r -= mean;
    fit.resid_c = std::move(resid);
  }
  return fit;
}

BoundaryFit fit_boundary(const BoundarySpec& spec, const SeedSpec& seed) {
  const std::size_t n = spec.n;
  const double theta0 = boundary_theta0(spec);
  const Stream data(seed);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += theta0 + std_normal_at(data, i);
  BoundaryFit fit;
  fit.ybar = sum / static_cast<double>(n);
  fit.theta_hat = std::max(0.0, fit.ybar);
  return fit;
}

HeavyFit fit_heavy(const HeavyTailSpec& spec, const SeedSpec& seed) {
  const std::size_t n = spec.n;
  const Stream data(seed);
  std::vector<double> y(n);
  if (const auto* fv = std::get_if<HeavyFiniteVariance>(&spec.regime)) {
    if (fv->innovation == HeavyInnovation::gaussian) {
      for (std::size_t i = 0; i < n; ++i) y[i] = std_normal_at(data, i);
    } else {
      for (std::size_t i = 0; i < n; ++i) y[i] = student_t_at(data, fv->df, i);
    }
  } else {
    const TailIndex alpha(std::get<HeavyStable>(spec.regime).alpha);
    for (std::size_t i = 0; i < n; ++i) y[i] = symmetric_stable_at(data, alpha, i);
  }
  HeavyFit fit;
  double sum = 0.0;
  for (double v : y) sum += v;
  fit.theta_hat = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : y) ss += (v - fit.theta_hat) * (v - fit.theta_hat);
  fit.sigma_hat = std::sqrt(ss / static_cast<double>(n));
  if (fit.sigma_hat == 0.0) throw DegenerateFitError("heavytail: zero sample variance");
  fit.y = std::move(y);
  return fit;
}

DeltaFit fit_delta(const DeltaSpec& spec, const SeedSpec& seed) {
  const std::size_t n = spec.n;
  const double theta0 = delta_theta0(spec);
  const Stream data(seed);
  double sum = 0.0;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = theta0 + std_normal_at(data, i);
    sum += y[i];
  }
  DeltaFit fit;
  fit.theta_hat = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : y) ss += (v - fit.theta_hat) * (v - fit.theta_hat);
  fit.sigma_hat = std::sqrt(ss / static_cast<double>(n));
  if (fit.sigma_hat == 0.0) throw DegenerateFitError("delta: zero sample variance");
  fit.tau_hat = fit.theta_hat * fit.theta_hat;
  return fit;
}

}  // namespace

FittedModel simulate(const ScenarioSpec& spec, const SeedSpec& seed) {
  validate(spec);
  struct Visitor {
    const SeedSpec& seed;
    FitState operator()(const IvSpec& s) const { return fit_iv(s, seed); }
    FitState operator()(const Ar1Spec& s) const { return fit_ar1(s, seed); }
    FitState operator()(const BoundarySpec& s) const { return fit_boundary(s, seed); }
    FitState operator()(const HeavyTailSpec& s) const { return fit_heavy(s, seed); }
    FitState operator()(const DeltaSpec& s) const { return fit_delta(s, seed); }
  };
  return FittedModel(spec, std::visit(Visitor{seed}, spec));
}

double original_statistic(const FittedModel& fitted) {
  const ScenarioSpec& spec = fitted.spec();
  struct Visitor {
    const FittedModel& fm;
    double operator()(const IvSpec& s) const {
      const auto& f = std::get<IvFit>(fm.fit());
      // True beta is 0; the t-ratio denominator is omega_hat = |pi_hat|^{-1}.
      return std::sqrt(static_cast<double>(s.n)) * f.beta_hat * std::sqrt(f.pi_norm2);
    }
    double operator()(const Ar1Spec& s) const {
      const auto& f = std::get<Ar1Fit>(fm.fit());
      return (f.alpha_hat - ar1_alpha0(s)) / f.se_hat;
    }
    double operator()(const BoundarySpec& s) const {
      const auto& f = std::get<BoundaryFit>(fm.fit());
      const double rn = std::sqrt(static_cast<double>(s.n));
      const double theta0 = boundary_theta0(s);
      return std::max(-rn * theta0, rn * (f.ybar - theta0));
    }
    double operator()(const HeavyTailSpec& s) const {
      const auto& f = std::get<HeavyFit>(fm.fit());
      const double rn = std::sqrt(static_cast<double>(s.n));
      if (const auto* fv = std::get_if<HeavyFiniteVariance>(&s.regime)) {
        const double sigma0 = (fv->innovation == HeavyInnovation::gaussian)
                                  ? 1.0
                                  : std::sqrt(fv->df / (fv->df - 2.0));
        return rn * f.theta_hat / sigma0;
      }
      // No population scale exists in the stable regime; report the feasible
      // studentized form.
      return rn * f.theta_hat / f.sigma_hat;
    }
    double operator()(const DeltaSpec& s) const {
      const auto& f = std::get<DeltaFit>(fm.fit());
      const double theta0 = delta_theta0(s);
      return std::sqrt(static_cast<double>(s.n)) * (f.tau_hat - theta0 * theta0);
    }
  };
  return std::visit(Visitor{fitted}, spec);
}

// ---- draw streams -----------------------------------------------------------

ModelDrawStream::ModelDrawStream(const FittedModel& fitted, const SeedSpec& seed)
    : fitted_(&fitted), stream_(seed) {}

std::uint64_t ModelDrawStream::digest() const { return fitted_->digest(); }

std::unique_ptr<DrawStream> ModelDrawStream::prepass_stream() const {
  return std::make_unique<ModelDrawStream>(*fitted_,
                                           SeedSpec{fitted_->digest(), {kPrepassTag}});
}

namespace {

double draw_iv(const IvSpec& spec, const IvFit& fit, const Stream& stream, std::uint64_t index) {
  const std::size_t n = spec.n;
  const std::size_t k = spec.k;
  const Stream sub = stream.substream(index);
  std::vector<double> x(n), y(n);
  if (spec.scheme == IvScheme::parametric_gaussian) {
    const double rho = spec.rho_uv;
    const double rho_c = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std_normal_at(sub, 2 * i);
      const double e = std_normal_at(sub, 2 * i + 1);
      const double v = rho * u + rho_c * e;
      x[i] = fit.z_pi[i] + v;
      y[i] = fit.beta_hat * x[i] + u;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = resample_index(sub.uniform_at(i), n);
      x[i] = fit.z_pi[i] + fit.v_c[j];
      y[i] = fit.beta_hat * x[i] + fit.u_c[j];
    }
  }
  double pn2 = 0.0, cross = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double* zj = fit.z.data() + j * n;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += zj[i] * x[i];
      sy += zj[i] * y[i];
    }
    sx /= static_cast<double>(n);
    sy /= static_cast<double>(n);
    pn2 += sx * sx;
    cross += sx * sy;
  }
  if (pn2 == 0.0) throw DegenerateFitError("iv: bootstrap first stage exactly zero");
  const double beta_star = cross / pn2;
  // Studentized by the original-sample omega_hat, not the redraw's.
  return std::sqrt(static_cast<double>(n)) * (beta_star - fit.beta_hat) / fit.omega_hat;
}

double draw_ar1(const Ar1Spec& spec, const Ar1Fit& fit, const Stream& stream,
                std::uint64_t index) {
  const std::size_t n = spec.n;
  const Stream sub = stream.substream(index);
  std::vector<double> y(n + 1);
  y[0] = fit.y0;
  if (spec.scheme == Ar1Scheme::parametric_gaussian) {
    for (std::size_t t = 1; t <= n; ++t)
      y[t] = fit.alpha_hat * y[t - 1] + fit.sigma_hat * std_normal_at(sub, t - 1);
  } else {
    for (std::size_t t = 1; t <= n; ++t) {
      const std::size_t j = resample_index(sub.uniform_at(t - 1), n);
      y[t] = fit.alpha_hat * y[t - 1] + fit.resid_c[j];
    }
  }
  double denom = 0.0, cross = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    denom += y[t - 1] * y[t - 1];
    cross += y[t - 1] * y[t];
  }
  if (denom == 0.0) throw DegenerateFitError("ar1: bootstrap zero lag sum of squares");
  const double a_star = cross / denom;
  double rss = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    const double r = y[t] - a_star * y[t - 1];
    rss += r * r;
  }
  const double sigma_star = std::sqrt(rss / static_cast<double>(n));
  if (sigma_star == 0.0) throw DegenerateFitError("ar1: bootstrap zero residual variance");
  // Studentized by the redraw's own standard error.
  const double se_star = sigma_star / std::sqrt(denom);
  return (a_star - fit.alpha_hat) / se_star;
}

double draw_heavy(const HeavyTailSpec& spec, const HeavyFit& fit, const Stream& stream,
                  std::uint64_t index) {
  const std::size_t n = spec.n;
  const Stream sub = stream.substream(index);
  const double rn = std::sqrt(static_cast<double>(n));
  if (spec.scheme == HeavyScheme::iid_resample) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += fit.y[resample_index(sub.uniform_at(i), n)];
    const double theta_star = sum / static_cast<double>(n);
    return rn * (theta_star - fit.theta_hat) / fit.sigma_hat;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += (fit.y[i] - fit.theta_hat) * sub.rademacher_at(i);
  return sum / (rn * fit.sigma_hat);
}

}  // namespace

double ModelDrawStream::draw_at(std::uint64_t index) const {
  const ScenarioSpec& spec = fitted_->spec();
  struct Visitor {
    const FittedModel& fm;
    const Stream& stream;
    std::uint64_t index;
    double operator()(const IvSpec& s) const {
      return draw_iv(s, std::get<IvFit>(fm.fit()), stream, index);
    }
    double operator()(const Ar1Spec& s) const {
      return draw_ar1(s, std::get<Ar1Fit>(fm.fit()), stream, index);
    }
    double operator()(const BoundarySpec& s) const {
      const auto& f = std::get<BoundaryFit>(fm.fit());
      const double rn = std::sqrt(static_cast<double>(s.n));
      return std::max(-rn * f.theta_hat, std_normal_at(stream, index));
    }
    double operator()(const HeavyTailSpec& s) const {
      return draw_heavy(s, std::get<HeavyFit>(fm.fit()), stream, index);
    }
    double operator()(const DeltaSpec& s) const {
      const auto& f = std::get<DeltaFit>(fm.fit());
      if (f.theta_hat == 0.0)
        throw DegenerateFitError("delta: derivative at theta_hat exactly zero");
      const double rn = std::sqrt(static_cast<double>(s.n));
      const double z = std_normal_at(stream, index);
      const double theta_star = f.theta_hat + f.sigma_hat * z / rn;
      return rn * (theta_star * theta_star - f.theta_hat * f.theta_hat) /
             (2.0 * f.theta_hat * f.sigma_hat);
    }
  };
  return std::visit(Visitor{*fitted_, stream_, index}, spec);
}

DirectNormalStream::DirectNormalStream(const SeedSpec& seed) : stream_(seed) {}

double DirectNormalStream::draw_at(std::uint64_t index) const {
  return std_normal_at(stream_, index);
}

std::uint64_t DirectNormalStream::digest() const { return kDirectDigest; }

std::unique_ptr<DrawStream> DirectNormalStream::prepass_stream() const {
  return std::make_unique<DirectNormalStream>(SeedSpec{kDirectDigest, {kPrepassTag}});
}

Prob boundary_closed_form_cdf(const FittedModel& fitted, double x) {
  const auto& f = std::get<BoundaryFit>(fitted.fit());
  const double n = static_cast<double>(scenario_n(fitted.spec()));
  const double cut = -std::sqrt(n) * f.theta_hat;
  if (x < cut) return 0.0;
  return std_normal_cdf(x);
}

Discrepancy boundary_closed_form_distance(const FittedModel& fitted) {
  const auto& f = std::get<BoundaryFit>(fitted.fit());
  const double n = static_cast<double>(scenario_n(fitted.spec()));
  return {std_normal_cdf(-std::sqrt(n) * f.theta_hat).value(), KsMeasure{}};
}

}  // namespace bootdiag

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/optimize.hpp"
#include "dynalloc/rng.hpp"

namespace dynalloc {

// ---------------------------------------------------------------------------
// Serial-correlation diagnostics
// ---------------------------------------------------------------------------

namespace detail {
inline void check_series(std::span<const double> x, std::size_t min_len, const char* who) {
  require(x.size() >= min_len, ErrorKind::SeriesTooShort,
          std::string(who) + ": series too short (" + std::to_string(x.size()) + " < " + std::to_string(min_len) + ")");
  const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  require(!constant, ErrorKind::ZeroVariance, std::string(who) + ": series has zero variance");
}
}  // namespace detail

/// Sample autocorrelations at lags 1..max_lag.
inline std::vector<double> acf(std::span<const double> x, int max_lag) {
  require(max_lag >= 1, ErrorKind::InvalidParams, "acf: max_lag must be positive");
  detail::check_series(x, static_cast<std::size_t>(max_lag) + 3, "acf");
  const double m = mean(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  std::vector<double> out(static_cast<std::size_t>(max_lag));
  for (int k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < x.size(); ++t) num += (x[t] - m) * (x[t - k] - m);
    out[static_cast<std::size_t>(k - 1)] = num / denom;
  }
  return out;
}

/// Partial autocorrelations at lags 1..max_lag by the Durbin-Levinson recursion.
inline std::vector<double> pacf(std::span<const double> x, int max_lag) {
  const auto r = acf(x, max_lag);
  std::vector<double> out(r.size());
  std::vector<double> prev, cur;
  for (int k = 1; k <= max_lag; ++k) {
    double num = r[static_cast<std::size_t>(k - 1)];
    double den = 1.0;
    for (int j = 1; j < k; ++j) {
      num -= prev[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(k - j - 1)];
      den -= prev[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(j - 1)];
    }
    const double kk = num / den;
    cur.assign(static_cast<std::size_t>(k), 0.0);
    for (int j = 1; j < k; ++j) {
      cur[static_cast<std::size_t>(j - 1)] =
          prev[static_cast<std::size_t>(j - 1)] - kk * prev[static_cast<std::size_t>(k - j - 1)];
    }
    cur[static_cast<std::size_t>(k - 1)] = kk;
    out[static_cast<std::size_t>(k - 1)] = kk;
    prev.swap(cur);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ARMA(1,1)-GARCH(1,1) with optional GJR leverage term
// ---------------------------------------------------------------------------

/// (r_t - mu) = phi (r_{t-1} - mu) + theta eps_{t-1} + eps_t,  eps_t = sigma_t z_t,
/// sigma_t^2 = alpha0 + (alpha1 + gamma I[eps_{t-1} <= 0]) eps_{t-1}^2 + beta1 sigma_{t-1}^2.
struct ArmaGarchParams {
  double mu = 0.0;
  double phi = 0.0;
  double theta = 0.0;
  double alpha0 = 1.0;
  double alpha1 = 0.0;
  double beta1 = 0.0;
  double gamma = 0.0;

  double persistence() const { return alpha1 + beta1 + 0.5 * gamma; }
  double unconditional_variance() const { return alpha0 / (1.0 - persistence()); }

  void validate() const {
    const bool ok = std::isfinite(mu) && std::abs(phi) < 1.0 && std::abs(theta) < 1.0 && alpha0 > 0.0 &&
                    alpha1 >= 0.0 && beta1 >= 0.0 && gamma >= 0.0 && persistence() < 1.0;
    require(ok, ErrorKind::InvalidParams, "ARMA-GARCH parameters violate stationarity/positivity constraints");
  }
};

/// Last observation of a filtered series; enough to continue the recursion.
struct FilterState {
  bool has_history = false;
  double last_return = 0.0;
  double last_residual = 0.0;
  double last_variance = 0.0;
};

inline double conditional_mean(const ArmaGarchParams& p, const FilterState& s) {
  if (!s.has_history) return p.mu;
  return p.mu + p.phi * (s.last_return - p.mu) + p.theta * s.last_residual;
}

inline double conditional_variance(const ArmaGarchParams& p, const FilterState& s) {
  if (!s.has_history) return p.unconditional_variance();
  const double e2 = s.last_residual * s.last_residual;
  const double arch = p.alpha1 + (s.last_residual <= 0.0 ? p.gamma : 0.0);
  return p.alpha0 + arch * e2 + p.beta1 * s.last_variance;
}

inline FilterState advance(const FilterState&, double ret, double resid, double variance) {
  return FilterState{true, ret, resid, variance};
}

struct FilterOutput {
  Vector residuals;
  Vector sigmas;
  Vector std_residuals;
  double loglik = 0.0;
  FilterState terminal;
};

namespace detail {
// Log-likelihood only; the hot loop of the fit.
inline double garch_loglik(const ArmaGarchParams& p, std::span<const double> x) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double ll = 0.0;
  double prev_r = p.mu, prev_e = 0.0, prev_v = p.unconditional_variance();
  bool first = true;
  for (double r : x) {
    double m, v;
    if (first) {
      m = p.mu;
      v = p.unconditional_variance();
      first = false;
    } else {
      m = p.mu + p.phi * (prev_r - p.mu) + p.theta * prev_e;
      v = p.alpha0 + (p.alpha1 + (prev_e <= 0.0 ? p.gamma : 0.0)) * prev_e * prev_e + p.beta1 * prev_v;
    }
    const double e = r - m;
    ll -= 0.5 * (kLog2Pi + std::log(v) + e * e / v);
    prev_r = r;
    prev_e = e;
    prev_v = v;
  }
  return ll;
}
}  // namespace detail

/// Deterministic ARMA-GARCH filter. Without `init` the recursion starts at
/// the unconditional mean and variance; with it, the filter continues from a
/// previously filtered chunk (log-likelihoods then add up across chunks).
inline FilterOutput filter_residuals(const ArmaGarchParams& p, std::span<const double> x,
                                     const std::optional<FilterState>& init = std::nullopt) {
  p.validate();
  constexpr double kLog2Pi = 1.8378770664093453;
  const auto n = static_cast<Eigen::Index>(x.size());
  FilterOutput out;
  out.residuals.resize(n);
  out.sigmas.resize(n);
  out.std_residuals.resize(n);
  FilterState s = init.value_or(FilterState{});
  for (Eigen::Index t = 0; t < n; ++t) {
    const double m = conditional_mean(p, s);
    const double v = conditional_variance(p, s);
    const double r = x[static_cast<std::size_t>(t)];
    const double e = r - m;
    const double sd = std::sqrt(v);
    out.residuals(t) = e;
    out.sigmas(t) = sd;
    out.std_residuals(t) = e / sd;
    out.loglik -= 0.5 * (kLog2Pi + std::log(v) + e * e / v);
    s = advance(s, r, e, v);
  }
  out.terminal = s;
  return out;
}

struct ArmaGarchFit {
  ArmaGarchParams params;
  FilterOutput filter;
  bool converged = false;
  int starts_converged = 0;
};

struct GarchFitOptions {
  int n_starts = 5;
  /// Extra start tried before the fixed ones (warm start from a previous fit).
  std::optional<ArmaGarchParams> initial{};
  optim::Options optimizer{.max_iter = 300, .grad_tol = 1e-6, .f_tol = 1e-13, .fd_step = 1e-6};
};

namespace detail {

struct GarchTransform {
  bool gjr = false;
  double scale = 1.0;

  Eigen::Index dim() const { return gjr ? 7 : 6; }

  // Parameters in the scaled (unit-variance) domain.
  ArmaGarchParams decode(const Vector& raw) const {
    ArmaGarchParams p;
    constexpr double kShrink = 1.0 - 1e-9;
    p.mu = raw(0);
    p.phi = std::tanh(raw(1)) * kShrink;
    p.theta = std::tanh(raw(2)) * kShrink;
    p.alpha0 = std::exp(std::clamp(raw(3), -50.0, 50.0));
    const double e1 = std::exp(std::clamp(raw(4), -40.0, 40.0));
    const double e2 = std::exp(std::clamp(raw(5), -40.0, 40.0));
    const double e3 = gjr ? std::exp(std::clamp(raw(6), -40.0, 40.0)) : 0.0;
    const double denom = 1.0 + e1 + e2 + e3;
    p.alpha1 = e1 / denom;
    p.beta1 = e2 / denom;
    p.gamma = 2.0 * e3 / denom;
    return p;
  }

  Vector encode(const ArmaGarchParams& p) const {
    Vector raw(dim());
    raw(0) = p.mu;
    raw(1) = std::atanh(std::clamp(p.phi, -0.99, 0.99));
    raw(2) = std::atanh(std::clamp(p.theta, -0.99, 0.99));
    raw(3) = std::log(p.alpha0);
    const double slack = 1.0 - p.persistence();
    raw(4) = std::log(std::max(p.alpha1, 1e-6) / slack);
    raw(5) = std::log(std::max(p.beta1, 1e-6) / slack);
    if (gjr) raw(6) = std::log(std::max(0.5 * p.gamma, 1e-6) / slack);
    return raw;
  }

  ArmaGarchParams unscale(ArmaGarchParams p) const {
    p.mu *= scale;
    p.alpha0 *= scale * scale;
    return p;
  }
};

}  // namespace detail

/// Gaussian maximum-likelihood ARMA(1,1)-GARCH(1,1) (GJR when `gjr`). The
/// series is rescaled to unit variance for the optimization; constraints are
/// enforced by parameter transforms; the best of several deterministic starts
/// is kept.
inline ArmaGarchFit fit_arma_garch(std::span<const double> series, bool gjr, const GarchFitOptions& opt = {}) {
  detail::check_series(series, 250, "fit_arma_garch");
  const double scale = stdev(series);
  std::vector<double> x(series.begin(), series.end());
  for (double& v : x) v /= scale;
  const double mu0 = mean(x);

  detail::GarchTransform tf{gjr, scale};
  auto objective = [&](const Vector& raw) {
    const ArmaGarchParams p = tf.decode(raw);
    return -detail::garch_loglik(p, x) / static_cast<double>(x.size());
  };

  static constexpr std::array<std::array<double, 4>, 5> kStarts{{
      {0.05, 0.90, 0.0, 0.0},
      {0.10, 0.80, 0.1, 0.0},
      {0.03, 0.95, 0.0, 0.1},
      {0.15, 0.60, -0.1, 0.1},
      {0.08, 0.88, 0.2, -0.1},
  }};

  ArmaGarchFit best;
  double best_f = std::numeric_limits<double>::infinity();
  Vector best_raw;
  const int first = opt.initial ? -1 : 0;
  for (int s = first; s < opt.n_starts; ++s) {
    ArmaGarchParams init;
    if (s < 0) {
      init = *opt.initial;
      init.mu /= scale;
      init.alpha0 /= scale * scale;
      if (!gjr) init.gamma = 0.0;
    } else {
      const auto& st = kStarts[static_cast<std::size_t>(s) % kStarts.size()];
      init.mu = mu0;
      init.alpha1 = gjr ? 0.5 * st[0] : st[0];
      init.beta1 = st[1];
      init.gamma = gjr ? st[0] : 0.0;
      init.phi = st[2];
      init.theta = st[3];
      init.alpha0 = 1.0 - init.persistence();
    }
    const auto res = optim::minimize_bfgs(objective, tf.encode(init), opt.optimizer);
    if (res.converged) ++best.starts_converged;
    if (res.f < best_f) {
      best_f = res.f;
      best_raw = res.x;
      best.converged = res.converged;
    }
  }
  require(std::isfinite(best_f), ErrorKind::NonConvergence, "fit_arma_garch: no start produced a finite likelihood");
  require(best.starts_converged > 0, ErrorKind::NonConvergence, "fit_arma_garch: no start converged");
  best.params = tf.unscale(tf.decode(best_raw));
  best.filter = filter_residuals(best.params, series);
  return best;
}

/// n_paths x horizon matrix of simulated returns continuing from `init`.
/// Path p draws from its own stream derived from (seed, p).
inline Matrix simulate_univariate(const ArmaGarchParams& p, int horizon, int n_paths, std::uint64_t seed,
                                  const FilterState& init = {}) {
  p.validate();
  require(horizon >= 0 && n_paths >= 0, ErrorKind::InvalidParams, "simulate_univariate: negative size");
  Matrix out(n_paths, horizon);
  for (int path = 0; path < n_paths; ++path) {
    Engine eng = make_engine(seed, {static_cast<std::uint64_t>(path)});
    std::normal_distribution<double> normal;
    FilterState s = init;
    for (int h = 0; h < horizon; ++h) {
      const double m = conditional_mean(p, s);
      const double v = conditional_variance(p, s);
      const double e = std::sqrt(v) * normal(eng);
      const double r = m + e;
      out(path, h) = r;
      s = advance(s, r, e, v);
    }
  }
  return out;
}

}  // namespace dynalloc

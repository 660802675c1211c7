#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/data_panel.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/optimize.hpp"
#include "dynalloc/rng.hpp"

namespace dynalloc {

// Two-state Markov switching model for a monthly risk series y_t:
//
//   y_t = mu_t(s_t) + phi (y_{t-1} - mu_{t-1}(s_t)) + sigma(s_t) eps_t,
//   mu_t(m) = beta0_m + beta1_m x_t,
//   P(s_t = m | s_{t-1} = m) = logistic(c_m + d_m x_t),
//
// where x_t is the driver already aligned to t (the previous period's VRP).
// Regime 0 is "low", regime 1 is "high".

using Transition = Eigen::Matrix2d;

struct MsParams {
  std::array<double, 2> beta0{0.0, 0.0};
  std::array<double, 2> beta1{0.0, 0.0};
  std::array<double, 2> sigma{1.0, 1.0};
  double phi = 0.0;
  std::array<double, 2> c{0.0, 0.0};
  std::array<double, 2> d{0.0, 0.0};

  double mean(int m, double x) const { return beta0[static_cast<std::size_t>(m)] + beta1[static_cast<std::size_t>(m)] * x; }

  void validate() const {
    bool ok = std::abs(phi) < 1.0;
    for (int m = 0; m < 2; ++m) {
      const auto k = static_cast<std::size_t>(m);
      ok = ok && sigma[k] > 0.0 && std::isfinite(beta0[k]) && std::isfinite(beta1[k]) && std::isfinite(c[k]) &&
           std::isfinite(d[k]);
    }
    require(ok, ErrorKind::InvalidParams, "regime model requires sigma > 0, |phi| < 1 and finite coefficients");
  }

  void swap_regimes() {
    std::swap(beta0[0], beta0[1]);
    std::swap(beta1[0], beta1[1]);
    std::swap(sigma[0], sigma[1]);
    std::swap(c[0], c[1]);
    std::swap(d[0], d[1]);
  }
};

inline double logistic(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// Row-stochastic matrix, entry (i, j) = P(s_t = j | s_{t-1} = i).
inline Transition transition_matrix(const MsParams& p, double driver) {
  Transition t;
  for (int m = 0; m < 2; ++m) {
    const double stay = logistic(p.c[static_cast<std::size_t>(m)] + p.d[static_cast<std::size_t>(m)] * driver);
    t(m, m) = stay;
    t(m, 1 - m) = 1.0 - stay;
  }
  return t;
}

/// Stationary distribution of a 2x2 chain.
inline Eigen::Vector2d ergodic(const Transition& t) {
  const double leave0 = t(0, 1), leave1 = t(1, 0);
  const double s = leave0 + leave1;
  if (s <= 0.0) return {0.5, 0.5};
  return {leave1 / s, leave0 / s};
}

/// Per-regime log density of y_t, t = 0 using the stationary AR(1) variance.
inline Eigen::Vector2d ms_log_density(const MsParams& p, std::span<const double> y, std::span<const double> x,
                                      std::size_t t) {
  constexpr double kLog2Pi = 1.8378770664093453;
  Eigen::Vector2d out;
  for (int m = 0; m < 2; ++m) {
    double mean = p.mean(m, x[t]);
    double var = p.sigma[static_cast<std::size_t>(m)] * p.sigma[static_cast<std::size_t>(m)];
    if (t == 0) {
      var /= 1.0 - p.phi * p.phi;
    } else {
      mean += p.phi * (y[t - 1] - p.mean(m, x[t - 1]));
    }
    const double e = y[t] - mean;
    out(m) = -0.5 * (kLog2Pi + std::log(var) + e * e / var);
  }
  return out;
}

/// Probabilities are T x 2 (columns low, high).
struct FilterResult {
  Eigen::MatrixX2d predicted;
  Eigen::MatrixX2d filtered;
  std::vector<Transition> transitions;
  double loglik = 0.0;
  /// Predicted probabilities for the period after the sample; set when the
  /// driver carries one extra value.
  std::optional<Eigen::Vector2d> next;
};

/// Hamilton forward recursion. `driver` has length T, or T + 1 to also
/// produce the one-step-ahead prediction beyond the sample. The initial
/// distribution is the ergodic distribution of the first transition matrix.
inline FilterResult hamilton_filter(const MsParams& p, std::span<const double> y, std::span<const double> driver) {
  p.validate();
  const std::size_t n = y.size();
  require(n >= 1, ErrorKind::SeriesTooShort, "hamilton_filter: empty series");
  require(driver.size() == n || driver.size() == n + 1, ErrorKind::LengthMismatch,
          "hamilton_filter: driver must have length T or T + 1");
  FilterResult r;
  r.predicted.resize(static_cast<Eigen::Index>(n), 2);
  r.filtered.resize(static_cast<Eigen::Index>(n), 2);
  r.transitions.reserve(n);
  Eigen::Vector2d prior;
  for (std::size_t t = 0; t < n; ++t) {
    const Transition tr = transition_matrix(p, driver[t]);
    r.transitions.push_back(tr);
    if (t == 0) {
      prior = ergodic(tr);
    } else {
      prior = tr.transpose() * r.filtered.row(static_cast<Eigen::Index>(t - 1)).transpose();
    }
    r.predicted.row(static_cast<Eigen::Index>(t)) = prior.transpose();
    const Eigen::Vector2d logf = ms_log_density(p, y, driver, t);
    const double top = logf.maxCoeff();
    const Eigen::Vector2d joint = prior.cwiseProduct((logf.array() - top).exp().matrix());
    const double total = joint.sum();
    require(total > 0.0 && std::isfinite(total), ErrorKind::NumericalUnderflow,
            "hamilton_filter: zero likelihood at t = " + std::to_string(t));
    r.filtered.row(static_cast<Eigen::Index>(t)) = (joint / total).transpose();
    r.loglik += top + std::log(total);
  }
  if (driver.size() == n + 1) {
    r.next = transition_matrix(p, driver[n]).transpose() * r.filtered.row(static_cast<Eigen::Index>(n - 1)).transpose();
  }
  return r;
}

/// Kim backward recursion; transitions[t] maps s_{t-1} to s_t.
inline Eigen::MatrixX2d kim_smoother(const Eigen::MatrixX2d& filtered, const Eigen::MatrixX2d& predicted,
                                     const std::vector<Transition>& transitions) {
  const Eigen::Index n = filtered.rows();
  require(predicted.rows() == n && static_cast<Eigen::Index>(transitions.size()) == n, ErrorKind::LengthMismatch,
          "kim_smoother: inconsistent lengths");
  Eigen::MatrixX2d s(n, 2);
  if (n == 0) return s;
  s.row(n - 1) = filtered.row(n - 1);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const Eigen::Vector2d ratio = s.row(t + 1).transpose().cwiseQuotient(predicted.row(t + 1).transpose().cwiseMax(1e-300));
    const Eigen::Vector2d back = transitions[static_cast<std::size_t>(t + 1)] * ratio;
    Eigen::Vector2d v = filtered.row(t).transpose().cwiseProduct(back);
    v /= v.sum();
    s.row(t) = v.transpose();
  }
  return s;
}

/// Probability of the high regime for every date, by kind. `oos` is NaN
/// where undefined.
struct RegimeProbSeries {
  std::vector<double> predicted;
  std::vector<double> filtered;
  std::vector<double> smoothed;
  std::vector<double> oos;
};

struct MsFitOptions {
  int n_starts = 10;
  optim::Options optimizer{.max_iter = 400, .grad_tol = 1e-6, .f_tol = 1e-12, .fd_step = 1e-6};
  /// The two-regime fit is collapsed to one regime unless its likelihood
  /// ratio against the single-regime AR(1) model exceeds this value
  /// (chi-square 99% with the 7 extra parameters).
  double degenerate_lr = 18.475;
  /// Extra start tried first (warm start from a previous fit).
  std::optional<MsParams> initial{};
};

struct MsFit {
  MsParams params;
  /// Unrestricted two-regime optimum, before any collapse; used for warm starts.
  MsParams unrestricted;
  RegimeProbSeries probs;
  double loglik = 0.0;
  bool converged = false;
  bool degenerate = false;
  std::vector<double> start_logliks;
};

namespace detail {

struct MsScale {
  double my = 0.0, sy = 1.0, mx = 0.0, sx = 1.0;

  // Scaled-domain parameters -> original units.
  MsParams unscale(MsParams p) const {
    for (int m = 0; m < 2; ++m) {
      const auto k = static_cast<std::size_t>(m);
      const double b1 = sy * p.beta1[k] / sx;
      p.beta0[k] = my + sy * p.beta0[k] - b1 * mx;
      p.beta1[k] = b1;
      p.sigma[k] *= sy;
      p.c[k] -= p.d[k] * mx / sx;
      p.d[k] /= sx;
    }
    return p;
  }

  MsParams scale(MsParams p) const {
    for (int m = 0; m < 2; ++m) {
      const auto k = static_cast<std::size_t>(m);
      p.c[k] += p.d[k] * mx;
      p.d[k] *= sx;
      p.beta0[k] = (p.beta0[k] + p.beta1[k] * mx - my) / sy;
      p.beta1[k] = p.beta1[k] * sx / sy;
      p.sigma[k] /= sy;
    }
    return p;
  }
};

inline MsParams decode_ms(const Vector& raw) {
  MsParams p;
  for (int m = 0; m < 2; ++m) {
    const auto k = static_cast<std::size_t>(m);
    p.beta0[k] = raw(m);
    p.beta1[k] = raw(2 + m);
    p.sigma[k] = std::exp(std::clamp(raw(4 + m), -30.0, 30.0));
    p.c[k] = std::clamp(raw(7 + m), -30.0, 30.0);
    p.d[k] = std::clamp(raw(9 + m), -30.0, 30.0);
  }
  p.phi = std::tanh(raw(6)) * (1.0 - 1e-9);
  return p;
}

inline Vector encode_ms(const MsParams& p) {
  Vector raw(11);
  for (int m = 0; m < 2; ++m) {
    const auto k = static_cast<std::size_t>(m);
    raw(m) = p.beta0[k];
    raw(2 + m) = p.beta1[k];
    raw(4 + m) = std::log(p.sigma[k]);
    raw(7 + m) = p.c[k];
    raw(9 + m) = p.d[k];
  }
  raw(6) = std::atanh(std::clamp(p.phi, -0.99, 0.99));
  return raw;
}

// Deterministic starts in the standardized domain.
inline MsParams ms_start(int i) {
  static constexpr std::array<std::array<double, 5>, 10> kStarts{{
      // mean gap, sigma low, sigma high, phi, stay logit
      {1.0, 0.6, 1.2, 0.3, 2.0},
      {1.5, 0.5, 1.0, 0.5, 2.5},
      {0.5, 0.5, 1.5, 0.2, 2.0},
      {2.0, 0.4, 0.8, 0.0, 3.0},
      {1.0, 0.8, 0.8, 0.6, 1.5},
      {0.2, 0.4, 1.6, 0.4, 2.5},
      {1.2, 0.7, 1.4, 0.8, 3.0},
      {2.5, 0.3, 0.6, 0.2, 1.0},
      {0.8, 0.9, 1.1, -0.2, 2.0},
      {1.6, 0.5, 2.0, 0.7, 4.0},
  }};
  const auto& s = kStarts[static_cast<std::size_t>(i) % kStarts.size()];
  MsParams p;
  p.beta0 = {-0.5 * s[0], 0.5 * s[0]};
  p.beta1 = {0.0, 0.0};
  p.sigma = {s[1], s[2]};
  p.phi = s[3];
  p.c = {s[4], s[4]};
  p.d = {0.0, 0.0};
  return p;
}

/// Single-regime AR(1) regression y_t = b0 + b1 x_t + phi (y_{t-1} - b0 - b1 x_{t-1}) + sigma eps_t,
/// fitted through the same likelihood with both regimes tied.
inline std::pair<MsParams, double> fit_single_regime(std::span<const double> y, std::span<const double> x,
                                                     const optim::Options& opt) {
  auto expand = [](const Vector& raw) {
    MsParams p;
    p.beta0 = {raw(0), raw(0)};
    p.beta1 = {raw(1), raw(1)};
    p.sigma = {std::exp(std::clamp(raw(2), -30.0, 30.0)), std::exp(std::clamp(raw(2), -30.0, 30.0))};
    p.phi = std::tanh(raw(3)) * (1.0 - 1e-9);
    return p;
  };
  auto obj = [&](const Vector& raw) {
    const MsParams p = expand(raw);
    try {
      return -hamilton_filter(p, y, x).loglik / static_cast<double>(y.size());
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double best = std::numeric_limits<double>::infinity();
  Vector best_x;
  for (double phi0 : {0.0, 0.5}) {
    Vector x0(4);
    x0 << 0.0, 0.0, 0.0, std::atanh(phi0);
    const auto res = optim::minimize_bfgs(obj, x0, opt);
    if (res.f < best) {
      best = res.f;
      best_x = res.x;
    }
  }
  return {expand(best_x), -best * static_cast<double>(y.size())};
}

}  // namespace detail

inline std::vector<double> high_column(const Eigen::MatrixX2d& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index t = 0; t < m.rows(); ++t) out[static_cast<std::size_t>(t)] = m(t, 1);
  return out;
}

/// In-sample predicted, filtered and smoothed high-regime probabilities.
inline RegimeProbSeries regime_probabilities(const MsParams& p, std::span<const double> y,
                                             std::span<const double> driver) {
  const auto f = hamilton_filter(p, y, driver.first(y.size()));
  RegimeProbSeries out;
  out.predicted = high_column(f.predicted);
  out.filtered = high_column(f.filtered);
  out.smoothed = high_column(kim_smoother(f.filtered, f.predicted, f.transitions));
  out.oos.assign(y.size(), std::numeric_limits<double>::quiet_NaN());
  return out;
}

/// Maximum likelihood over transformed parameters from deterministic starts.
/// Regimes are relabeled so that "high" has the larger mean level at the
/// sample-average driver. When the two-regime model does not beat a single
/// regime by the likelihood-ratio threshold, both regimes are set to the
/// single-regime fit and the result is flagged degenerate.
inline MsFit fit_ms(std::span<const double> y, std::span<const double> driver, const MsFitOptions& opt = {}) {
  require(y.size() >= 60, ErrorKind::SeriesTooShort, "fit_ms: need at least 60 observations");
  require(driver.size() == y.size() || driver.size() == y.size() + 1, ErrorKind::LengthMismatch,
          "fit_ms: driver must have length T or T + 1");
  const auto xs = driver.first(y.size());
  detail::MsScale sc;
  sc.my = mean(y);
  sc.sy = stdev(y);
  require(sc.sy > 0.0, ErrorKind::ZeroVariance, "fit_ms: constant series");
  sc.mx = mean(xs);
  sc.sx = stdev(xs);
  if (!(sc.sx > 0.0)) sc.sx = 1.0;
  std::vector<double> ys(y.size()), xz(xs.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    ys[i] = (y[i] - sc.my) / sc.sy;
    xz[i] = (xs[i] - sc.mx) / sc.sx;
  }
  const double n = static_cast<double>(y.size());
  auto objective = [&](const Vector& raw) {
    try {
      return -hamilton_filter(detail::decode_ms(raw), ys, xz).loglik / n;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  MsFit fit;
  std::vector<MsParams> starts;
  if (opt.initial) starts.push_back(sc.scale(*opt.initial));
  for (int i = 0; i < opt.n_starts; ++i) starts.push_back(detail::ms_start(i));
  double best_f = std::numeric_limits<double>::infinity();
  Vector best_raw;
  for (const auto& s : starts) {
    const Vector x0 = detail::encode_ms(s);
    const double f0 = objective(x0);
    fit.start_logliks.push_back(-f0 * n - n * std::log(sc.sy));
    const auto res = optim::minimize_bfgs(objective, x0, opt.optimizer);
    if (res.f < best_f) {
      best_f = res.f;
      best_raw = res.x;
      fit.converged = res.converged;
    }
  }
  require(std::isfinite(best_f), ErrorKind::NonConvergence, "fit_ms: no start produced a finite likelihood");

  // Likelihood in original units differs by the Jacobian -T log(sy).
  const double jac = -n * std::log(sc.sy);
  MsParams est = detail::decode_ms(best_raw);
  double ll = -best_f * n;
  const auto [single, ll_single] = detail::fit_single_regime(ys, xz, opt.optimizer);
  fit.unrestricted = sc.unscale(est);
  if (2.0 * (ll - ll_single) < opt.degenerate_lr) {
    fit.degenerate = true;
    est = single;
    ll = ll_single;
  }
  fit.params = sc.unscale(est);
  const double xbar = sc.mx;
  if (fit.params.mean(0, xbar) > fit.params.mean(1, xbar)) fit.params.swap_regimes();
  if (fit.unrestricted.mean(0, xbar) > fit.unrestricted.mean(1, xbar)) fit.unrestricted.swap_regimes();
  fit.loglik = ll + jac;
  fit.probs = regime_probabilities(fit.params, y, xs);
  return fit;
}

struct OosOptions {
  std::size_t min_window = 60;
  /// Fixed starts tried at each refit besides the warm start.
  int fresh_starts = 2;
  MsFitOptions fit{};
};

/// True out-of-sample probabilities: for every t >= min_window the model is
/// refitted on y[0, t) and driver[0, t), and oos[t] is its one-step-ahead
/// prediction using driver[t]. When the driver has one extra value the last
/// entry is the forecast for the period after the sample. Each refit starts
/// from the previous optimum plus `fresh_starts` fixed starts.
inline std::vector<double> oos_regime_probs(std::span<const double> y, std::span<const double> driver,
                                            const OosOptions& opt = {}) {
  require(driver.size() == y.size() || driver.size() == y.size() + 1, ErrorKind::LengthMismatch,
          "oos_regime_probs: driver must have length T or T + 1");
  require(y.size() > opt.min_window, ErrorKind::SeriesTooShort, "oos_regime_probs: series not longer than min_window");
  std::vector<double> out(driver.size(), std::numeric_limits<double>::quiet_NaN());
  std::optional<MsParams> warm;
  for (std::size_t t = opt.min_window; t < driver.size(); ++t) {
    MsFitOptions fo = opt.fit;
    if (warm) {
      fo.initial = warm;
      fo.n_starts = opt.fresh_starts;
    }
    const MsFit fit = fit_ms(y.first(t), driver.first(t + 1), fo);
    warm = fit.unrestricted;
    const auto f = hamilton_filter(fit.params, y.first(t), driver.first(t + 1));
    out[t] = (*f.next)(1);
  }
  return out;
}

struct MsSample {
  std::vector<double> y;
  std::vector<int> states;
};

/// Draws a path of the model for the given driver (length T).
inline MsSample simulate_ms(const MsParams& p, std::span<const double> driver, std::uint64_t seed) {
  p.validate();
  Engine eng = make_engine(seed, {0});
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif;
  MsSample out;
  const std::size_t n = driver.size();
  out.y.resize(n);
  out.states.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Transition tr = transition_matrix(p, driver[t]);
    int s;
    if (t == 0) {
      s = unif(eng) < ergodic(tr)(1) ? 1 : 0;
    } else {
      s = unif(eng) < tr(out.states[t - 1], 1) ? 1 : 0;
    }
    out.states[t] = s;
    const double sig = p.sigma[static_cast<std::size_t>(s)];
    if (t == 0) {
      out.y[t] = p.mean(s, driver[t]) + sig / std::sqrt(1.0 - p.phi * p.phi) * g(eng);
    } else {
      out.y[t] = p.mean(s, driver[t]) + p.phi * (out.y[t - 1] - p.mean(s, driver[t - 1])) + sig * g(eng);
    }
  }
  return out;
}

enum class Regime { low, high };

/// High iff p >= threshold (ties go to high). NaN stays unlabeled.
inline std::vector<std::optional<Regime>> label_regimes(std::span<const double> probs, double threshold = 0.5) {
  std::vector<std::optional<Regime>> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (std::isnan(probs[i])) continue;
    require(probs[i] >= 0.0 && probs[i] <= 1.0, ErrorKind::OutOfRangeInput, "label_regimes: probability outside [0, 1]");
    out[i] = probs[i] >= threshold ? Regime::high : Regime::low;
  }
  return out;
}

enum class FourState { hr_hc, hr_lc, lr_hc, lr_lc };

inline std::string to_string(Regime r) { return r == Regime::high ? "high" : "low"; }

inline std::string to_string(FourState s) {
  switch (s) {
    case FourState::hr_hc: return "HR/HC";
    case FourState::hr_lc: return "HR/LC";
    case FourState::lr_hc: return "LR/HC";
    case FourState::lr_lc: return "LR/LC";
  }
  return "?";
}

inline FourState four_state(Regime risk, Regime corr) {
  if (risk == Regime::high) return corr == Regime::high ? FourState::hr_hc : FourState::hr_lc;
  return corr == Regime::high ? FourState::lr_hc : FourState::lr_lc;
}

inline std::vector<std::optional<FourState>> four_state(const std::vector<std::optional<Regime>>& risk,
                                                        const std::vector<std::optional<Regime>>& corr) {
  require(risk.size() == corr.size(), ErrorKind::LengthMismatch, "four_state: length mismatch");
  std::vector<std::optional<FourState>> out(risk.size());
  for (std::size_t i = 0; i < risk.size(); ++i)
    if (risk[i] && corr[i]) out[i] = four_state(*risk[i], *corr[i]);
  return out;
}

struct RegimeStats {
  std::size_t count = 0;
  /// Per-period mean and standard deviation of each column.
  Vector mean;
  Vector vol;
  /// Annualized: mean * periods_per_year, vol * sqrt(periods_per_year).
  Vector ann_mean;
  Vector ann_vol;
};

/// Per-label statistics of periodic returns, aligned by date. Labels absent
/// from the overlap have no entry.
template <class Label>
std::map<Label, RegimeStats> regime_conditional_stats(const ReturnPanel& returns, const std::vector<Date>& label_dates,
                                                      const std::vector<std::optional<Label>>& labels,
                                                      double periods_per_year = 12.0) {
  require(label_dates.size() == labels.size(), ErrorKind::LengthMismatch, "regime_conditional_stats: length mismatch");
  std::map<Label, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < label_dates.size(); ++i) {
    if (!labels[i]) continue;
    const auto it = std::lower_bound(returns.dates().begin(), returns.dates().end(), label_dates[i]);
    if (it == returns.dates().end() || *it != label_dates[i]) continue;
    rows[*labels[i]].push_back(static_cast<Eigen::Index>(it - returns.dates().begin()));
  }
  require(!rows.empty(), ErrorKind::NoOverlap, "regime_conditional_stats: no labeled dates overlap the returns");
  std::map<Label, RegimeStats> out;
  for (const auto& [label, idx] : rows) {
    RegimeStats s;
    s.count = idx.size();
    Matrix sub(static_cast<Eigen::Index>(idx.size()), returns.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = returns.values().row(idx[i]);
    s.mean = sub.colwise().mean().transpose();
    s.vol = Vector::Zero(returns.cols());
    if (idx.size() >= 2) {
      for (Eigen::Index k = 0; k < sub.cols(); ++k) {
        const Vector c = sub.col(k);
        s.vol(k) = stdev(as_span(c));
      }
    }
    s.ann_mean = s.mean * periods_per_year;
    s.ann_vol = s.vol * std::sqrt(periods_per_year);
    out.emplace(label, std::move(s));
  }
  return out;
}

}  // namespace dynalloc

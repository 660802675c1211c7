#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/data_panel.hpp"
#include "dynalloc/dependence.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/rng.hpp"
#include "dynalloc/univariate_vol.hpp"

namespace dynalloc {

enum class WindowKind { expanding, rolling };

/// Estimation window. Expanding windows use all history and require at least
/// `days` rows; rolling windows use exactly the last `days` rows.
struct FitWindow {
  WindowKind kind = WindowKind::expanding;
  Eigen::Index days = 1260;

  static FitWindow expanding(Eigen::Index min_days = 1260) { return {WindowKind::expanding, min_days}; }
  static FitWindow rolling(Eigen::Index days = 252) { return {WindowKind::rolling, days}; }
};

struct WindowInfo {
  WindowKind kind = WindowKind::expanding;
  Date start;
  Date end;
  Eigen::Index rows = 0;
};

/// Fitted ARMA(1,1)-GARCH(1,1)-DCC-t-copula model with the terminal state
/// needed to simulate forward from the last fitted date.
struct JointModelFit {
  std::vector<std::string> assets;
  std::vector<ArmaGarchParams> marginals;
  std::vector<FilterState> terminal;
  DccParams dcc;
  /// DCC Q for the first day after the window.
  Matrix q_next;
  TCopulaParams copula;
  WindowInfo window;
  /// GARCH-standardized residuals handed to the DCC stage (window rows x N).
  Matrix std_residuals;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(assets.size()); }

  void validate() const {
    const auto n = assets.size();
    require(n >= 1 && marginals.size() == n && terminal.size() == n, ErrorKind::InvalidModel,
            "joint model: inconsistent component sizes");
    require(dcc.rbar.rows() == dim() && q_next.rows() == dim() && q_next.cols() == dim() &&
                copula.corr.rows() == dim(),
            ErrorKind::InvalidModel, "joint model: correlation dimensions do not match assets");
    try {
      for (const auto& m : marginals) m.validate();
      dcc.validate();
      copula.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidModel, std::string("joint model: ") + e.what());
    }
    require(q_next.allFinite() && is_positive_definite(q_next), ErrorKind::InvalidModel,
            "joint model: terminal Q is not positive definite");
  }
};

struct JointFitOptions {
  bool gjr = false;
  CorrelationMode correlation = CorrelationMode::dcc;
  GarchFitOptions garch;
  DccFitOptions dcc;
  TCopulaFitOptions copula;
  /// With a warm start, each stage begins from the previous optimum and tries
  /// this many of its fixed starts in addition.
  int warm_extra_starts = 1;
};

/// DCC-whitened residuals L_t^{-1} z_t with L_t the Cholesky factor of R_t.
inline Matrix whiten(const std::vector<Matrix>& correlations, const Matrix& z) {
  Matrix e(z.rows(), z.cols());
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    const Eigen::LLT<Matrix> llt(correlations[static_cast<std::size_t>(t)]);
    e.row(t) = llt.matrixL().solve(z.row(t).transpose()).transpose();
  }
  return e;
}

/// Staged fit: ARMA-GARCH per asset, DCC on the standardized residuals, then
/// a t-copula on the pseudo-observations of the DCC-whitened residuals.
inline JointModelFit fit_joint(const ReturnPanel& panel, const FitWindow& window, const JointFitOptions& opt = {},
                               const JointModelFit* warm = nullptr) {
  require(window.days >= 1, ErrorKind::ConfigError, "fit_joint: window length must be positive");
  require(panel.rows() >= window.days, ErrorKind::InsufficientHistory,
          "fit_joint: " + std::to_string(panel.rows()) + " rows available, window needs " +
              std::to_string(window.days));
  const Eigen::Index begin = window.kind == WindowKind::rolling ? panel.rows() - window.days : 0;
  const ReturnPanel data = panel.slice(begin, panel.rows());
  const Eigen::Index n = data.cols();
  if (warm) require(warm->assets == data.assets(), ErrorKind::InvalidModel, "fit_joint: warm start asset mismatch");

  JointModelFit fit;
  fit.assets = data.assets();
  fit.window = {window.kind, data.dates().front(), data.dates().back(), data.rows()};
  fit.std_residuals.resize(data.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    GarchFitOptions g = opt.garch;
    if (warm) {
      g.initial = warm->marginals[static_cast<std::size_t>(k)];
      g.n_starts = std::min(g.n_starts, opt.warm_extra_starts);
    }
    const Vector col = data.values().col(k);
    const auto f = fit_arma_garch(as_span(col), opt.gjr, g);
    fit.marginals.push_back(f.params);
    fit.terminal.push_back(f.filter.terminal);
    fit.std_residuals.col(k) = f.filter.std_residuals;
  }

  if (n >= 2) {
    DccFitOptions d = opt.dcc;
    if (warm && warm->dcc.a + warm->dcc.b > 0.0) {
      d.initial = std::array<double, 2>{warm->dcc.a, warm->dcc.b};
      d.n_starts = std::min(d.n_starts, opt.warm_extra_starts);
    }
    fit.dcc = fit_correlation(fit.std_residuals, opt.correlation, d);
    const auto filt = dcc_filter(fit.dcc, fit.std_residuals);
    fit.q_next = filt.q_next;
    fit.copula = fit_t_copula(pseudo_observations(whiten(filt.correlations, fit.std_residuals)), opt.copula);
  } else {
    fit.dcc = DccParams{0.0, 0.0, Matrix::Identity(1, 1)};
    fit.q_next = Matrix::Identity(1, 1);
    fit.copula = TCopulaParams{Matrix::Identity(1, 1), TCopulaParams::kNuCap};
  }
  return fit;
}

namespace detail {

/// x -> Phi^{-1}(F_nu(x)), the t-copula to Gaussian marginal map. Exact
/// evaluation costs an incomplete beta per call, so the map is tabulated once
/// on a sinh-spaced grid and evaluated by cubic Hermite interpolation with
/// exact node slopes (absolute error below 1e-9); arguments beyond the grid
/// fall back to the exact formula.
class TToGaussian {
 public:
  explicit TToGaussian(double nu, int nodes = 4096) : t_(nu) {
    const double x_max = boost::math::quantile(boost::math::complement(t_, 1e-12));
    s_max_ = std::asinh(x_max);
    step_ = 2.0 * s_max_ / (nodes - 1);
    x_.resize(static_cast<std::size_t>(nodes));
    g_.resize(x_.size());
    d_.resize(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) {
      x_[i] = std::sinh(-s_max_ + step_ * static_cast<double>(i));
      g_[i] = exact(x_[i]);
      d_[i] = boost::math::pdf(t_, x_[i]) / boost::math::pdf(gauss_, g_[i]);
    }
  }

  double exact(double x) const {
    // Use the upper tail directly for x > 0 to keep precision near u = 1.
    if (x > 0.0) return -boost::math::quantile(gauss_, clamp_u(boost::math::cdf(boost::math::complement(t_, x))));
    return boost::math::quantile(gauss_, clamp_u(boost::math::cdf(t_, x)));
  }

  double operator()(double x) const {
    const double s = (std::asinh(x) + s_max_) / step_;
    if (!(s >= 0.0) || s >= static_cast<double>(x_.size() - 1)) return exact(x);
    const auto i = static_cast<std::size_t>(s);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * g_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * g_[i + 1] +
           (t3 - t2) * h * d_[i + 1];
  }

 private:
  static double clamp_u(double u) { return std::clamp(u, 1e-300, 1.0 - 1e-16); }

  boost::math::students_t t_;
  boost::math::normal gauss_;
  double s_max_ = 0.0;
  double step_ = 0.0;
  std::vector<double> x_, g_, d_;
};

}  // namespace detail

/// Simulated scenarios. `paths[p]` is horizon x N daily returns (kept only on
/// request); `horizon_returns` is n_paths x N compounded returns.
struct ScenarioSet {
  std::vector<std::string> assets;
  int horizon = 0;
  int n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<Matrix> paths;
  Matrix horizon_returns;
  /// Per-path average of R_t over the horizon, averaged over paths.
  Matrix mean_correlation;
};

struct SimulationOptions {
  int horizon = 21;
  int n_paths = 10000;
  unsigned threads = 1;
  bool keep_paths = false;
};

/// Monte Carlo continuation of a fitted joint model. Each day of each path:
/// t-copula draw -> uniforms -> Gaussian quantiles -> DCC correlation ->
/// GARCH variance -> ARMA mean. Path p uses its own stream (seed, p), and the
/// cross-path reduction runs in path order, so output is bit-identical for
/// any thread count.
inline ScenarioSet simulate_scenarios(const JointModelFit& model, std::uint64_t seed, const SimulationOptions& opt = {}) {
  model.validate();
  require(opt.horizon >= 1 && opt.n_paths >= 1, ErrorKind::ConfigError, "simulate_scenarios: horizon and paths must be positive");
  const Eigen::Index n = model.dim();
  const auto n_paths = static_cast<std::size_t>(opt.n_paths);
  ScenarioSet out;
  out.assets = model.assets;
  out.horizon = opt.horizon;
  out.n_paths = opt.n_paths;
  out.seed = seed;
  out.horizon_returns.resize(opt.n_paths, n);
  if (opt.keep_paths) out.paths.resize(n_paths);
  std::vector<Matrix> path_corr(n_paths);

  const Matrix copula_chol = Eigen::LLT<Matrix>(model.copula.corr).matrixL();
  const detail::TToGaussian to_gaussian(model.copula.nu);

  parallel_for(n_paths, opt.threads, [&](std::size_t p) {
    Engine eng = make_engine(seed, {static_cast<std::uint64_t>(p)});
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi(model.copula.nu);
    std::vector<FilterState> state = model.terminal;
    Matrix q = model.q_next;
    Matrix corr_sum = Matrix::Zero(n, n);
    Matrix daily(opt.horizon, n);
    Vector g(n), e(n);
    for (int h = 0; h < opt.horizon; ++h) {
      for (Eigen::Index k = 0; k < n; ++k) g(k) = normal(eng);
      const double scale = std::sqrt(model.copula.nu / chi(eng));
      const Vector x = copula_chol * g * scale;
      for (Eigen::Index k = 0; k < n; ++k) e(k) = to_gaussian(x(k));
      const Matrix r = normalize_q(q);
      corr_sum += r;
      const Vector z = Eigen::LLT<Matrix>(r).matrixL() * e;
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& par = model.marginals[static_cast<std::size_t>(k)];
        auto& s = state[static_cast<std::size_t>(k)];
        const double m = conditional_mean(par, s);
        const double v = conditional_variance(par, s);
        const double eps = std::sqrt(v) * z(k);
        daily(h, k) = m + eps;
        s = advance(s, m + eps, eps, v);
      }
      q = dcc_update(model.dcc, q, z);
    }
    out.horizon_returns.row(static_cast<Eigen::Index>(p)) = ((daily.array() + 1.0).colwise().prod() - 1.0).matrix();
    path_corr[p] = corr_sum / static_cast<double>(opt.horizon);
    if (opt.keep_paths) out.paths[p] = std::move(daily);
  });

  out.mean_correlation = Matrix::Zero(n, n);
  for (const auto& c : path_corr) out.mean_correlation += c;
  out.mean_correlation /= static_cast<double>(n_paths);
  return out;
}

struct RiskMeasures {
  double var = 0.0;
  double cvar = 0.0;
  double vol = 0.0;
};

/// Empirical VaR/CVaR at confidence alpha, as positive loss fractions, and
/// the sample standard deviation. With k = ceil(n (1 - alpha)), VaR is minus
/// the k-th smallest return and CVaR = VaR + sum((loss - VaR)+) / (n (1 - alpha)),
/// the sample Rockafellar-Uryasev minimum. It equals minus the mean of the k
/// worst returns whenever n (1 - alpha) is an integer.
inline RiskMeasures risk_measures(std::span<const double> sample, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::BadAlpha, "risk_measures: alpha must lie in (0, 1)");
  require(sample.size() >= 100, ErrorKind::SampleTooSmall, "risk_measures: need at least 100 observations");
  const double n = static_cast<double>(sample.size());
  const double tail = n * (1.0 - alpha);
  auto k = static_cast<std::size_t>(std::ceil(tail - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sample.size());
  std::vector<double> sorted(sample.begin(), sample.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  RiskMeasures out;
  out.var = -sorted[k - 1];
  double excess = 0.0;
  for (double r : sample) excess += std::max(-r - out.var, 0.0);
  out.cvar = out.var + excess / tail;
  out.vol = stdev(sample);
  return out;
}

struct RiskForecast {
  double var = 0.0;
  double cvar = 0.0;
  /// Standard deviation of horizon returns, and its daily equivalent vol / sqrt(h).
  double vol = 0.0;
  double daily_vol = 0.0;
  Matrix corr;
  double wpc = 0.0;
  /// Per-asset standard deviation of simulated horizon returns.
  Vector asset_vols;
};

inline Vector scenario_asset_vols(const ScenarioSet& s) {
  Vector v(s.horizon_returns.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const Vector c = s.horizon_returns.col(k);
    v(k) = stdev(as_span(c));
  }
  return v;
}

inline void check_simplex(const Vector& w, const char* who) {
  require(w.size() >= 1 && (w.array() >= -1e-12).all() && std::abs(w.sum() - 1.0) <= 1e-8,
          ErrorKind::WeightSumError, std::string(who) + ": weights must be non-negative and sum to 1");
}

inline RiskForecast forecast_risk(const ScenarioSet& scenarios, const Vector& weights, double alpha) {
  require(weights.size() == scenarios.horizon_returns.cols(), ErrorKind::LengthMismatch,
          "forecast_risk: weight count does not match assets");
  check_simplex(weights, "forecast_risk");
  const Vector port = scenarios.horizon_returns * weights;
  const auto rm = risk_measures(as_span(port), alpha);
  RiskForecast f;
  f.var = rm.var;
  f.cvar = rm.cvar;
  f.vol = rm.vol;
  f.daily_vol = rm.vol / std::sqrt(static_cast<double>(scenarios.horizon));
  f.corr = scenarios.mean_correlation;
  f.asset_vols = scenario_asset_vols(scenarios);
  f.wpc = weights.size() >= 2 ? weighted_pairwise(weights, f.asset_vols, f.corr) : 1.0;
  return f;
}

/// Time-series IC: Pearson correlation between forecasts made at month-end t
/// and realizations over month t + 1 (the caller aligns the two series).
inline double prediction_ic(std::span<const double> predicted, std::span<const double> realized) {
  require(predicted.size() == realized.size(), ErrorKind::LengthMismatch, "prediction_ic: length mismatch");
  require(predicted.size() >= 3, ErrorKind::SeriesTooShort, "prediction_ic: need at least 3 observations");
  return pearson(predicted, realized);
}

}  // namespace dynalloc

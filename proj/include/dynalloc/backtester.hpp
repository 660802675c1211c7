#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynalloc/allocators.hpp"
#include "dynalloc/alpha_models.hpp"
#include "dynalloc/data_panel.hpp"
#include "dynalloc/dependence.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/regime_switch.hpp"
#include "dynalloc/rng.hpp"
#include "dynalloc/scenario_engine.hpp"

namespace dynalloc {

enum class Strategy {
  benchmark,
  equal_weight,
  inverse_vol,
  risk_parity,
  max_diversification,
  min_tail_dependence,
  global_min_var,
  min_var_tail,
  min_cvar,
  max_sharpe,
  max_return_cvar,
};

inline constexpr std::array<Strategy, 11> kAllStrategies{
    Strategy::benchmark,           Strategy::equal_weight,   Strategy::inverse_vol,  Strategy::risk_parity,
    Strategy::max_diversification, Strategy::min_tail_dependence, Strategy::global_min_var, Strategy::min_var_tail,
    Strategy::min_cvar,            Strategy::max_sharpe,     Strategy::max_return_cvar};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::benchmark: return "benchmark";
    case Strategy::equal_weight: return "equal_weight";
    case Strategy::inverse_vol: return "inverse_vol";
    case Strategy::risk_parity: return "risk_parity";
    case Strategy::max_diversification: return "max_diversification";
    case Strategy::min_tail_dependence: return "min_tail_dependence";
    case Strategy::global_min_var: return "global_min_var";
    case Strategy::min_var_tail: return "min_var_tail";
    case Strategy::min_cvar: return "min_cvar";
    case Strategy::max_sharpe: return "max_sharpe";
    case Strategy::max_return_cvar: return "max_return_cvar";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  for (auto s : kAllStrategies)
    if (to_string(s) == name) return s;
  throw Error(ErrorKind::ConfigError, "unknown strategy '" + name + "'");
}

enum class RiskModel { rolling_1y, expanding_5y, garch_dcc_copula };

inline constexpr std::array<RiskModel, 3> kAllRiskModels{RiskModel::rolling_1y, RiskModel::expanding_5y,
                                                         RiskModel::garch_dcc_copula};

inline std::string to_string(RiskModel m) {
  switch (m) {
    case RiskModel::rolling_1y: return "rolling_1y";
    case RiskModel::expanding_5y: return "expanding_5y";
    case RiskModel::garch_dcc_copula: return "garch_dcc_copula";
  }
  return "?";
}

inline RiskModel parse_risk_model(const std::string& name) {
  for (auto m : kAllRiskModels)
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::ConfigError, "unknown risk model '" + name + "'");
}

enum class AlphaKind { naive_short, naive_long, external };

inline bool uses_alpha(Strategy s) { return s == Strategy::max_sharpe || s == Strategy::max_return_cvar; }
inline bool uses_risk_inputs(Strategy s) { return s != Strategy::benchmark && s != Strategy::equal_weight; }

struct BacktestConfig {
  Strategy strategy = Strategy::equal_weight;
  RiskModel risk_model = RiskModel::rolling_1y;
  AlphaKind alpha = AlphaKind::naive_short;
  /// Forecasts for AlphaKind::external; the latest row dated on or before a
  /// rebalance date is used.
  std::shared_ptr<const ForecastSet> forecasts{};
  /// Benchmark mix by asset name; unlisted assets get zero.
  std::map<std::string, double> fixed_weights{};
  /// No rebalance before this date (aligns starts across risk models).
  std::optional<Date> start{};
  double cvar_alpha = 0.95;
  std::uint64_t seed = 0;
  Eigen::Index rolling_days = 252;
  Eigen::Index expanding_min_days = 1260;
  int horizon = 21;
  int n_paths = 10000;
  unsigned threads = 1;
  /// Tail level for empirical tail dependence under the sample risk models.
  double tail_q = 0.05;
  double cost_bps = 0.0;
  JointFitOptions joint{};
  CvarOptions cvar{};
};

/// Risk inputs estimated at one rebalance date. Covariance and vols are
/// annualized; scenarios are horizon returns (S x N).
struct RiskInputs {
  Date date;
  Matrix cov;
  Vector vols;
  Matrix tail_dependence;
  Matrix scenarios;
};

inline Eigen::Index min_history(const BacktestConfig& c) {
  return c.risk_model == RiskModel::rolling_1y ? c.rolling_days : c.expanding_min_days;
}

namespace detail {

/// Overlapping h-day compounded returns.
inline Matrix overlapping_returns(const Matrix& daily, int h) {
  const Eigen::Index s = daily.rows() - h + 1;
  require(s >= 1, ErrorKind::InsufficientHistory, "overlapping_returns: window shorter than horizon");
  Matrix out(s, daily.cols());
  const Matrix logs = daily.array().log1p().matrix();
  Vector acc = logs.topRows(h).colwise().sum().transpose();
  out.row(0) = acc.array().exp().transpose() - 1.0;
  for (Eigen::Index i = 1; i < s; ++i) {
    acc += (logs.row(i + h - 1) - logs.row(i - 1)).transpose();
    out.row(i) = acc.array().exp().transpose() - 1.0;
  }
  return out;
}

/// Tail-dependence matrices need not be PSD; project when they are not.
inline Matrix psd_tail_matrix(Matrix lambda) {
  lambda = symmetrize(lambda);
  lambda.diagonal().setOnes();
  if (min_eigenvalue(lambda) < 0.0) lambda = nearest_correlation(lambda);
  return lambda;
}

}  // namespace detail

/// Incrementally estimates risk inputs at successive dates; keeps the
/// previous joint fit as the warm start for the next.
class RiskEstimator {
 public:
  explicit RiskEstimator(BacktestConfig cfg) : cfg_(std::move(cfg)) {}

  RiskInputs estimate(const ReturnPanel& panel, const Date& date) {
    const ReturnPanel hist = panel.truncate_after(date);
    require(hist.rows() >= min_history(cfg_), ErrorKind::InsufficientHistory,
            "risk inputs at " + date.to_string() + ": not enough history");
    RiskInputs in;
    in.date = date;
    if (cfg_.risk_model == RiskModel::garch_dcc_copula) {
      const JointModelFit fit =
          fit_joint(hist, FitWindow::expanding(cfg_.expanding_min_days), cfg_.joint, prev_ ? &*prev_ : nullptr);
      SimulationOptions sim;
      sim.horizon = cfg_.horizon;
      sim.n_paths = cfg_.n_paths;
      sim.threads = cfg_.threads;
      const auto s = simulate_scenarios(fit, derive_seed(cfg_.seed, {static_cast<std::uint64_t>(date.serial())}), sim);
      in.scenarios = s.horizon_returns;
      in.cov = sample_covariance(s.horizon_returns) * (kTradingDays / cfg_.horizon);
      // The copula is fitted on DCC-whitened residuals, so its own matrix is
      // near identity; lambda is taken at the model's forecast correlation.
      in.tail_dependence = detail::psd_tail_matrix(t_tail_dependence(TCopulaParams{cov_to_corr(in.cov), fit.copula.nu}));
      prev_ = fit;
    } else {
      const Eigen::Index rows = cfg_.risk_model == RiskModel::rolling_1y ? cfg_.rolling_days : hist.rows();
      const Matrix window = hist.values().bottomRows(rows);
      in.cov = sample_covariance(window) * kTradingDays;
      in.scenarios = detail::overlapping_returns(window, cfg_.horizon);
      const Matrix u = pseudo_observations(window);
      Matrix lambda = Matrix::Identity(window.cols(), window.cols());
      for (Eigen::Index i = 0; i < window.cols(); ++i)
        for (Eigen::Index j = i + 1; j < window.cols(); ++j) {
          const Vector a = u.col(i), b = u.col(j);
          lambda(i, j) = lambda(j, i) = empirical_tail_dependence(as_span(a), as_span(b), cfg_.tail_q);
        }
      in.tail_dependence = detail::psd_tail_matrix(lambda);
    }
    in.vols = in.cov.diagonal().cwiseSqrt();
    return in;
  }

 private:
  BacktestConfig cfg_;
  std::optional<JointModelFit> prev_;
};

/// Month-end dates at which the config rebalances.
inline std::vector<Date> rebalance_dates(const ReturnPanel& panel, const BacktestConfig& cfg) {
  std::vector<Date> out;
  const Eigen::Index need = min_history(cfg);
  for (auto r : month_end_rows(panel)) {
    const Date& d = panel.dates()[static_cast<std::size_t>(r)];
    if (r + 1 < need) continue;
    if (cfg.start && d < *cfg.start) continue;
    out.push_back(d);
  }
  return out;
}

/// Risk inputs for every rebalance date of the config (shared by all
/// strategies under one risk model).
inline std::vector<RiskInputs> risk_input_series(const ReturnPanel& panel, const BacktestConfig& cfg) {
  RiskEstimator est(cfg);
  std::vector<RiskInputs> out;
  for (const auto& d : rebalance_dates(panel, cfg)) out.push_back(est.estimate(panel, d));
  return out;
}

struct Rebalance {
  Date date;
  Vector weights;
  std::string flags;
};

struct BacktestResult {
  std::string strategy;
  std::string risk_model;
  std::vector<std::string> assets;
  /// Wealth is 1 at the first rebalance date and marked every trading day after.
  std::vector<Date> dates;
  std::vector<double> wealth;
  std::vector<Rebalance> rebalances;
  /// Risk inputs at the final rebalance (empty for strategies without them).
  std::optional<RiskInputs> last_inputs;
};

namespace detail {

inline Vector fixed_weight_vector(const ReturnPanel& panel, const std::map<std::string, double>& fixed) {
  require(!fixed.empty(), ErrorKind::ConfigError, "benchmark: no fixed weights configured");
  Vector w = Vector::Zero(panel.cols());
  for (const auto& [name, v] : fixed) w(panel.asset_index(name)) = v;
  check_simplex(w, "benchmark");
  return w;
}

inline std::optional<Vector> alpha_at(const ReturnPanel& panel, const BacktestConfig& cfg, const Date& d, bool& look_ahead) {
  if (cfg.alpha == AlphaKind::external) {
    require(cfg.forecasts != nullptr, ErrorKind::ConfigError, "external alpha: no forecasts supplied");
    const auto& f = *cfg.forecasts;
    look_ahead = f.look_ahead;
    const auto it = std::upper_bound(f.dates.begin(), f.dates.end(), d);
    if (it == f.dates.begin()) return std::nullopt;
    const auto row = static_cast<Eigen::Index>(it - f.dates.begin()) - 1;
    Vector v(panel.cols());
    for (Eigen::Index k = 0; k < panel.cols(); ++k) {
      const auto pos = std::find(f.assets.begin(), f.assets.end(), panel.assets()[static_cast<std::size_t>(k)]);
      require(pos != f.assets.end(), ErrorKind::UnknownAsset, "external alpha: missing asset");
      v(k) = f.values(row, static_cast<Eigen::Index>(pos - f.assets.begin()));
    }
    if (!v.allFinite()) return std::nullopt;
    return v;
  }
  const auto mode = cfg.alpha == AlphaKind::naive_long ? NaiveMode::long_term : NaiveMode::short_term;
  if (panel.rows() < static_cast<Eigen::Index>(kTradingDays)) return std::nullopt;
  const ForecastSet f = naive_forecasts(panel, mode, {d});
  look_ahead = f.look_ahead;
  const Vector v = f.values.row(0).transpose();
  if (!v.allFinite()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Target weights for one strategy at rebalance date d, using only rows of
/// `panel` dated on or before d except for the long-term naive alpha. Flags
/// collect fallbacks and look-ahead markers (';'-separated).
inline Vector strategy_weights(const ReturnPanel& panel, const BacktestConfig& cfg, const Date& d,
                               const RiskInputs* in, std::string& flags) {
  const Eigen::Index n = panel.cols();
  auto add_flag = [&](const std::string& f) { flags += (flags.empty() ? "" : ";") + f; };
  if (cfg.strategy == Strategy::benchmark) return detail::fixed_weight_vector(panel, cfg.fixed_weights);
  if (cfg.strategy == Strategy::equal_weight) return equal_weights(n);
  require(in != nullptr, ErrorKind::ConfigError, to_string(cfg.strategy) + ": risk inputs required");
  switch (cfg.strategy) {
    case Strategy::inverse_vol: return inverse_vol_weights(in->vols);
    case Strategy::risk_parity: return risk_parity(in->cov);
    case Strategy::max_diversification: return max_diversification(in->cov);
    case Strategy::min_tail_dependence: return quadratic_min(in->tail_dependence);
    case Strategy::global_min_var: return quadratic_min(in->cov);
    case Strategy::min_var_tail:
      return quadratic_min(in->vols.asDiagonal() * in->tail_dependence * in->vols.asDiagonal());
    case Strategy::min_cvar: return min_cvar(in->scenarios, cfg.cvar_alpha, cfg.cvar);
    case Strategy::max_sharpe:
    case Strategy::max_return_cvar: {
      bool look_ahead = false;
      // Only the long-term naive forecast sees the full panel (flagged as look-ahead).
      const auto mu = detail::alpha_at(cfg.alpha == AlphaKind::naive_long ? panel : panel.truncate_after(d), cfg, d,
                                       look_ahead);
      if (look_ahead) add_flag("look_ahead_alpha");
      const bool sharpe = cfg.strategy == Strategy::max_sharpe;
      if (!mu) {
        add_flag(sharpe ? "no_forecast:min_variance" : "no_forecast:min_cvar");
        return sharpe ? quadratic_min(in->cov) : min_cvar(in->scenarios, cfg.cvar_alpha, cfg.cvar);
      }
      const Allocation a = sharpe ? max_sharpe(*mu, in->cov) : max_return_cvar(*mu, in->scenarios, cfg.cvar_alpha, cfg.cvar);
      if (a.fallback) add_flag(a.flag);
      return a.weights;
    }
    default: break;
  }
  throw Error(ErrorKind::ConfigError, "unhandled strategy");
}

/// Monthly walk-forward: rebalance at each eligible month-end to the
/// strategy's target, hold buy-and-hold until the next month-end, and
/// compound daily. `inputs`, when given, must be risk_input_series output
/// for the same panel and risk model.
inline BacktestResult walk_forward(const ReturnPanel& panel, const BacktestConfig& cfg,
                                   const std::vector<RiskInputs>* inputs = nullptr) {
  const auto dates = rebalance_dates(panel, cfg);
  require(!dates.empty(), ErrorKind::InsufficientHistory,
          "walk_forward: panel has no month-end with " + std::to_string(min_history(cfg)) + " rows of history");
  const bool need = uses_risk_inputs(cfg.strategy);
  if (need && inputs)
    require(inputs->size() == dates.size(), ErrorKind::ConfigError, "walk_forward: risk inputs do not match dates");

  BacktestResult res;
  res.strategy = to_string(cfg.strategy);
  res.risk_model = to_string(cfg.risk_model);
  res.assets = panel.assets();
  RiskEstimator est(cfg);

  const auto& pd = panel.dates();
  Eigen::Index row = panel.rows_through(dates.front()) - 1;
  res.dates.push_back(pd[static_cast<std::size_t>(row)]);
  res.wealth.push_back(1.0);
  double wealth = 1.0;
  Vector held = Vector::Zero(panel.cols());
  const double cost = cfg.cost_bps * 1e-4;

  for (std::size_t k = 0; k < dates.size(); ++k) {
    std::optional<RiskInputs> own;
    const RiskInputs* in = nullptr;
    if (need) {
      if (inputs) {
        in = &(*inputs)[k];
      } else {
        own = est.estimate(panel, dates[k]);
        in = &*own;
      }
    }
    Rebalance rb;
    rb.date = dates[k];
    rb.weights = strategy_weights(panel, cfg, dates[k], in, rb.flags);
    check_simplex(rb.weights, "walk_forward");
    if (cost > 0.0) {
      wealth *= 1.0 - cost * (rb.weights - held).cwiseAbs().sum();
      res.wealth.back() = wealth;
    }
    held = rb.weights;
    if (in && k + 1 == dates.size()) res.last_inputs = *in;
    res.rebalances.push_back(std::move(rb));

    const Eigen::Index end = k + 1 < dates.size() ? panel.rows_through(dates[k + 1]) : panel.rows();
    for (++row; row < end; ++row) {
      const Vector r = panel.values().row(row).transpose();
      const double rp = held.dot(r);
      wealth *= 1.0 + rp;
      held = held.cwiseProduct((Vector::Ones(r.size()) + r)) / (1.0 + rp);
      res.dates.push_back(pd[static_cast<std::size_t>(row)]);
      res.wealth.push_back(wealth);
    }
    row = end - 1;
  }
  return res;
}

/// Daily returns implied by a wealth curve.
inline std::vector<double> daily_returns(const BacktestResult& r) {
  std::vector<double> out;
  for (std::size_t i = 1; i < r.wealth.size(); ++i) out.push_back(r.wealth[i] / r.wealth[i - 1] - 1.0);
  return out;
}

/// Month-end to month-end returns of a wealth curve, dated at the later
/// month-end (the final partial month included).
inline DatedSeries monthly_returns(const BacktestResult& r) {
  DatedSeries out;
  std::size_t prev = 0;
  for (std::size_t i = 1; i < r.dates.size(); ++i) {
    if (i + 1 == r.dates.size() || !r.dates[i].same_month(r.dates[i + 1])) {
      out.dates.push_back(r.dates[i]);
      out.values.push_back(r.wealth[i] / r.wealth[prev] - 1.0);
      prev = i;
    }
  }
  return out;
}

inline double max_drawdown(std::span<const double> wealth) {
  double peak = -std::numeric_limits<double>::infinity(), dd = 0.0;
  for (double w : wealth) {
    peak = std::max(peak, w);
    dd = std::max(dd, 1.0 - w / peak);
  }
  return dd;
}

struct StrategyMetrics {
  double ann_return = 0.0;
  double ann_vol = 0.0;
  double sharpe = 0.0;
  double max_drawdown = 0.0;
  double realized_cvar = 0.0;
  double diversification_ratio = kNaN;
  double wptd = kNaN;
};

struct MetricsOptions {
  double risk_free = 0.0;
  double alpha = 0.95;
};

/// Annualized return/vol, Sharpe (excess over risk_free), max drawdown,
/// realized CVaR of monthly returns, and DR / weighted portfolio tail
/// dependence of the final weights under `inputs` (NaN when not available).
inline StrategyMetrics performance_metrics(const BacktestResult& r, const RiskInputs* inputs = nullptr,
                                           const MetricsOptions& opt = {}) {
  const auto d = daily_returns(r);
  require(d.size() >= static_cast<std::size_t>(kTradingDays), ErrorKind::ResultTooShort,
          "performance_metrics: need at least one year of results");
  StrategyMetrics m;
  const double growth = r.wealth.back() / r.wealth.front();
  m.ann_return = std::pow(growth, kTradingDays / static_cast<double>(d.size())) - 1.0;
  const double sd = stdev(d);
  m.ann_vol = sd * std::sqrt(kTradingDays);
  require(sd > 1e-12 * std::max(1.0, std::abs(mean(d))), ErrorKind::ZeroVol,
          "performance_metrics: zero volatility, Sharpe undefined");
  m.sharpe = (m.ann_return - opt.risk_free) / m.ann_vol;
  m.max_drawdown = max_drawdown(r.wealth);
  const auto monthly = monthly_returns(r);
  if (!monthly.values.empty()) m.realized_cvar = detail::cvar_of(to_eigen(monthly.values), opt.alpha);
  if (!inputs && r.last_inputs) inputs = &*r.last_inputs;
  if (inputs && !r.rebalances.empty()) {
    const Vector& w = r.rebalances.back().weights;
    m.diversification_ratio = diversification_ratio(w, inputs->cov);
    if ((w.cwiseProduct(inputs->vols).array() > 0.0).count() >= 2)
      m.wptd = weighted_pairwise(w, inputs->vols, inputs->tail_dependence);
  }
  return m;
}

/// Annualized (x12) mean monthly return per regime label, aligned by date.
template <class Label>
std::map<Label, double> regime_breakdown(const BacktestResult& r, const std::vector<Date>& label_dates,
                                         const std::vector<std::optional<Label>>& labels) {
  require(label_dates.size() == labels.size(), ErrorKind::LengthMismatch, "regime_breakdown: length mismatch");
  const auto monthly = monthly_returns(r);
  std::map<Label, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < monthly.size(); ++i) {
    const auto it = std::lower_bound(label_dates.begin(), label_dates.end(), monthly.dates[i]);
    if (it == label_dates.end() || *it != monthly.dates[i]) continue;
    const auto& lab = labels[static_cast<std::size_t>(it - label_dates.begin())];
    if (!lab) continue;
    acc[*lab].first += monthly.values[i];
    acc[*lab].second += 1;
  }
  require(!acc.empty(), ErrorKind::NoOverlap, "regime_breakdown: no labeled month overlaps the result");
  std::map<Label, double> out;
  for (const auto& [lab, s] : acc) out[lab] = 12.0 * s.first / static_cast<double>(s.second);
  return out;
}

struct Merge {
  /// Cluster ids: 0..K-1 are strategies, K + i is the cluster formed by merge i.
  std::size_t a = 0;
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct ClusterResult {
  Matrix corr;
  Matrix distance;
  std::vector<Merge> linkage;
  /// Leaf order of the dendrogram.
  std::vector<std::size_t> order;
  /// Eigenvalues of the correlation matrix, descending, divided by K.
  Vector eigen_ratios;
};

/// Average-linkage agglomerative clustering on d_ij = sqrt(2 (1 - rho_ij)).
/// Ties merge the pair with the smallest cluster ids first.
inline ClusterResult cluster_strategies(const Matrix& returns) {
  const Eigen::Index k = returns.cols();
  require(k >= 2, ErrorKind::TooFewStrategies, "cluster_strategies: need at least two strategies");
  require(returns.rows() >= 12, ErrorKind::SeriesTooShort, "cluster_strategies: need at least 12 periods");
  ClusterResult out;
  out.corr = sample_correlation(returns);
  out.distance = (2.0 * (1.0 - out.corr.array())).max(0.0).sqrt().matrix();
  out.distance.diagonal().setZero();

  Eigen::SelfAdjointEigenSolver<Matrix> es(out.corr, Eigen::EigenvaluesOnly);
  out.eigen_ratios = es.eigenvalues().reverse() / static_cast<double>(k);

  struct Node {
    std::size_t id;
    std::vector<std::size_t> leaves;
  };
  std::vector<Node> active;
  for (Eigen::Index i = 0; i < k; ++i) active.push_back({static_cast<std::size_t>(i), {static_cast<std::size_t>(i)}});
  auto dist = [&](const Node& x, const Node& y) {
    double s = 0.0;
    for (auto i : x.leaves)
      for (auto j : y.leaves) s += out.distance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return s / static_cast<double>(x.leaves.size() * y.leaves.size());
  };
  std::size_t next_id = static_cast<std::size_t>(k);
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double dd = dist(active[i], active[j]);
        if (dd < best - 1e-15) {
          best = dd;
          bi = i;
          bj = j;
        }
      }
    Node merged{next_id++, active[bi].leaves};
    merged.leaves.insert(merged.leaves.end(), active[bj].leaves.begin(), active[bj].leaves.end());
    out.linkage.push_back({std::min(active[bi].id, active[bj].id), std::max(active[bi].id, active[bj].id), best,
                           merged.leaves.size()});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active[bi] = std::move(merged);
  }
  out.order = active.front().leaves;
  return out;
}

/// One backtest per (strategy, risk model) cell. Risk inputs are estimated
/// once per risk model and shared; cells run in parallel with results that
/// do not depend on the schedule. The common start is the latest minimum
/// window among the risk models requested.
inline std::vector<BacktestResult> run_comparison(const ReturnPanel& panel, const std::vector<Strategy>& strategies,
                                                  const std::vector<RiskModel>& models, BacktestConfig base) {
  if (!base.start) {
    Eigen::Index need = 0;
    for (auto m : models) {
      BacktestConfig c = base;
      c.risk_model = m;
      need = std::max(need, min_history(c));
    }
    require(panel.rows() >= need, ErrorKind::InsufficientHistory, "run_comparison: panel shorter than the longest window");
    base.start = panel.dates()[static_cast<std::size_t>(need - 1)];
  }
  std::vector<std::vector<RiskInputs>> inputs(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    BacktestConfig c = base;
    c.risk_model = models[i];
    inputs[i] = risk_input_series(panel, c);
  }
  std::vector<BacktestResult> out(strategies.size() * models.size());
  parallel_for(out.size(), base.threads, [&](std::size_t cell) {
    BacktestConfig c = base;
    c.strategy = strategies[cell / models.size()];
    c.risk_model = models[cell % models.size()];
    c.threads = 1;
    out[cell] = walk_forward(panel, c, &inputs[cell % models.size()]);
    if (!out[cell].last_inputs && !inputs[cell % models.size()].empty())
      out[cell].last_inputs = inputs[cell % models.size()].back();
  });
  return out;
}

}  // namespace dynalloc

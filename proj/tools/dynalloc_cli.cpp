// dynalloc: batch front end for the risk, regime and allocation pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dynalloc/dynalloc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dynalloc;

namespace {

struct Common {
  std::uint64_t seed = 0;
  double alpha = 0.95;
  int horizon = 21;
  int paths = 10000;
  unsigned threads = 1;
  std::string out = "out";
  std::string input;
  std::string kind = "returns";
};

std::string fmt(double v) { return csv::format(v); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::ConfigError, "cannot write '" + path.string() + "'");
  f << text;
}

ReturnPanel read_panel(const Common& c) {
  require(!c.input.empty(), ErrorKind::ConfigError, "--input is required");
  return load_panel(c.input, c.kind == "prices" ? PanelKind::prices : PanelKind::returns);
}

std::map<std::string, double> parse_weights(const std::string& spec) {
  std::map<std::string, double> w;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, ErrorKind::ConfigError, "weights must look like NAME=0.5,NAME=0.5");
    w[std::string(csv::trim(item.substr(0, eq)))] = csv::parse_number(csv::trim(item.substr(eq + 1)), "weights");
  }
  return w;
}

Vector weight_vector(const ReturnPanel& panel, const std::string& spec) {
  if (spec.empty()) return equal_weights(panel.cols());
  Vector w = Vector::Zero(panel.cols());
  for (const auto& [name, v] : parse_weights(spec)) w(panel.asset_index(name)) = v;
  check_simplex(w, "--weights");
  return w;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto v : csv::split(s)) out.emplace_back(v);
  return out;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json to_json(const JointModelFit& f, const ReturnPanel& panel) {
  json j;
  const Eigen::Index first = panel.rows() - f.window.rows;
  j["assets"] = f.assets;
  j["window"] = {{"kind", f.window.kind == WindowKind::expanding ? "expanding" : "rolling"},
                 {"start", f.window.start.to_string()},
                 {"end", f.window.end.to_string()},
                 {"rows", f.window.rows}};
  for (std::size_t i = 0; i < f.marginals.size(); ++i) {
    const auto& p = f.marginals[i];
    const auto& s = f.terminal[i];
    const Vector x = panel.values().col(static_cast<Eigen::Index>(i)).tail(panel.rows() - first);
    j["marginals"].push_back({{"asset", f.assets[i]},
                              {"mu", p.mu},
                              {"phi", p.phi},
                              {"theta", p.theta},
                              {"alpha0", p.alpha0},
                              {"alpha1", p.alpha1},
                              {"beta1", p.beta1},
                              {"gamma", p.gamma},
                              {"loglik", filter_residuals(p, as_span(x)).loglik},
                              {"terminal",
                               {{"has_history", s.has_history},
                                {"last_return", s.last_return},
                                {"last_residual", s.last_residual},
                                {"last_variance", s.last_variance}}}});
  }
  j["dcc"] = {{"a", f.dcc.a},
              {"b", f.dcc.b},
              {"loglik", detail::dcc_loglik(f.dcc.a, f.dcc.b, f.dcc.rbar, f.std_residuals)},
              {"rbar", to_json(f.dcc.rbar)},
              {"q_next", to_json(f.q_next)}};
  j["copula"] = {{"nu", f.copula.nu}, {"corr", to_json(f.copula.corr)}};
  return j;
}

// --- fit ---------------------------------------------------------------------

struct FitArgs {
  std::string window = "expanding";
  long window_days = 1260;
  bool gjr = false;
  std::string correlation = "dcc";
};

FitWindow make_window(const std::string& kind, long days) {
  require(kind == "expanding" || kind == "rolling", ErrorKind::ConfigError, "--window must be expanding or rolling");
  return kind == "expanding" ? FitWindow::expanding(days) : FitWindow::rolling(days);
}

JointFitOptions joint_options(bool gjr, const std::string& corr) {
  require(corr == "dcc" || corr == "ccc", ErrorKind::ConfigError, "--correlation must be dcc or ccc");
  JointFitOptions o;
  o.gjr = gjr;
  o.correlation = corr == "dcc" ? CorrelationMode::dcc : CorrelationMode::ccc;
  return o;
}

void run_fit(const Common& c, const FitArgs& a) {
  const auto panel = read_panel(c);
  const auto fit = fit_joint(panel, make_window(a.window, a.window_days), joint_options(a.gjr, a.correlation));
  write_file(fs::path(c.out) / "fit.json", to_json(fit, panel).dump(2) + "\n");
}

// --- forecast ----------------------------------------------------------------

struct ForecastArgs {
  std::string weights;
  long window_days = 1260;
  std::string implied_vol;
  std::string implied_column = "implied_vol";
  std::string equity;
};

void run_forecast(const Common& c, const ForecastArgs& a) {
  const auto panel = read_panel(c);
  ForecastSeriesOptions o;
  o.window = FitWindow::expanding(a.window_days);
  o.sim.horizon = c.horizon;
  o.sim.n_paths = c.paths;
  o.sim.threads = c.threads;
  o.alpha = c.alpha;
  o.seed = c.seed;
  const auto series = forecast_series(panel, weight_vector(panel, a.weights), o);
  require(!series.empty(), ErrorKind::InsufficientHistory, "forecast: no month-end with enough history");

  // Portfolio rows first (vol is over the horizon; daily_vol alongside),
  // then per-asset rows and the long-format correlation forecast.
  std::ostringstream risk, assets, corr;
  risk << "date,cvar,vol,wpc,var,daily_vol\n";
  assets << "date,asset,var,cvar,vol,daily_vol\n";
  corr << "date,asset_i,asset_j,corr\n";
  const double root_h = std::sqrt(static_cast<double>(c.horizon));
  for (const auto& f : series) {
    const auto d = f.date.to_string();
    risk << d << ',' << fmt(f.portfolio.cvar) << ',' << fmt(f.portfolio.vol) << ',' << fmt(f.portfolio.wpc) << ','
         << fmt(f.portfolio.var) << ',' << fmt(f.portfolio.daily_vol) << '\n';
    for (Eigen::Index k = 0; k < panel.cols(); ++k)
      assets << d << ',' << panel.assets()[static_cast<std::size_t>(k)] << ',' << fmt(f.asset_var(k)) << ','
             << fmt(f.asset_cvar(k)) << ',' << fmt(f.portfolio.asset_vols(k)) << ','
             << fmt(f.portfolio.asset_vols(k) / root_h) << '\n';
    for (Eigen::Index i = 0; i < panel.cols(); ++i)
      for (Eigen::Index j = i + 1; j < panel.cols(); ++j)
        corr << d << ',' << panel.assets()[static_cast<std::size_t>(i)] << ','
             << panel.assets()[static_cast<std::size_t>(j)] << ',' << fmt(f.portfolio.corr(i, j)) << '\n';
  }
  write_file(fs::path(c.out) / "risk_forecast.csv", risk.str());
  write_file(fs::path(c.out) / "asset_risk_forecast.csv", assets.str());
  write_file(fs::path(c.out) / "correlation_forecast.csv", corr.str());

  if (!a.implied_vol.empty()) {
    // Regime-model inputs: forecast portfolio CVaR, lagged VRP, and the
    // forecast WPC as the correlation-regime observable.
    const auto iv_table = load_table(a.implied_vol);
    const Eigen::Index col = iv_table.column_index(a.implied_column);
    DatedSeries iv, eq;
    const auto me = month_ends(panel);
    for (Eigen::Index r = 0; r < iv_table.values.rows(); ++r) {
      const Date& d = iv_table.dates[static_cast<std::size_t>(r)];
      if (std::binary_search(me.begin(), me.end(), d) && std::isfinite(iv_table.values(r, col)) &&
          panel.rows_through(d) >= 21) {
        iv.dates.push_back(d);
        iv.values.push_back(iv_table.values(r, col));
      }
    }
    const Eigen::Index e = a.equity.empty() ? 0 : panel.asset_index(a.equity);
    eq.dates = panel.dates();
    for (Eigen::Index r = 0; r < panel.rows(); ++r) eq.values.push_back(panel.values()(r, e));
    const auto in = regime_inputs(series, vrp(iv, eq));
    std::ostringstream out;
    out << "date,y,driver,corr\n";
    for (std::size_t i = 0; i < in.dates.size(); ++i)
      out << in.dates[i].to_string() << ',' << fmt(in.y[i]) << ',' << fmt(in.driver[i]) << ','
          << fmt(series[i].portfolio.wpc) << '\n';
    write_file(fs::path(c.out) / "regime_inputs.csv", out.str());
  }
}

// --- regimes -----------------------------------------------------------------

struct RegimeArgs {
  std::string y_column = "y";
  std::string driver_column = "driver";
  std::string corr_column = "corr";
  std::size_t min_window = 60;
  double threshold = 0.5;
};

json ms_json(const MsFit& fit) {
  const auto& p = fit.params;
  return {{"beta0", {p.beta0[0], p.beta0[1]}}, {"beta1", {p.beta1[0], p.beta1[1]}},
          {"sigma", {p.sigma[0], p.sigma[1]}}, {"phi", p.phi},
          {"c", {p.c[0], p.c[1]}},             {"d", {p.d[0], p.d[1]}},
          {"loglik", fit.loglik},              {"degenerate", fit.degenerate},
          {"converged", fit.converged}};
}

void run_regimes(const Common& c, const RegimeArgs& a) {
  require(!c.input.empty(), ErrorKind::ConfigError, "--input is required");
  const auto t = load_table(c.input);
  auto column = [&](const std::string& name) {
    const Vector v = t.values.col(t.column_index(name));
    require(v.allFinite(), ErrorKind::MissingValue, "regimes: column '" + name + "' has missing values");
    return to_std(v);
  };
  const auto y = column(a.y_column), x = column(a.driver_column);
  OosOptions oo;
  oo.min_window = a.min_window;
  const auto fit = fit_ms(y, x);
  const auto oos = oos_regime_probs(y, x, oo);
  const auto risk = label_regimes(oos, a.threshold);

  // Correlation regime from the same model on the correlation observable.
  const bool has_corr = std::find(t.columns.begin(), t.columns.end(), a.corr_column) != t.columns.end();
  std::vector<std::optional<Regime>> corr(y.size());
  json out_json = {{"risk", ms_json(fit)}};
  if (has_corr) {
    const auto z = column(a.corr_column);
    out_json["correlation"] = ms_json(fit_ms(z, x));
    corr = label_regimes(oos_regime_probs(z, x, oo), a.threshold);
  }

  std::ostringstream out;
  out << "date,prob_predicted,prob_filtered,prob_smoothed,prob_oos,label_risk,label_corr,four_state\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    out << t.dates[i].to_string() << ',' << fmt(fit.probs.predicted[i]) << ',' << fmt(fit.probs.filtered[i]) << ','
        << fmt(fit.probs.smoothed[i]) << ',' << fmt(oos[i]) << ',' << (risk[i] ? to_string(*risk[i]) : "") << ','
        << (corr[i] ? to_string(*corr[i]) : "") << ',';
    if (risk[i] && corr[i]) out << to_string(four_state(*risk[i], *corr[i]));
    out << '\n';
  }
  write_file(fs::path(c.out) / "regimes.csv", out.str());
  write_file(fs::path(c.out) / "ms_fit.json", out_json.dump(2) + "\n");
}

// --- allocate / backtest shared ------------------------------------------------

struct StrategyArgs {
  std::string benchmark;
  std::string alpha_model = "naive_short";
  std::string forecasts;
  long rolling_days = 252;
  long expanding_days = 1260;
  double cost_bps = 0.0;
  double tail_q = 0.05;
  std::string start;
};

BacktestConfig base_config(const Common& c, const StrategyArgs& a) {
  BacktestConfig cfg;
  cfg.cvar_alpha = c.alpha;
  cfg.horizon = c.horizon;
  cfg.n_paths = c.paths;
  cfg.threads = c.threads;
  cfg.seed = c.seed;
  cfg.rolling_days = a.rolling_days;
  cfg.expanding_min_days = a.expanding_days;
  cfg.cost_bps = a.cost_bps;
  cfg.tail_q = a.tail_q;
  if (!a.benchmark.empty()) cfg.fixed_weights = parse_weights(a.benchmark);
  if (!a.start.empty()) cfg.start = Date::parse(a.start);
  if (a.alpha_model == "naive_short") {
    cfg.alpha = AlphaKind::naive_short;
  } else if (a.alpha_model == "naive_long") {
    cfg.alpha = AlphaKind::naive_long;
  } else if (a.alpha_model == "external") {
    require(!a.forecasts.empty(), ErrorKind::ConfigError, "--alpha-model external needs --forecasts");
    const auto t = load_table(a.forecasts);
    auto f = std::make_shared<ForecastSet>();
    f->dates = t.dates;
    f->assets = t.columns;
    f->values = t.values;
    cfg.forecasts = f;
    cfg.alpha = AlphaKind::external;
  } else {
    throw Error(ErrorKind::ConfigError, "--alpha-model must be naive_short, naive_long or external");
  }
  return cfg;
}

std::string weights_rows(const std::vector<std::string>& assets, const Rebalance& rb, const std::string& strategy) {
  std::ostringstream o;
  for (std::size_t k = 0; k < assets.size(); ++k)
    o << rb.date.to_string() << ',' << assets[k] << ',' << fmt(rb.weights(static_cast<Eigen::Index>(k))) << ','
      << strategy << ',' << rb.flags << '\n';
  return o.str();
}

// --- allocate ----------------------------------------------------------------

struct AllocateArgs {
  std::string strategy = "risk_parity";
  std::string risk_model = "garch_dcc_copula";
  std::string as_of;
  int resample = 0;
};

void run_allocate(const Common& c, const StrategyArgs& sa, const AllocateArgs& a) {
  const auto panel = read_panel(c);
  BacktestConfig cfg = base_config(c, sa);
  cfg.strategy = parse_strategy(a.strategy);
  cfg.risk_model = parse_risk_model(a.risk_model);
  const Date d = a.as_of.empty() ? panel.dates().back() : Date::parse(a.as_of);
  const auto hist = panel.truncate_after(d);
  require(hist.rows() >= 1, ErrorKind::InsufficientHistory, "allocate: no data on or before " + d.to_string());
  const Date as_of = hist.dates().back();

  std::string flags;
  Vector w;
  const bool scenario_based = cfg.strategy == Strategy::min_cvar || cfg.strategy == Strategy::max_return_cvar;
  if (a.resample > 0 && scenario_based) {
    require(cfg.risk_model == RiskModel::garch_dcc_copula, ErrorKind::ConfigError,
            "--resample needs the garch_dcc_copula risk model");
    const auto fit = fit_joint(hist, FitWindow::expanding(cfg.expanding_min_days), cfg.joint);
    SimulationOptions sim;
    sim.horizon = cfg.horizon;
    sim.n_paths = cfg.n_paths;
    sim.threads = cfg.threads;
    RiskEstimator est(cfg);
    const RiskInputs base_in = est.estimate(hist, as_of);
    auto optimizer = [&](const ScenarioSet& s) {
      RiskInputs in = base_in;
      in.scenarios = s.horizon_returns;
      std::string f;
      return strategy_weights(panel, cfg, as_of, &in, f);
    };
    w = resampled_weights(optimizer, fit, c.seed, a.resample, sim);
    flags = "resampled_" + std::to_string(a.resample);
  } else {
    std::optional<RiskInputs> in;
    if (uses_risk_inputs(cfg.strategy)) {
      RiskEstimator est(cfg);
      in = est.estimate(hist, as_of);
    }
    w = strategy_weights(panel, cfg, as_of, in ? &*in : nullptr, flags);
  }
  Rebalance rb{as_of, w, flags};
  write_file(fs::path(c.out) / "weights.csv",
             "date,asset,weight,strategy,flags\n" + weights_rows(panel.assets(), rb, a.strategy + "/" + a.risk_model));
}

// --- backtest ----------------------------------------------------------------

struct BacktestArgs {
  std::string strategies = "all";
  std::string risk_models = "rolling_1y,expanding_5y,garch_dcc_copula";
  std::string labels;
  double risk_free = 0.0;
};

void run_backtest(const Common& c, const StrategyArgs& sa, const BacktestArgs& a) {
  const auto panel = read_panel(c);
  const BacktestConfig base = base_config(c, sa);
  std::vector<Strategy> strategies;
  if (a.strategies == "all") {
    for (auto s : kAllStrategies)
      if (s != Strategy::benchmark || !base.fixed_weights.empty()) strategies.push_back(s);
  } else {
    for (const auto& s : split_list(a.strategies)) strategies.push_back(parse_strategy(s));
  }
  std::vector<RiskModel> models;
  for (const auto& m : split_list(a.risk_models)) models.push_back(parse_risk_model(m));
  require(!strategies.empty() && !models.empty(), ErrorKind::ConfigError, "backtest: nothing to run");

  const auto results = run_comparison(panel, strategies, models, base);

  const fs::path dir = fs::path(c.out);
  std::ostringstream summary, weights;
  summary << "strategy,risk_model,ann_return,ann_vol,sharpe,max_drawdown,realized_cvar,diversification_ratio,wptd\n";
  weights << "date,asset,weight,strategy,flags\n";
  MetricsOptions mo;
  mo.risk_free = a.risk_free;
  mo.alpha = c.alpha;
  for (const auto& r : results) {
    const std::string tag = r.strategy + "/" + r.risk_model;
    std::ostringstream w;
    w << "date,wealth\n";
    for (std::size_t i = 0; i < r.dates.size(); ++i) w << r.dates[i].to_string() << ',' << fmt(r.wealth[i]) << '\n';
    write_file(dir / ("wealth_" + r.strategy + "_" + r.risk_model + ".csv"), w.str());
    for (const auto& rb : r.rebalances) weights << weights_rows(r.assets, rb, tag);
    summary << r.strategy << ',' << r.risk_model << ',';
    try {
      const auto m = performance_metrics(r, nullptr, mo);
      summary << fmt(m.ann_return) << ',' << fmt(m.ann_vol) << ',' << fmt(m.sharpe) << ',' << fmt(m.max_drawdown) << ','
              << fmt(m.realized_cvar) << ',' << fmt(m.diversification_ratio) << ',' << fmt(m.wptd) << '\n';
    } catch (const Error& e) {
      // Short or degenerate results still get a row.
      summary << "nan,nan,nan,nan,nan,nan,nan\n";
      std::cerr << "warning: " << tag << ": " << e.what() << '\n';
    }
  }
  write_file(dir / "summary.csv", summary.str());
  write_file(dir / "weights.csv", weights.str());

  // Return forecasts used by the alpha-based strategies, with the
  // cross-sectional IC against the following month.
  const auto alpha_run = std::find_if(results.begin(), results.end(), [](const BacktestResult& r) {
    return uses_alpha(parse_strategy(r.strategy));
  });
  if (alpha_run != results.end()) {
    const auto& rb = alpha_run->rebalances;
    const Eigen::Index n = panel.cols();
    Matrix pred = Matrix::Constant(static_cast<Eigen::Index>(rb.size()), n, kNaN);
    Matrix real = Matrix::Constant(static_cast<Eigen::Index>(rb.size()), n, kNaN);
    std::ostringstream fc;
    fc << "date,asset,prediction,look_ahead_flag\n";
    for (std::size_t i = 0; i < rb.size(); ++i) {
      const Date& d = rb[i].date;
      bool look_ahead = false;
      const auto mu = detail::alpha_at(base.alpha == AlphaKind::naive_long ? panel : panel.truncate_after(d), base, d,
                                       look_ahead);
      if (mu) pred.row(static_cast<Eigen::Index>(i)) = mu->transpose();
      if (i + 1 < rb.size()) {
        const Eigen::Index b = panel.rows_through(d), e = panel.rows_through(rb[i + 1].date);
        for (Eigen::Index k = 0; k < n; ++k) {
          double g = 1.0;
          for (Eigen::Index r = b; r < e; ++r) g *= 1.0 + panel.values()(r, k);
          real(static_cast<Eigen::Index>(i), k) = g - 1.0;
        }
      }
      for (Eigen::Index k = 0; k < n; ++k)
        fc << d.to_string() << ',' << panel.assets()[static_cast<std::size_t>(k)] << ','
           << fmt(pred(static_cast<Eigen::Index>(i), k)) << ',' << (look_ahead ? 1 : 0) << '\n';
    }
    write_file(dir / "alpha_forecasts.csv", fc.str());
    if (n >= 3) {
      const auto ic = cross_sectional_ic(pred, real);
      std::ostringstream o;
      o << "date,ic\n";
      for (std::size_t i = 0; i < rb.size(); ++i) o << rb[i].date.to_string() << ',' << fmt(ic.ic[i]) << '\n';
      write_file(dir / "alpha_ic.csv", o.str());
    }
  }

  if (!a.labels.empty()) {
    std::ifstream in(a.labels);
    require(in.good(), ErrorKind::FileNotFound, "cannot open '" + a.labels + "'");
    std::string line;
    std::getline(in, line);
    std::vector<Date> dates;
    std::vector<std::optional<Regime>> labels;
    while (std::getline(in, line)) {
      const auto f = csv::split(line);
      if (f.size() < 2) continue;
      dates.push_back(Date::parse(f[0]));
      labels.push_back(f[1] == "high" ? std::optional(Regime::high)
                                      : f[1] == "low" ? std::optional(Regime::low) : std::nullopt);
    }
    std::ostringstream b;
    b << "strategy,regime,ann_return\n";
    for (const auto& r : results)
      for (const auto& [reg, v] : regime_breakdown(r, dates, labels))
        b << r.strategy << '/' << r.risk_model << ',' << to_string(reg) << ',' << fmt(v) << '\n';
    write_file(dir / "breakdown.csv", b.str());
  }
}

// --- report ------------------------------------------------------------------

struct ReportArgs {
  std::string strategy_returns;
};

void run_report(const Common& c, const ReportArgs& a) {
  const auto panel = read_panel(c);
  const Matrix u = pseudo_observations(panel.values());
  const auto cop = fit_t_copula(u);
  const Matrix lambda = t_tail_dependence(cop);
  const Matrix rho = sample_correlation(panel.values());
  // Lower triangle: Pearson correlation; upper triangle: t-copula lambda.
  std::ostringstream dep;
  dep << "asset";
  for (const auto& name : panel.assets()) dep << ',' << name;
  dep << '\n';
  for (Eigen::Index i = 0; i < panel.cols(); ++i) {
    dep << panel.assets()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < panel.cols(); ++j) dep << ',' << fmt(i == j ? 1.0 : i > j ? rho(i, j) : lambda(i, j));
    dep << '\n';
  }
  write_file(fs::path(c.out) / "dependence.csv", dep.str());
  write_file(fs::path(c.out) / "copula.json",
             json({{"nu", cop.nu}, {"corr", to_json(cop.corr)}, {"assets", panel.assets()}}).dump(2) + "\n");

  // Cluster strategy return columns, or the panel's monthly asset returns.
  std::vector<std::string> names;
  Matrix r;
  if (!a.strategy_returns.empty()) {
    const auto t = load_table(a.strategy_returns);
    names = t.columns;
    r = t.values;
    require(r.allFinite(), ErrorKind::MissingValue, "report: strategy returns must be complete");
  } else {
    names = panel.assets();
    const auto rows = month_end_rows(panel);
    r = Matrix(static_cast<Eigen::Index>(rows.size()), panel.cols());
    for (Eigen::Index k = 0; k < panel.cols(); ++k) {
      const auto m = monthly_compounded(panel, k);
      for (std::size_t i = 0; i < m.values.size(); ++i) r(static_cast<Eigen::Index>(i), k) = m.values[i];
    }
  }
  const auto cl = cluster_strategies(r);
  std::ostringstream link, eig;
  link << "step,a,b,height,size\n";
  for (std::size_t i = 0; i < cl.linkage.size(); ++i) {
    auto label = [&](std::size_t id) { return id < names.size() ? names[id] : "cluster" + std::to_string(id - names.size()); };
    link << i << ',' << label(cl.linkage[i].a) << ',' << label(cl.linkage[i].b) << ',' << fmt(cl.linkage[i].height)
         << ',' << cl.linkage[i].size << '\n';
  }
  eig << "rank,eigen_ratio\n";
  for (Eigen::Index i = 0; i < cl.eigen_ratios.size(); ++i) eig << i + 1 << ',' << fmt(cl.eigen_ratios(i)) << '\n';
  std::ostringstream order;
  order << "position,name\n";
  for (std::size_t i = 0; i < cl.order.size(); ++i) order << i << ',' << names[cl.order[i]] << '\n';
  write_file(fs::path(c.out) / "cluster_linkage.csv", link.str());
  write_file(fs::path(c.out) / "cluster_order.csv", order.str());
  write_file(fs::path(c.out) / "eigen_ratios.csv", eig.str());
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::size_t days = 20 * 252;
};

void run_synth(const Common& c, const SynthArgs& a) {
  SyntheticSpec s;
  s.seed = c.seed;
  s.days = a.days;
  const auto data = make_synthetic(s);
  std::ostringstream panel, iv, reg;
  write_panel(panel, data.daily);
  iv << "date,implied_vol\n";
  for (std::size_t i = 0; i < data.implied_vol.size(); ++i)
    iv << data.implied_vol.dates[i].to_string() << ',' << fmt(data.implied_vol.values[i]) << '\n';
  reg << "date,regime\n";
  for (std::size_t i = 0; i < data.months.size(); ++i)
    reg << data.months[i].to_string() << ',' << (data.regimes[i] ? "high" : "low") << '\n';
  write_file(fs::path(c.out) / "panel.csv", panel.str());
  write_file(fs::path(c.out) / "implied_vol.csv", iv.str());
  write_file(fs::path(c.out) / "true_regimes.csv", reg.str());
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numerical: return 4;
  }
  return 4;
}

std::string category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numerical: return "numerical";
  }
  return "numerical";
}

void report_error(const std::string& kind, ErrorCategory cat, std::string message) {
  for (auto& ch : message)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "error kind=" << kind << " category=" << category_name(cat) << " message=" << json(message).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynalloc: GARCH-DCC-copula risk, regime and allocation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value config file (flags override it)");

  Common c;
  app.add_option("--seed", c.seed, "Master seed for every stochastic step");
  app.add_option("--alpha", c.alpha, "CVaR confidence level")->capture_default_str();
  app.add_option("--horizon", c.horizon, "Simulation horizon in trading days")->capture_default_str();
  app.add_option("--paths", c.paths, "Simulated paths per forecast")->capture_default_str();
  app.add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->capture_default_str();
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_option("--input", c.input, "Input CSV (date,<asset>,... or a dated table)");
  app.add_option("--kind", c.kind, "Input panel kind")->check(CLI::IsMember({"returns", "prices"}))->capture_default_str();

  auto* fit = app.add_subcommand("fit", "Fit the joint GARCH-DCC-copula model; writes fit.json");
  FitArgs fa;
  fit->add_option("--window", fa.window, "expanding or rolling")->capture_default_str();
  fit->add_option("--window-days", fa.window_days, "Minimum (expanding) or fixed (rolling) window")->capture_default_str();
  fit->add_flag("--gjr", fa.gjr, "Use GJR-GARCH marginals");
  fit->add_option("--correlation", fa.correlation, "dcc or ccc")->capture_default_str();

  auto* forecast = app.add_subcommand("forecast", "Monthly risk forecasts; writes risk_forecast.csv");
  ForecastArgs fo;
  forecast->add_option("--weights", fo.weights, "Portfolio weights NAME=w,... (default equal)");
  forecast->add_option("--window-days", fo.window_days, "Minimum expanding fit window")->capture_default_str();
  forecast->add_option("--implied-vol", fo.implied_vol, "Implied-vol table; also writes regime_inputs.csv");
  forecast->add_option("--implied-column", fo.implied_column, "Column of the implied-vol table")->capture_default_str();
  forecast->add_option("--equity", fo.equity, "Asset whose realized variance enters the VRP (default first)");

  auto* regimes = app.add_subcommand("regimes", "Regime probabilities from a date,y,driver[,corr] table; writes regimes.csv");
  RegimeArgs ra;
  regimes->add_option("--y-column", ra.y_column, "Observable column")->capture_default_str();
  regimes->add_option("--driver-column", ra.driver_column, "Transition driver column")->capture_default_str();
  regimes->add_option("--corr-column", ra.corr_column, "Correlation observable column (used when present)")
      ->capture_default_str();
  regimes->add_option("--min-window", ra.min_window, "First out-of-sample period")->capture_default_str();
  regimes->add_option("--threshold", ra.threshold, "High-risk classification threshold")->capture_default_str();

  StrategyArgs sa;
  auto add_strategy_opts = [&](CLI::App* s) {
    s->add_option("--benchmark", sa.benchmark, "Benchmark weights NAME=w,...");
    s->add_option("--alpha-model", sa.alpha_model, "naive_short, naive_long or external")->capture_default_str();
    s->add_option("--forecasts", sa.forecasts, "Return forecasts table for --alpha-model external");
    s->add_option("--rolling-days", sa.rolling_days, "Rolling risk window")->capture_default_str();
    s->add_option("--expanding-days", sa.expanding_days, "Minimum expanding/GARCH window")->capture_default_str();
    s->add_option("--cost-bps", sa.cost_bps, "Flat transaction cost per unit turnover")->capture_default_str();
    s->add_option("--tail-q", sa.tail_q, "Empirical tail level for sample risk models")->capture_default_str();
    s->add_option("--start", sa.start, "First rebalance date (YYYY-MM-DD)");
  };

  auto* allocate = app.add_subcommand("allocate", "Weights for one strategy at one date; writes weights.csv");
  AllocateArgs aa;
  add_strategy_opts(allocate);
  allocate->add_option("--strategy", aa.strategy, "Strategy name")->capture_default_str();
  allocate->add_option("--risk-model", aa.risk_model, "rolling_1y, expanding_5y or garch_dcc_copula")->capture_default_str();
  allocate->add_option("--as-of", aa.as_of, "Allocation date (default last date)");
  allocate->add_option("--resample", aa.resample, "Average over this many simulations (0 = off)")->capture_default_str();

  auto* backtest = app.add_subcommand("backtest", "Walk-forward comparison; writes wealth, summary and weights CSVs");
  BacktestArgs ba;
  add_strategy_opts(backtest);
  backtest->add_option("--strategies", ba.strategies, "Comma list or 'all'")->capture_default_str();
  backtest->add_option("--risk-models", ba.risk_models, "Comma list of risk models")->capture_default_str();
  backtest->add_option("--labels", ba.labels, "date,label (high/low) file for breakdown.csv");
  backtest->add_option("--risk-free", ba.risk_free, "Annual risk-free rate for Sharpe")->capture_default_str();

  auto* report = app.add_subcommand("report", "Dependence matrix and clustering outputs");
  ReportArgs rp;
  report->add_option("--strategy-returns", rp.strategy_returns, "Table of strategy returns to cluster");

  auto* synth = app.add_subcommand("synth", "Write a synthetic 3-asset panel with implied vol");
  SynthArgs sy;
  synth->add_option("--days", sy.days, "Trading days")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("ConfigError", ErrorCategory::config, e.what());
    return 2;
  }

  try {
    const bool stochastic = forecast->parsed() || synth->parsed() || backtest->parsed() ||
                            (allocate->parsed() && aa.risk_model == "garch_dcc_copula");
    if (stochastic)
      require(app.get_option("--seed")->count() > 0, ErrorKind::ConfigError,
              "this command is stochastic: --seed is required");
    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "run_config.ini", app.config_to_str(true, false));
    if (fit->parsed()) run_fit(c, fa);
    if (forecast->parsed()) run_forecast(c, fo);
    if (regimes->parsed()) run_regimes(c, ra);
    if (allocate->parsed()) run_allocate(c, sa, aa);
    if (backtest->parsed()) run_backtest(c, sa, ba);
    if (report->parsed()) run_report(c, rp);
    if (synth->parsed()) run_synth(c, sy);
  } catch (const Error& e) {
    report_error(std::string(to_string(e.kind())), e.category(), e.what());
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    report_error("FileSystem", ErrorCategory::config, e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("Internal", ErrorCategory::numerical, e.what());
    return 4;
  }
  return 0;
}

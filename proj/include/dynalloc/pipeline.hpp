#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynalloc/alpha_models.hpp"
#include "dynalloc/data_panel.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/regime_switch.hpp"
#include "dynalloc/rng.hpp"
#include "dynalloc/scenario_engine.hpp"

namespace dynalloc {

/// Risk forecast issued at one month-end for the following horizon.
struct MonthlyRiskForecast {
  Date date;
  RiskForecast portfolio;
  Vector asset_var;
  Vector asset_cvar;
};

struct ForecastSeriesOptions {
  FitWindow window = FitWindow::expanding();
  SimulationOptions sim{};
  JointFitOptions joint{};
  double alpha = 0.95;
  std::uint64_t seed = 0;
};

/// Month-end GARCH-DCC-copula forecasts for a fixed-weight portfolio. Each
/// month refits on data through that month-end (warm-started from the last
/// fit) and simulates with seed (seed, date serial).
inline std::vector<MonthlyRiskForecast> forecast_series(const ReturnPanel& panel, const Vector& weights,
                                                        const ForecastSeriesOptions& opt = {}) {
  check_simplex(weights, "forecast_series");
  require(weights.size() == panel.cols(), ErrorKind::LengthMismatch, "forecast_series: one weight per asset");
  std::vector<MonthlyRiskForecast> out;
  std::optional<JointModelFit> prev;
  for (auto r : month_end_rows(panel)) {
    if (r + 1 < opt.window.days) continue;
    const Date& d = panel.dates()[static_cast<std::size_t>(r)];
    const JointModelFit fit = fit_joint(panel.slice(0, r + 1), opt.window, opt.joint, prev ? &*prev : nullptr);
    const auto s = simulate_scenarios(fit, derive_seed(opt.seed, {static_cast<std::uint64_t>(d.serial())}), opt.sim);
    MonthlyRiskForecast f;
    f.date = d;
    f.portfolio = forecast_risk(s, weights, opt.alpha);
    f.asset_var.resize(panel.cols());
    f.asset_cvar.resize(panel.cols());
    for (Eigen::Index k = 0; k < panel.cols(); ++k) {
      const Vector c = s.horizon_returns.col(k);
      const auto rm = risk_measures(as_span(c), opt.alpha);
      f.asset_var(k) = rm.var;
      f.asset_cvar(k) = rm.cvar;
    }
    out.push_back(std::move(f));
    prev = fit;
  }
  return out;
}

/// Per calendar month: standard deviation of the daily returns in that month
/// (NaN for months with fewer than two days), dated at the month-end.
inline DatedSeries monthly_realized_vol(const ReturnPanel& panel, Eigen::Index column = 0) {
  DatedSeries out;
  Eigen::Index begin = 0;
  for (auto r : month_end_rows(panel)) {
    std::vector<double> d;
    for (Eigen::Index i = begin; i <= r; ++i) d.push_back(panel.values()(i, column));
    out.dates.push_back(panel.dates()[static_cast<std::size_t>(r)]);
    out.values.push_back(d.size() >= 2 ? stdev(d) : kNaN);
    begin = r + 1;
  }
  return out;
}

/// Per calendar month: compounded return, dated at the month-end.
inline DatedSeries monthly_compounded(const ReturnPanel& panel, Eigen::Index column = 0) {
  DatedSeries out;
  Eigen::Index begin = 0;
  for (auto r : month_end_rows(panel)) {
    double g = 1.0;
    for (Eigen::Index i = begin; i <= r; ++i) g *= 1.0 + panel.values()(i, column);
    out.dates.push_back(panel.dates()[static_cast<std::size_t>(r)]);
    out.values.push_back(g - 1.0);
    begin = r + 1;
  }
  return out;
}

/// Values of `s` at the given dates (NaN where absent).
inline std::vector<double> align(const DatedSeries& s, const std::vector<Date>& dates) {
  std::vector<double> out;
  for (const auto& d : dates) {
    const auto it = std::lower_bound(s.dates.begin(), s.dates.end(), d);
    out.push_back(it != s.dates.end() && *it == d ? s.values[static_cast<std::size_t>(it - s.dates.begin())] : kNaN);
  }
  return out;
}

/// Monthly regime inputs: y = forecast SAA CVaR issued at each month-end,
/// driver[t] = VRP at the previous month-end (driver[0] repeats VRP[0]), and
/// one extra driver value (the last VRP) for the post-sample prediction.
struct RegimeInputs {
  std::vector<Date> dates;
  std::vector<double> y;
  std::vector<double> driver;
};

inline RegimeInputs regime_inputs(const std::vector<MonthlyRiskForecast>& forecasts, const DatedSeries& vrp_monthly) {
  RegimeInputs in;
  for (const auto& f : forecasts) {
    in.dates.push_back(f.date);
    in.y.push_back(f.portfolio.cvar);
  }
  const auto v = align(vrp_monthly, in.dates);
  for (double x : v) require(std::isfinite(x), ErrorKind::MissingValue, "regime_inputs: VRP missing at a forecast date");
  in.driver.push_back(v.front());
  for (double x : v) in.driver.push_back(x);
  return in;
}

/// Return forecasts from rolling regressions of each asset's next-month
/// return on lagged VRP and, when given, the out-of-sample high-risk
/// probability for that month. Row t of the result is issued at month-end
/// dates[t] for month t + 1 and annualized (x12).
inline ForecastSet gtaa_forecasts(const ReturnPanel& daily, const std::vector<Date>& dates,
                                  const std::vector<double>& vrp, const std::vector<double>* regime_prob = nullptr,
                                  std::size_t window = 60) {
  const std::size_t t = dates.size();
  require(vrp.size() == t, ErrorKind::LengthMismatch, "gtaa_forecasts: one VRP value per date");
  require(!regime_prob || regime_prob->size() == t + 1, ErrorKind::LengthMismatch,
          "gtaa_forecasts: regime probabilities need one value per date plus the next month");
  ForecastSet out;
  out.dates = dates;
  out.assets = daily.assets();
  out.values = Matrix::Constant(static_cast<Eigen::Index>(t), daily.cols(), kNaN);
  // Month s (s >= 1) runs from dates[s - 1] to dates[s]; its regressors are
  // VRP at dates[s - 1] and the oos probability for month s.
  const std::size_t first = [&] {
    std::size_t f = 0;
    while (regime_prob && f < t && std::isnan((*regime_prob)[f + 1])) ++f;
    return f;
  }();
  if (t < first + window + 2) return out;
  const std::size_t months = t - 1 - first;  // realized months first+1 .. t-1
  const auto k = static_cast<Eigen::Index>(regime_prob ? 2 : 1);
  Matrix x(static_cast<Eigen::Index>(months + 1), k);
  for (std::size_t i = 0; i <= months; ++i) {
    const std::size_t s = first + 1 + i;
    x(static_cast<Eigen::Index>(i), 0) = vrp[s - 1];
    if (regime_prob) x(static_cast<Eigen::Index>(i), 1) = (*regime_prob)[s];
  }
  for (Eigen::Index a = 0; a < daily.cols(); ++a) {
    std::vector<double> y;
    for (std::size_t i = 0; i < months; ++i) {
      const std::size_t s = first + 1 + i;
      const Eigen::Index b = daily.rows_through(dates[s - 1]), e = daily.rows_through(dates[s]);
      double g = 1.0;
      for (Eigen::Index r = b; r < e; ++r) g *= 1.0 + daily.values()(r, a);
      y.push_back(g - 1.0);
    }
    const auto f = rolling_ols_forecast(y, x, window);
    for (std::size_t i = 0; i <= months; ++i)
      if (!std::isnan(f.forecast[i])) out.values(static_cast<Eigen::Index>(first + i), a) = 12.0 * f.forecast[i];
  }
  return out;
}

}  // namespace dynalloc

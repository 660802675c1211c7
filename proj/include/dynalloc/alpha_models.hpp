#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/data_panel.hpp"
#include "dynalloc/date.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"

namespace dynalloc {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kTradingDays = 252.0;

/// Dated scalar series (monthly signals, implied vols, ...).
struct DatedSeries {
  std::vector<Date> dates;
  std::vector<double> values;

  std::size_t size() const { return dates.size(); }
};

/// Variance risk premium in monthly variance units:
/// (implied_vol / 100)^2 * 21/252 minus the sum of squared daily returns over
/// the `window` trading days ending on each implied-vol date.
inline DatedSeries vrp(const DatedSeries& implied_vol, const DatedSeries& daily_returns, std::size_t window = 21) {
  require(implied_vol.dates.size() == implied_vol.values.size() &&
              daily_returns.dates.size() == daily_returns.values.size(),
          ErrorKind::LengthMismatch, "vrp: dates and values differ in length");
  require(window >= 1, ErrorKind::ConfigError, "vrp: window must be positive");
  DatedSeries out;
  const auto& d = daily_returns.dates;
  for (std::size_t i = 0; i < implied_vol.size(); ++i) {
    const auto end = static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), implied_vol.dates[i]) - d.begin());
    require(end >= window, ErrorKind::InsufficientWindow,
            "vrp: fewer than " + std::to_string(window) + " daily returns through " + implied_vol.dates[i].to_string());
    double realized = 0.0;
    for (std::size_t k = end - window; k < end; ++k) realized += daily_returns.values[k] * daily_returns.values[k];
    const double iv = implied_vol.values[i] / 100.0;
    out.dates.push_back(implied_vol.dates[i]);
    out.values.push_back(iv * iv * (21.0 / kTradingDays) - realized);
  }
  return out;
}

struct OlsForecast {
  /// forecast[s] predicts y[s] from data through s - 1; NaN where undefined.
  std::vector<double> forecast;
  /// Coefficients (intercept first) of the fit issuing forecast[s].
  std::vector<Vector> beta;
  /// In-window residual sum of squares of that fit.
  std::vector<double> rss;
};

/// Ordinary least squares with intercept; throws CollinearRegressors when the
/// design is rank deficient.
inline Vector ols(const Matrix& x, const Vector& y, double* rss = nullptr) {
  Matrix design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  require(qr.rank() == design.cols(), ErrorKind::CollinearRegressors, "ols: regressors are collinear");
  Vector beta = qr.solve(y);
  if (rss) *rss = (y - design * beta).squaredNorm();
  return beta;
}

/// Rolling-window OLS of y_s on regressors x_s (row s of `x` holds values
/// already lagged and known before y_s is realized; `x` may carry one extra
/// row for the out-of-sample period). For every s with s >= window the model
/// is fitted on rows [s - window, s) and forecast[s] = beta' [1, x_s].
inline OlsForecast rolling_ols_forecast(std::span<const double> y, const Matrix& x, std::size_t window = 60) {
  const auto k = static_cast<std::size_t>(x.cols());
  require(window >= k + 2, ErrorKind::ConfigError, "rolling_ols_forecast: window must be at least #regressors + 2");
  require(static_cast<std::size_t>(x.rows()) == y.size() || static_cast<std::size_t>(x.rows()) == y.size() + 1,
          ErrorKind::LengthMismatch, "rolling_ols_forecast: regressors must have T or T + 1 rows");
  require(y.size() >= window, ErrorKind::SeriesTooShort, "rolling_ols_forecast: series shorter than the window");
  const auto n = static_cast<std::size_t>(x.rows());
  OlsForecast out;
  out.forecast.assign(n, kNaN);
  out.beta.assign(n, Vector());
  out.rss.assign(n, kNaN);
  for (std::size_t s = window; s < n; ++s) {
    const auto b = static_cast<Eigen::Index>(s - window);
    const auto w = static_cast<Eigen::Index>(window);
    const Vector yw = Eigen::Map<const Vector>(y.data() + b, w);
    double rss = 0.0;
    const Vector beta = ols(x.middleRows(b, w), yw, &rss);
    out.beta[s] = beta;
    out.rss[s] = rss;
    out.forecast[s] = beta(0) + x.row(static_cast<Eigen::Index>(s)).dot(beta.tail(x.cols()));
  }
  return out;
}

enum class NaiveMode { short_term, long_term };

/// Per as-of date, per asset: predicted annualized return.
struct ForecastSet {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Matrix values;
  bool look_ahead = false;
};

/// short_term: trailing 252-day mean daily return x 252 using data dated on
/// or before each as-of date (NaN with less than a year of history).
/// long_term: full-sample mean x 252, flagged as look-ahead.
inline ForecastSet naive_forecasts(const ReturnPanel& daily, NaiveMode mode, const std::vector<Date>& as_of) {
  const auto year = static_cast<Eigen::Index>(kTradingDays);
  ForecastSet f;
  f.dates = as_of;
  f.assets = daily.assets();
  f.values = Matrix::Constant(static_cast<Eigen::Index>(as_of.size()), daily.cols(), kNaN);
  if (mode == NaiveMode::long_term) {
    require(daily.rows() >= 1, ErrorKind::SeriesTooShort, "naive_forecasts: empty panel");
    f.look_ahead = true;
    const Eigen::RowVectorXd m = daily.values().colwise().mean() * kTradingDays;
    for (Eigen::Index i = 0; i < f.values.rows(); ++i) f.values.row(i) = m;
    return f;
  }
  require(daily.rows() >= year, ErrorKind::SeriesTooShort, "naive_forecasts: need at least one year of data");
  for (std::size_t i = 0; i < as_of.size(); ++i) {
    const Eigen::Index end = daily.rows_through(as_of[i]);
    if (end < year) continue;
    f.values.row(static_cast<Eigen::Index>(i)) = daily.values().middleRows(end - year, year).colwise().mean() * kTradingDays;
  }
  return f;
}

struct IcSummary {
  std::vector<double> ic;
  double mean = kNaN;
  double stdev = kNaN;
  double ratio = kNaN;
};

/// Per-date Pearson correlation across assets between predictions and the
/// next-period realizations (rows are dates). Dates with NaNs or a constant
/// cross-section get NaN and are left out of the summary.
inline IcSummary cross_sectional_ic(const Matrix& predicted, const Matrix& realized) {
  require(predicted.rows() == realized.rows() && predicted.cols() == realized.cols(), ErrorKind::LengthMismatch,
          "cross_sectional_ic: shape mismatch");
  require(predicted.cols() >= 3, ErrorKind::TooFewAssets, "cross_sectional_ic: need at least 3 assets");
  IcSummary s;
  std::vector<double> valid;
  for (Eigen::Index t = 0; t < predicted.rows(); ++t) {
    const Vector p = predicted.row(t).transpose(), r = realized.row(t).transpose();
    double ic = kNaN;
    if (p.allFinite() && r.allFinite()) {
      const Vector pc = p.array() - p.mean(), rc = r.array() - r.mean();
      const double den = std::sqrt(pc.squaredNorm() * rc.squaredNorm());
      if (den > 0.0) ic = pc.dot(rc) / den;
    }
    s.ic.push_back(ic);
    if (!std::isnan(ic)) valid.push_back(ic);
  }
  if (!valid.empty()) s.mean = mean(valid);
  if (valid.size() >= 2) {
    s.stdev = dynalloc::stdev(valid);
    if (s.stdev > 0.0) s.ratio = s.mean / s.stdev;
  }
  return s;
}

struct FactorPortfolio {
  double factor_return = 0.0;
  /// Per-stock weight: +1/(G q_g) on long names, -1/(G q_g) on short names.
  std::vector<double> weights;
  std::size_t groups_used = 0;
};

/// Group-neutral quintile long/short: within every group of at least five
/// stocks, long the top quintile by score and short the bottom quintile
/// (quintile size floor(n / 5), ties in input order), equal weight within
/// legs and equal weight across groups.
inline FactorPortfolio quintile_ls_portfolio(std::span<const double> scores, const std::vector<std::string>& groups,
                                             std::span<const double> next_returns) {
  require(scores.size() == groups.size() && scores.size() == next_returns.size(), ErrorKind::LengthMismatch,
          "quintile_ls_portfolio: inconsistent lengths");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  std::vector<std::vector<std::size_t>> eligible;
  for (auto& [g, idx] : members)
    if (idx.size() >= 5) eligible.push_back(idx);
  require(!eligible.empty(), ErrorKind::NoEligibleGroups, "quintile_ls_portfolio: no group has five or more stocks");

  FactorPortfolio out;
  out.weights.assign(scores.size(), 0.0);
  out.groups_used = eligible.size();
  const double gw = 1.0 / static_cast<double>(eligible.size());
  for (auto& idx : eligible) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    const std::size_t q = idx.size() / 5;
    const double lw = gw / static_cast<double>(q);
    for (std::size_t j = 0; j < q; ++j) {
      out.weights[idx[idx.size() - 1 - j]] += lw;
      out.weights[idx[j]] -= lw;
    }
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out.factor_return += out.weights[i] * next_returns[i];
  return out;
}

}  // namespace dynalloc

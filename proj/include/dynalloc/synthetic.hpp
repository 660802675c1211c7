#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dynalloc/alpha_models.hpp"
#include "dynalloc/data_panel.hpp"
#include "dynalloc/date.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/rng.hpp"

namespace dynalloc {

/// A dated stretch with extra volatility on selected assets (e.g. a bond
/// sell-off when rates rise).
struct PlantedEpisode {
  Date start;
  Date end;
  Vector vol_multiplier;
};

/// Three-asset (equities, bonds, commodities) daily panel with monthly
/// Markov regimes, GARCH(1,1) volatility and Student-t innovations, plus an
/// equity implied-vol series carrying a persistent "fear" premium that loads
/// on next month's drifts.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  Date start{2000, 1, 3};
  std::size_t days = 20 * 252;
  std::vector<std::string> assets{"EQ", "BOND", "CMDTY"};
  Vector ann_vol{{0.15, 0.05, 0.20}};
  Vector ann_drift{{0.07, 0.03, 0.04}};
  /// Loading of annualized drift on the lagged fear factor.
  Vector fear_loading{{0.10, -0.02, 0.05}};
  double garch_alpha = 0.06;
  double garch_beta = 0.90;
  double high_vol_multiplier = 2.2;
  double stay_low = 0.95;
  double stay_high = 0.85;
  double nu = 6.0;
  double rho_low_eb = -0.1, rho_low_ec = 0.2, rho_low_bc = 0.0;
  double rho_high_eb = 0.3, rho_high_ec = 0.6, rho_high_bc = 0.2;
  std::optional<PlantedEpisode> episode{};
};

struct SyntheticData {
  ReturnPanel daily;
  /// Equity implied vol in percentage points, one value per trading day.
  DatedSeries implied_vol;
  /// Month-end dates and the regime (0 low, 1 high) in force that month.
  std::vector<Date> months;
  std::vector<int> regimes;
};

inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.assets.size());
  require(n == 3 && spec.ann_vol.size() == 3 && spec.ann_drift.size() == 3 && spec.fear_loading.size() == 3,
          ErrorKind::ConfigError, "make_synthetic: exactly three assets expected");
  require(spec.days >= 2, ErrorKind::ConfigError, "make_synthetic: need at least two days");
  require(spec.garch_alpha + spec.garch_beta < 1.0, ErrorKind::ConfigError, "make_synthetic: GARCH not stationary");
  require(!spec.episode || spec.episode->vol_multiplier.size() == n, ErrorKind::ConfigError,
          "make_synthetic: episode needs one multiplier per asset");

  auto corr = [](double eb, double ec, double bc) {
    Matrix c(3, 3);
    c << 1.0, eb, ec, eb, 1.0, bc, ec, bc, 1.0;
    return Matrix(c.llt().matrixL());
  };
  const Matrix chol[2] = {corr(spec.rho_low_eb, spec.rho_low_ec, spec.rho_low_bc),
                          corr(spec.rho_high_eb, spec.rho_high_ec, spec.rho_high_bc)};

  Engine eng = make_engine(spec.seed, {0x5917});
  std::normal_distribution<double> gauss;
  std::chi_squared_distribution<double> chi(spec.nu);
  std::uniform_real_distribution<double> unif;
  const double t_scale = std::sqrt((spec.nu - 2.0) / spec.nu);

  const auto dates = business_days(spec.start, spec.days);
  const Vector daily_var = spec.ann_vol.array().square() / kTradingDays;
  const double persist = spec.garch_alpha + spec.garch_beta;

  Matrix values(static_cast<Eigen::Index>(dates.size()), n);
  SyntheticData out;
  out.implied_vol.dates = dates;
  out.implied_vol.values.resize(dates.size());

  int regime = 0;
  double fear = 0.0, fear_prev = 0.0;
  Vector sigma2 = daily_var;
  Vector eps = Vector::Zero(n);
  for (std::size_t t = 0; t < dates.size(); ++t) {
    const bool new_month = t == 0 || !dates[t].same_month(dates[t - 1]);
    if (new_month && t > 0) {
      const double stay = regime == 0 ? spec.stay_low : spec.stay_high;
      if (unif(eng) > stay) regime = 1 - regime;
      fear_prev = fear;
      fear = 0.7 * fear + std::sqrt(1.0 - 0.49) * gauss(eng);
    }
    const int r = regime;
    Vector mult = Vector::Constant(n, r == 1 ? spec.high_vol_multiplier : 1.0);
    if (spec.episode && !(dates[t] < spec.episode->start) && !(spec.episode->end < dates[t]))
      mult = mult.cwiseProduct(spec.episode->vol_multiplier);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double omega = (1.0 - persist) * daily_var(i) * mult(i) * mult(i);
      if (t > 0) sigma2(i) = omega + spec.garch_alpha * eps(i) * eps(i) + spec.garch_beta * sigma2(i);
    }
    Vector z(n);
    for (auto& v : z) v = gauss(eng);
    z = chol[r] * z * (t_scale / std::sqrt(chi(eng) / spec.nu));
    eps = sigma2.cwiseSqrt().cwiseProduct(z);
    const Vector drift = (spec.ann_drift + spec.fear_loading * fear_prev) / kTradingDays;
    values.row(static_cast<Eigen::Index>(t)) = (drift + eps).cwiseMax(-0.5).cwiseMin(0.5).transpose();

    // Implied vol: one-month-ahead variance forecast plus a fear premium.
    const double long_run = daily_var(0) * mult(0) * mult(0);
    const double ahead = long_run + std::pow(persist, 21.0) * (sigma2(0) - long_run);
    const double premium = 1.15 * std::exp(0.15 * fear + 0.05 * gauss(eng));
    out.implied_vol.values[t] = 100.0 * std::sqrt(kTradingDays * ahead) * premium;

    if (t + 1 == dates.size() || !dates[t].same_month(dates[t + 1])) {
      out.months.push_back(dates[t]);
      out.regimes.push_back(r);
    }
  }
  out.daily = ReturnPanel(dates, spec.assets, values);
  return out;
}

}  // namespace dynalloc

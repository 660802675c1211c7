#include <gtest/gtest.h>

#include <cmath>

#include "dynalloc/backtester.hpp"
#include "dynalloc/synthetic.hpp"

using namespace dynalloc;

namespace {

ReturnPanel tiny_panel(const std::vector<Date>& dates, const std::vector<std::vector<double>>& rows) {
  Matrix v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  std::vector<std::string> names;
  for (std::size_t j = 0; j < rows.front().size(); ++j) names.push_back("A" + std::to_string(j));
  return ReturnPanel(dates, names, v);
}

BacktestResult from_wealth(const std::vector<Date>& dates, const std::vector<double>& wealth) {
  BacktestResult r;
  r.dates = dates;
  r.wealth = wealth;
  return r;
}

const SyntheticData& shared_synthetic() {
  static const SyntheticData data = [] {
    SyntheticSpec s;
    s.seed = 21;
    s.days = 3 * 252;
    return make_synthetic(s);
  }();
  return data;
}

void expect_same_prefix(const BacktestResult& full, const BacktestResult& cut, const std::string& what) {
  ASSERT_FALSE(cut.rebalances.empty()) << what;
  for (std::size_t i = 0; i < cut.rebalances.size(); ++i) {
    ASSERT_LT(i, full.rebalances.size()) << what;
    EXPECT_EQ(full.rebalances[i].date, cut.rebalances[i].date) << what;
    EXPECT_EQ(full.rebalances[i].weights, cut.rebalances[i].weights) << what << " at " << cut.rebalances[i].date.to_string();
  }
}

}  // namespace

TEST(WalkForward, ZeroReturnsGiveFlatWealth) {
  const auto dates = business_days(Date{2021, 1, 4}, 300);
  const ReturnPanel p(dates, {"A", "B"}, Matrix::Zero(300, 2));
  BacktestConfig cfg;
  cfg.strategy = Strategy::equal_weight;
  const auto r = walk_forward(p, cfg);
  for (double w : r.wealth) EXPECT_EQ(w, 1.0);
  cfg.strategy = Strategy::benchmark;
  cfg.fixed_weights = {{"A", 0.6}, {"B", 0.4}};
  for (double w : walk_forward(p, cfg).wealth) EXPECT_EQ(w, 1.0);
}

TEST(WalkForward, MatchesHandCompounding) {
  const std::vector<Date> d{{2021, 1, 27}, {2021, 1, 28}, {2021, 1, 29}, {2021, 2, 1},  {2021, 2, 2},
                            {2021, 2, 26}, {2021, 3, 1},  {2021, 3, 2},  {2021, 3, 31}};
  const ReturnPanel p = tiny_panel(d, {{0.0, 0.0},
                                       {0.0, 0.0},
                                       {0.0, 0.0},
                                       {0.01, -0.02},
                                       {0.03, 0.01},
                                       {-0.02, 0.005},
                                       {0.004, 0.002},
                                       {-0.01, 0.03},
                                       {0.02, -0.01}});
  BacktestConfig cfg;
  cfg.strategy = Strategy::benchmark;
  cfg.fixed_weights = {{"A0", 0.6}, {"A1", 0.4}};
  cfg.rolling_days = 3;
  const auto r = walk_forward(p, cfg);
  ASSERT_EQ(r.rebalances.size(), 3u);
  EXPECT_EQ(r.rebalances.front().date, (Date{2021, 1, 29}));

  // Buy-and-hold within each month: value = sum_i w_i prod(1 + r_i).
  const double feb = 0.6 * 1.01 * 1.03 * 0.98 + 0.4 * 0.98 * 1.01 * 1.005;
  const double mar = 0.6 * 1.004 * 0.99 * 1.02 + 0.4 * 1.002 * 1.03 * 0.99;
  ASSERT_EQ(r.wealth.size(), 7u);
  EXPECT_NEAR(r.wealth[3], feb, 1e-12);
  EXPECT_NEAR(r.wealth.back(), feb * mar, 1e-12);
  // Intra-month drift: day-one return uses the target weights exactly.
  EXPECT_NEAR(r.wealth[1], 1.0 + 0.6 * 0.01 - 0.4 * 0.02, 1e-15);

  cfg.cost_bps = 10.0;
  const auto rc = walk_forward(p, cfg);
  EXPECT_LT(rc.wealth.back(), r.wealth.back());
  EXPECT_NEAR(rc.wealth.front(), 1.0 - 1e-3, 1e-15);
}

TEST(WalkForward, NoPositionsBeforeMinimumWindow) {
  const auto& data = shared_synthetic();
  BacktestConfig cfg;
  cfg.strategy = Strategy::risk_parity;
  const auto r = walk_forward(data.daily, cfg);
  const Eigen::Index first = data.daily.rows_through(r.rebalances.front().date);
  EXPECT_GE(first, 252);
  // The previous month-end had less than a year of history.
  const auto me = month_ends(data.daily);
  const auto it = std::find(me.begin(), me.end(), r.rebalances.front().date);
  ASSERT_NE(it, me.begin());
  EXPECT_LT(data.daily.rows_through(*(it - 1)), 252);
  EXPECT_EQ(r.dates.front(), r.rebalances.front().date);

  const auto short_panel = data.daily.slice(0, 200);
  EXPECT_THROW(walk_forward(short_panel, cfg), Error);
}

TEST(WalkForward, EveryStrategyStaysOnSimplex) {
  const auto& data = shared_synthetic();
  BacktestConfig cfg;
  cfg.fixed_weights = {{"EQ", 0.5}, {"BOND", 0.4}, {"CMDTY", 0.1}};
  for (auto s : kAllStrategies) {
    cfg.strategy = s;
    const auto r = walk_forward(data.daily, cfg);
    for (const auto& rb : r.rebalances) {
      EXPECT_NEAR(rb.weights.sum(), 1.0, 1e-8) << to_string(s);
      EXPECT_GE(rb.weights.minCoeff(), 0.0) << to_string(s);
    }
    for (double w : r.wealth) EXPECT_GT(w, 0.0);
  }
}

TEST(WalkForward, LongTermAlphaIsFlagged) {
  const auto& data = shared_synthetic();
  BacktestConfig cfg;
  cfg.strategy = Strategy::max_sharpe;
  cfg.alpha = AlphaKind::naive_long;
  const auto r = walk_forward(data.daily, cfg);
  EXPECT_NE(r.rebalances.front().flags.find("look_ahead_alpha"), std::string::npos);
}

TEST(WalkForward, ExternalForecastsUseLatestRowAsOfDate) {
  const auto& data = shared_synthetic();
  auto f = std::make_shared<ForecastSet>();
  f->assets = {"CMDTY", "BOND", "EQ"};
  const auto me = month_ends(data.daily);
  for (std::size_t i = 0; i < me.size(); i += 2) {
    f->dates.push_back(me[i]);
  }
  f->values = Matrix(static_cast<Eigen::Index>(f->dates.size()), 3);
  for (Eigen::Index i = 0; i < f->values.rows(); ++i) f->values.row(i) << 0.0, -0.01, 0.05;
  BacktestConfig cfg;
  cfg.strategy = Strategy::max_sharpe;
  cfg.alpha = AlphaKind::external;
  cfg.forecasts = f;
  const auto r = walk_forward(data.daily, cfg);
  // Only EQ has a positive forecast: max Sharpe puts everything there.
  for (const auto& rb : r.rebalances) EXPECT_NEAR(rb.weights(0), 1.0, 1e-10);
}

TEST(WalkForward, OverlappingReturnsCompound) {
  Matrix d(4, 1);
  d << 0.01, -0.02, 0.03, 0.005;
  const Matrix o = detail::overlapping_returns(d, 2);
  ASSERT_EQ(o.rows(), 3);
  EXPECT_NEAR(o(0, 0), 1.01 * 0.98 - 1.0, 1e-15);
  EXPECT_NEAR(o(2, 0), 1.03 * 1.005 - 1.0, 1e-15);
}

TEST(WalkForward, TailMatrixProjection) {
  Matrix l(3, 3);
  l << 1.0, 0.9, 0.0, 0.9, 1.0, 0.9, 0.0, 0.9, 1.0;  // indefinite
  const Matrix p = detail::psd_tail_matrix(l);
  EXPECT_GE(min_eigenvalue(p), -1e-12);
  EXPECT_NEAR(p(1, 1), 1.0, 1e-12);
}

TEST(WalkForward, NoLookAheadEveryStrategy) {
  const auto& data = shared_synthetic();
  const auto me = month_ends(data.daily);
  const Date cut = me[me.size() - 8];
  const ReturnPanel truncated = data.daily.truncate_after(cut);
  BacktestConfig cfg;
  cfg.fixed_weights = {{"EQ", 0.5}, {"BOND", 0.4}, {"CMDTY", 0.1}};
  for (auto s : kAllStrategies) {
    cfg.strategy = s;
    expect_same_prefix(walk_forward(data.daily, cfg), walk_forward(truncated, cfg), to_string(s));
  }
}

TEST(WalkForward, GarchModelDeterministicAndThreadIndependent) {
  const auto& data = shared_synthetic();
  BacktestConfig cfg;
  cfg.strategy = Strategy::min_cvar;
  cfg.risk_model = RiskModel::garch_dcc_copula;
  cfg.expanding_min_days = 600;
  cfg.n_paths = 500;
  cfg.seed = 7;
  const ReturnPanel panel = data.daily.slice(0, 700);
  const auto a = walk_forward(panel, cfg);
  const auto b = walk_forward(panel, cfg);
  cfg.threads = 3;
  const auto c = walk_forward(panel, cfg);
  ASSERT_EQ(a.rebalances.size(), b.rebalances.size());
  for (std::size_t i = 0; i < a.rebalances.size(); ++i) {
    EXPECT_EQ(a.rebalances[i].weights, b.rebalances[i].weights);
    EXPECT_EQ(a.rebalances[i].weights, c.rebalances[i].weights);
  }
  EXPECT_EQ(a.wealth, b.wealth);
  EXPECT_EQ(a.wealth, c.wealth);

  // Truncation mutation under the simulated risk model.
  const auto me = month_ends(panel);
  const auto cut = walk_forward(panel.truncate_after(me[me.size() - 2]), cfg);
  expect_same_prefix(a, cut, "garch min_cvar");
}

TEST(WalkForward, ComparisonGridMatchesSingleRuns) {
  const auto& data = shared_synthetic();
  BacktestConfig base;
  base.fixed_weights = {{"EQ", 0.5}, {"BOND", 0.4}, {"CMDTY", 0.1}};
  base.expanding_min_days = 400;
  base.threads = 2;
  const std::vector<Strategy> strategies{Strategy::benchmark, Strategy::global_min_var, Strategy::min_cvar};
  const std::vector<RiskModel> models{RiskModel::rolling_1y, RiskModel::expanding_5y};
  const auto grid = run_comparison(data.daily, strategies, models, base);
  ASSERT_EQ(grid.size(), 6u);
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    BacktestConfig c = base;
    c.strategy = strategies[cell / 2];
    c.risk_model = models[cell % 2];
    c.start = data.daily.dates()[399];
    const auto single = walk_forward(data.daily, c);
    EXPECT_EQ(single.wealth, grid[cell].wealth);
    EXPECT_EQ(single.rebalances.front().date, grid[cell].rebalances.front().date);
    EXPECT_TRUE(grid[cell].last_inputs.has_value());
  }
}

TEST(PerformanceMetrics, Drawdown) {
  EXPECT_DOUBLE_EQ(max_drawdown(std::vector<double>{1.0, 0.5, 0.75}), 0.5);
  EXPECT_DOUBLE_EQ(max_drawdown(std::vector<double>{1.0, 1.1, 1.2, 1.3}), 0.0);
}

TEST(PerformanceMetrics, FormulasAndErrors) {
  const auto dates = business_days(Date{2020, 1, 1}, 505);
  std::vector<double> w{1.0};
  for (std::size_t i = 1; i < dates.size(); ++i) w.push_back(w.back() * (i % 2 ? 1.01 : 0.995));
  const auto m = performance_metrics(from_wealth(dates, w));
  const double growth = w.back();
  EXPECT_NEAR(m.ann_return, std::pow(growth, 252.0 / 504.0) - 1.0, 1e-14);
  std::vector<double> d;
  for (std::size_t i = 1; i < w.size(); ++i) d.push_back(w[i] / w[i - 1] - 1.0);
  EXPECT_NEAR(m.ann_vol, stdev(d) * std::sqrt(252.0), 1e-14);
  EXPECT_NEAR(m.sharpe, m.ann_return / m.ann_vol, 1e-14);
  EXPECT_TRUE(std::isnan(m.diversification_ratio));
  MetricsOptions rf;
  rf.risk_free = 0.02;
  EXPECT_NEAR(performance_metrics(from_wealth(dates, w), nullptr, rf).sharpe, (m.ann_return - 0.02) / m.ann_vol, 1e-14);

  std::vector<double> flat{1.0};
  for (std::size_t i = 1; i < dates.size(); ++i) flat.push_back(flat.back() * 1.0003);
  try {
    performance_metrics(from_wealth(dates, flat));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVol);
  }
  const std::vector<Date> few(dates.begin(), dates.begin() + 100);
  try {
    performance_metrics(from_wealth(few, std::vector<double>(w.begin(), w.begin() + 100)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResultTooShort);
  }
}

TEST(PerformanceMetrics, RealizedCvarFromMonthlyReturns) {
  const auto& data = shared_synthetic();
  BacktestConfig cfg;
  cfg.strategy = Strategy::global_min_var;
  const auto r = walk_forward(data.daily, cfg);
  const auto m = performance_metrics(r);
  const auto monthly = monthly_returns(r);
  std::vector<double> losses;
  for (double v : monthly.values) losses.push_back(-v);
  std::sort(losses.begin(), losses.end(), std::greater<>());
  // 24 months at alpha 0.95: tail size 1.2, so CVaR = VaR + excess / 1.2 over the top-2 losses.
  const double var = losses[1];
  EXPECT_NEAR(m.realized_cvar, var + (losses[0] - var) / (0.05 * static_cast<double>(losses.size())), 1e-12);
  EXPECT_FALSE(std::isnan(m.diversification_ratio));
  EXPECT_GE(m.diversification_ratio, 1.0 - 1e-12);
  EXPECT_GE(m.max_drawdown, 0.0);
  EXPECT_LE(m.max_drawdown, 1.0);
}

TEST(RegimeBreakdown, ConstructedBuckets) {
  // Month-end wealth marks only: +1% in high months, flat in low months.
  const std::vector<Date> d{{2020, 1, 31}, {2020, 2, 28}, {2020, 3, 31}, {2020, 4, 30}, {2020, 5, 29}};
  const std::vector<double> w{1.0, 1.01, 1.01, 1.0201, 1.0201};
  const auto r = from_wealth(d, w);
  const std::vector<std::optional<Regime>> labels{std::nullopt, Regime::high, Regime::low, Regime::high, Regime::low};
  const auto b = regime_breakdown(r, d, labels);
  EXPECT_NEAR(b.at(Regime::high), 0.12, 1e-12);
  EXPECT_NEAR(b.at(Regime::low), 0.0, 1e-12);

  const std::vector<std::optional<Regime>> one(d.size(), Regime::low);
  const auto single = regime_breakdown(r, d, one);
  ASSERT_EQ(single.size(), 1u);
  const auto monthly = monthly_returns(r);
  EXPECT_NEAR(single.at(Regime::low), 12.0 * mean(monthly.values), 1e-12);

  const std::vector<std::optional<FourState>> four{std::nullopt, FourState::hr_hc, FourState::lr_lc, FourState::hr_lc,
                                                   FourState::lr_hc};
  const auto fb = regime_breakdown(r, d, four);
  EXPECT_NEAR(fb.at(FourState::hr_hc), 0.12, 1e-12);
  EXPECT_NEAR(fb.at(FourState::lr_hc), 0.0, 1e-12);

  const std::vector<Date> other{{2019, 1, 31}};
  EXPECT_THROW(regime_breakdown(r, other, std::vector<std::optional<Regime>>{Regime::low}), Error);
}

TEST(ClusterStrategies, Examples) {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> z;
  Matrix r(60, 4);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = z(eng);
  r.col(1) = r.col(0);
  r.col(3) = -r.col(2);
  const auto c = cluster_strategies(r);
  EXPECT_NEAR(c.distance(0, 1), 0.0, 1e-7);
  EXPECT_NEAR(c.distance(2, 3), 2.0, 1e-12);
  ASSERT_EQ(c.linkage.size(), 3u);
  EXPECT_EQ(c.linkage[0].a, 0u);
  EXPECT_EQ(c.linkage[0].b, 1u);
  EXPECT_EQ(c.linkage[0].size, 2u);
  EXPECT_NEAR(c.eigen_ratios.sum(), 1.0, 1e-12);
  for (Eigen::Index i = 1; i < c.eigen_ratios.size(); ++i) EXPECT_LE(c.eigen_ratios(i), c.eigen_ratios(i - 1));
  EXPECT_EQ(c.order.size(), 4u);
  // Average linkage heights are nondecreasing.
  for (std::size_t i = 1; i < c.linkage.size(); ++i) EXPECT_GE(c.linkage[i].height, c.linkage[i - 1].height - 1e-12);

  EXPECT_THROW(cluster_strategies(Matrix::Zero(20, 1)), Error);
}

// A bond sell-off planted after five years: the simulated risk model sees the
// jump in bond volatility within days, the trailing-year sample only slowly.
TEST(WalkForward, GarchMinVarCutsVolDuringPlantedEpisode) {
  SyntheticSpec s;
  s.seed = 5;
  s.days = 1260 + 252;
  s.high_vol_multiplier = 1.0;  // no regimes: isolate the episode
  const auto dates = business_days(s.start, s.days);
  s.episode = PlantedEpisode{dates[1260 + 42], dates[1260 + 168], Vector{{1.0, 6.0, 1.0}}};
  const auto data = make_synthetic(s);

  BacktestConfig cfg;
  cfg.strategy = Strategy::global_min_var;
  cfg.n_paths = 1000;
  cfg.seed = 11;
  cfg.start = dates[1259];
  cfg.risk_model = RiskModel::rolling_1y;
  const auto rolling = walk_forward(data.daily, cfg);
  cfg.risk_model = RiskModel::garch_dcc_copula;
  const auto garch = walk_forward(data.daily, cfg);

  auto episode_vol = [&](const BacktestResult& r) {
    std::vector<double> d;
    for (std::size_t i = 1; i < r.dates.size(); ++i)
      if (!(r.dates[i] < s.episode->start) && !(s.episode->end < r.dates[i])) d.push_back(r.wealth[i] / r.wealth[i - 1] - 1.0);
    return stdev(d);
  };
  EXPECT_LT(episode_vol(garch), episode_vol(rolling));
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/lp.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/rng.hpp"
#include "dynalloc/scenario_engine.hpp"

namespace dynalloc {

/// Weights plus a note when a documented fallback was taken.
struct Allocation {
  Vector weights;
  bool fallback = false;
  std::string flag;
};

/// Clips entries in [-1e-10, 0) to zero and renormalizes onto the simplex.
inline Vector clean_weights(Vector w) {
  for (auto& v : w)
    if (v < 0.0 && v >= -1e-10) v = 0.0;
  require((w.array() >= 0.0).all() && w.sum() > 0.0, ErrorKind::NonConvergence, "allocator produced infeasible weights");
  return w / w.sum();
}

inline Vector equal_weights(Eigen::Index n) {
  require(n >= 1, ErrorKind::TooFewAssets, "equal_weights: no assets");
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

inline Vector inverse_vol_weights(const Vector& vols) {
  require(vols.size() >= 1, ErrorKind::TooFewAssets, "inverse_vol_weights: no assets");
  require((vols.array() > 0.0).all() && vols.allFinite(), ErrorKind::ZeroVol, "inverse_vol_weights: zero volatility");
  const Vector inv = vols.cwiseInverse();
  return inv / inv.sum();
}

inline Vector risk_contributions(const Vector& w, const Matrix& cov) { return w.cwiseProduct(cov * w); }

// ---------------------------------------------------------------------------
// Quadratic programs over the simplex
// ---------------------------------------------------------------------------

namespace detail {

inline Vector project_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

/// min x'Mx subject to E x = e and x >= 0 by enumerating supports (exact for
/// PSD M): on each support the KKT system is solved by a complete orthogonal
/// decomposition and kept if consistent and non-negative.
inline std::optional<Vector> enumerate_qp(const Matrix& m, const Matrix& e, const Vector& rhs) {
  const Eigen::Index n = m.rows();
  const Eigen::Index k = e.rows();
  double best = std::numeric_limits<double>::infinity();
  std::optional<Vector> best_x;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const auto s = static_cast<Eigen::Index>(idx.size());
    Matrix kkt = Matrix::Zero(s + k, s + k);
    Vector b = Vector::Zero(s + k);
    for (Eigen::Index a = 0; a < s; ++a) {
      for (Eigen::Index c = 0; c < s; ++c) kkt(a, c) = 2.0 * m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
      for (Eigen::Index r = 0; r < k; ++r) {
        kkt(a, s + r) = e(r, idx[static_cast<std::size_t>(a)]);
        kkt(s + r, a) = e(r, idx[static_cast<std::size_t>(a)]);
      }
    }
    b.tail(k) = rhs;
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    const Vector sol = cod.solve(b);
    if (!sol.allFinite() || (kkt * sol - b).lpNorm<Eigen::Infinity>() > 1e-9 * scale) continue;
    const Vector xs = sol.head(s);
    if (xs.minCoeff() < -1e-12) continue;
    Vector x = Vector::Zero(n);
    for (Eigen::Index a = 0; a < s; ++a) x(idx[static_cast<std::size_t>(a)]) = std::max(xs(a), 0.0);
    const double f = x.dot(m * x);
    if (f < best - 1e-15 * scale) {
      best = f;
      best_x = x;
    }
  }
  return best_x;
}

/// Accelerated projected gradient for min w'Mw on the simplex.
inline Vector simplex_qp_pg(const Matrix& m, int max_iter = 200000) {
  const Eigen::Index n = m.rows();
  const double lip = 2.0 * std::max(Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff(), 1e-300);
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Vector y = w;
  double tk = 1.0, f_prev = w.dot(m * w);
  for (int it = 0; it < max_iter; ++it) {
    const Vector w_next = project_simplex(y - (2.0 / lip) * (m * y));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = w_next + ((tk - 1.0) / t_next) * (w_next - w);
    const double f = w_next.dot(m * w_next);
    if (f > f_prev) {
      y = w_next;  // restart
      tk = 1.0;
    } else {
      tk = t_next;
    }
    const bool done = std::abs(f_prev - f) <= 1e-15 * (1.0 + std::abs(f)) && (w_next - w).lpNorm<Eigen::Infinity>() < 1e-12;
    w = w_next;
    f_prev = f;
    if (done) break;
  }
  return w;
}

inline constexpr Eigen::Index kEnumerateMax = 12;

}  // namespace detail

/// argmin w'Mw over the long-only simplex. Used with M = covariance (global
/// minimum variance), M = tail-dependence matrix, or M_ij = s_i s_j lambda_ij.
inline Vector quadratic_min(Matrix m) {
  require(m.rows() >= 1 && m.rows() == m.cols() && m.allFinite(), ErrorKind::InvalidParams,
          "quadratic_min: matrix must be square and finite");
  if (m.rows() == 1) return Vector::Ones(1);
  m = symmetrize(m);
  require(repair_psd(m, 1e-10), ErrorKind::NotPSD, "quadratic_min: matrix is not positive semidefinite");
  if (m.rows() <= detail::kEnumerateMax) {
    const auto x = detail::enumerate_qp(m, Matrix::Ones(1, m.rows()), Vector::Ones(1));
    require(x.has_value(), ErrorKind::NonConvergence, "quadratic_min: no feasible support");
    return clean_weights(*x);
  }
  return clean_weights(detail::simplex_qp_pg(m));
}

inline Vector global_min_variance(const Matrix& cov) { return quadratic_min(cov); }

inline void require_pd(const Matrix& cov, const char* who) {
  require(cov.rows() >= 1 && cov.rows() == cov.cols() && cov.allFinite() && is_positive_definite(symmetrize(cov)),
          ErrorKind::NotPD, std::string(who) + ": covariance is not positive definite");
}

/// Equal risk contributions w_i (Sigma w)_i. Cyclical coordinate descent on
/// 0.5 x'Sigma x - (1/N) sum log x_i, each coordinate update being the
/// positive root of its quadratic first-order condition, then normalized.
inline Vector risk_parity(const Matrix& cov, double tol = 1e-10, int max_sweeps = 100000) {
  require_pd(cov, "risk_parity");
  const Eigen::Index n = cov.rows();
  if (n == 1) return Vector::Ones(1);
  const double budget = 1.0 / static_cast<double>(n);
  Vector x = cov.diagonal().cwiseSqrt().cwiseInverse();
  x *= 1.0 / std::sqrt(x.dot(cov * x) * static_cast<double>(n));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = cov(i, i);
      const double b = cov.row(i).dot(x) - a * x(i);
      x(i) = (-b + std::sqrt(b * b + 4.0 * a * budget)) / (2.0 * a);
    }
    const Vector rc = risk_contributions(x, cov);
    if ((rc.array() / rc.mean() - 1.0).abs().maxCoeff() < tol) return clean_weights(x);
  }
  throw Error(ErrorKind::NonConvergence, "risk_parity: coordinate descent did not converge");
}

inline double diversification_ratio(const Vector& w, const Matrix& cov) {
  return w.dot(cov.diagonal().cwiseSqrt()) / std::sqrt(w.dot(cov * w));
}

/// argmax w'sigma / sqrt(w'Sigma w): minimum-variance on the correlation
/// matrix in v = w o sigma (normalized), mapped back by w_i ∝ v_i / sigma_i.
inline Vector max_diversification(const Matrix& cov) {
  require_pd(cov, "max_diversification");
  if (cov.rows() == 1) return Vector::Ones(1);
  const Vector sig = cov.diagonal().cwiseSqrt();
  const Vector v = quadratic_min(cov_to_corr(cov));
  return clean_weights(v.cwiseQuotient(sig));
}

/// Long-only maximum Sharpe ratio r'w / sqrt(w'Sigma w). Solved as
/// min y'Sigma y subject to r'y = 1, y >= 0, then w = y / sum(y). When no
/// expected return is positive, falls back to the global minimum-variance
/// portfolio and sets the fallback flag.
inline Allocation max_sharpe(const Vector& expected, const Matrix& cov) {
  require_pd(cov, "max_sharpe");
  require(expected.size() == cov.rows() && expected.allFinite(), ErrorKind::LengthMismatch,
          "max_sharpe: expected returns do not match covariance");
  Allocation out;
  if (cov.rows() == 1) {
    out.weights = Vector::Ones(1);
    return out;
  }
  if (expected.maxCoeff() <= 0.0) {
    out.weights = quadratic_min(cov);
    out.fallback = true;
    out.flag = "no_positive_expected_return:min_variance";
    return out;
  }
  const Matrix m = symmetrize(cov);
  Vector y;
  if (m.rows() <= detail::kEnumerateMax) {
    const auto x = detail::enumerate_qp(m, expected.transpose(), Vector::Ones(1));
    require(x.has_value(), ErrorKind::NonConvergence, "max_sharpe: no feasible support");
    y = *x;
  } else {
    // Projected gradient ascent on the Sharpe ratio (pseudo-concave where r'w > 0).
    Vector w = Vector::Zero(m.rows());
    Eigen::Index best;
    expected.maxCoeff(&best);
    w(best) = 1.0;
    const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    double step = 0.1 / std::max(lip, 1e-12) * std::sqrt(w.dot(m * w));
    auto sharpe = [&](const Vector& v) { return expected.dot(v) / std::sqrt(v.dot(m * v)); };
    double f = sharpe(w);
    for (int it = 0; it < 200000; ++it) {
      const double var = w.dot(m * w), ret = expected.dot(w);
      const Vector grad = expected / std::sqrt(var) - ret * (m * w) / std::pow(var, 1.5);
      const Vector cand = detail::project_simplex(w + step * grad);
      const double fc = sharpe(cand);
      if (fc > f + 1e-16) {
        const bool done = (cand - w).lpNorm<Eigen::Infinity>() < 1e-13;
        w = cand;
        f = fc;
        step *= 1.2;
        if (done) break;
      } else {
        step *= 0.5;
        if (step < 1e-20) break;
      }
    }
    y = w;
  }
  out.weights = clean_weights(y);
  return out;
}

// ---------------------------------------------------------------------------
// CVaR programs
// ---------------------------------------------------------------------------

struct CvarOptions {
  /// Scenario sets larger than this are subsampled (first k after a seeded
  /// shuffle) before the LP.
  Eigen::Index max_scenarios = 2000;
  std::uint64_t subsample_seed = 0x5ca1ab1e;
};

namespace detail {

inline Matrix subsample_rows(const Matrix& r, const CvarOptions& opt) {
  if (r.rows() <= opt.max_scenarios) return r;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(r.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Engine eng = make_engine(opt.subsample_seed, {static_cast<std::uint64_t>(r.rows())});
  std::shuffle(idx.begin(), idx.end(), eng);
  idx.resize(static_cast<std::size_t>(opt.max_scenarios));
  std::sort(idx.begin(), idx.end());
  Matrix out(opt.max_scenarios, r.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = r.row(idx[i]);
  return out;
}

/// Sample Rockafellar-Uryasev CVaR (positive loss) without size checks.
inline double cvar_of(const Vector& port, double alpha) {
  const double n = static_cast<double>(port.size());
  const double tail = n * (1.0 - alpha);
  auto k = static_cast<std::size_t>(std::ceil(tail - 1e-9));
  k = std::clamp<std::size_t>(k, 1, static_cast<std::size_t>(port.size()));
  std::vector<double> sorted(port.data(), port.data() + port.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  const double var = -sorted[k - 1];
  double excess = 0.0;
  for (double r : sorted) excess += std::max(-r - var, 0.0);
  return var + excess / tail;
}

/// min over the simplex of kappa * CVaR_alpha(w) - mu'w, optionally with
/// expected'w >= floor, solved through its LP dual
///
///   max t + eta f  s.t.  t + kappa (R'pi)_i + eta r_i + s_i = -mu_i,
///                        sum(pi) = 1,  0 <= pi <= 1/((1-alpha)S),  eta, s >= 0,
///
/// whose N + 1 rows keep the basis small for thousands of scenarios. The
/// weights are minus the multipliers of the first N rows.
inline Vector cvar_lp(const Matrix& r, double alpha, double kappa, const Vector& mu,
                      const std::optional<std::pair<Vector, double>>& floor = std::nullopt) {
  const Eigen::Index s = r.rows(), n = r.cols();
  const bool has_floor = floor.has_value();
  const Eigen::Index cols = s + 2 + (has_floor ? 1 : 0) + n;
  lp::Problem p;
  p.a = Matrix::Zero(n + 1, cols);
  p.b = Vector::Zero(n + 1);
  p.c = Vector::Zero(cols);
  p.lower = Vector::Zero(cols);
  p.upper = Vector::Constant(cols, lp::kInf);
  const double cap = 1.0 / ((1.0 - alpha) * static_cast<double>(s));
  p.a.topLeftCorner(n, s) = kappa * r.transpose();
  p.a.row(n).head(s).setOnes();
  p.upper.head(s).setConstant(cap);
  // t = t_plus - t_minus.
  p.a.col(s).head(n).setOnes();
  p.a.col(s + 1).head(n).setConstant(-1.0);
  p.c(s) = -1.0;
  p.c(s + 1) = 1.0;
  Eigen::Index next = s + 2;
  if (has_floor) {
    p.a.col(next).head(n) = floor->first;
    p.c(next) = -floor->second;
    ++next;
  }
  for (Eigen::Index i = 0; i < n; ++i) p.a(i, next + i) = 1.0;
  p.b.head(n) = -mu;
  p.b(n) = 1.0;
  const auto sol = lp::solve(p);
  require(sol.status == lp::Status::optimal, sol.status == lp::Status::unbounded ? ErrorKind::InfeasibleLP
                                                                                 : ErrorKind::NonConvergence,
          "cvar_lp: solver did not reach an optimum");
  return clean_weights(-sol.duals.head(n));
}

inline void check_scenarios(const Matrix& r, double alpha, const char* who) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::BadAlpha, std::string(who) + ": alpha must lie in (0, 1)");
  require(r.rows() >= 100, ErrorKind::SampleTooSmall, std::string(who) + ": need at least 100 scenarios");
  require(r.cols() >= 1 && r.allFinite(), ErrorKind::InvalidParams, std::string(who) + ": scenarios must be finite");
}

}  // namespace detail

/// CVaR of the portfolio w under a scenario matrix (rows are scenarios).
inline double portfolio_cvar(const Matrix& scenarios, const Vector& w, double alpha) {
  const Vector port = scenarios * w;
  return risk_measures(as_span(port), alpha).cvar;
}

/// Rockafellar-Uryasev minimum-CVaR portfolio.
inline Vector min_cvar(const Matrix& scenarios, double alpha, const CvarOptions& opt = {}) {
  detail::check_scenarios(scenarios, alpha, "min_cvar");
  if (scenarios.cols() == 1) return Vector::Ones(1);
  const Matrix r = detail::subsample_rows(scenarios, opt);
  return detail::cvar_lp(r, alpha, 1.0, Vector::Zero(r.cols()));
}

/// Maximum expected return per unit of CVaR by Dinkelbach iteration: each
/// step solves min q CVaR(w) - r'w (the min-CVaR LP with a linear term) and
/// updates q to the achieved ratio. Falls back to min_cvar (flagged) when no
/// expected return is positive or the minimum CVaR is not a loss.
inline Allocation max_return_cvar(const Vector& expected, const Matrix& scenarios, double alpha,
                                  const CvarOptions& opt = {}) {
  detail::check_scenarios(scenarios, alpha, "max_return_cvar");
  require(expected.size() == scenarios.cols() && expected.allFinite(), ErrorKind::LengthMismatch,
          "max_return_cvar: expected returns do not match scenarios");
  Allocation out;
  if (scenarios.cols() == 1) {
    out.weights = Vector::Ones(1);
    return out;
  }
  const Matrix r = detail::subsample_rows(scenarios, opt);
  const Vector w0 = detail::cvar_lp(r, alpha, 1.0, Vector::Zero(r.cols()));
  const double cvar0 = detail::cvar_of(r * w0, alpha);
  if (expected.maxCoeff() <= 0.0 || cvar0 <= 0.0) {
    out.weights = w0;
    out.fallback = true;
    out.flag = expected.maxCoeff() <= 0.0 ? "no_positive_expected_return:min_cvar" : "nonpositive_min_cvar:min_cvar";
    return out;
  }
  // Start from the better of the min-CVaR portfolio and the best single asset.
  Vector w = w0;
  Eigen::Index top;
  expected.maxCoeff(&top);
  Vector single = Vector::Zero(r.cols());
  single(top) = 1.0;
  auto ratio = [&](const Vector& v) { return expected.dot(v) / detail::cvar_of(r * v, alpha); };
  const double c_single = detail::cvar_of(r * single, alpha);
  if (c_single > 0.0 && expected.dot(single) / c_single > ratio(w0)) w = single;
  double q = std::max(ratio(w), 0.0);
  for (int it = 0; it < 50; ++it) {
    const Vector cand = detail::cvar_lp(r, alpha, q, expected);
    const double c = detail::cvar_of(r * cand, alpha);
    if (c <= 0.0) break;
    const double q_next = expected.dot(cand) / c;
    if (q_next < q - 1e-12) break;  // no further improvement
    const bool done = std::abs(q_next - q) < 1e-8;
    w = cand;
    q = q_next;
    if (done) break;
  }
  out.weights = w;
  return out;
}

// ---------------------------------------------------------------------------
// Frontiers and resampling
// ---------------------------------------------------------------------------

struct FrontierPoint {
  double risk = 0.0;
  double ret = 0.0;
  Vector weights;
};

enum class FrontierKind { mean_variance, mean_cvar };

/// Sweeps return targets from the minimum-risk portfolio's return to the
/// largest expected return; risk is volatility (mean-variance) or CVaR.
inline std::vector<FrontierPoint> efficient_frontier(const Vector& expected, const Matrix& cov_or_scenarios,
                                                     FrontierKind kind, int n_points, double alpha = 0.95,
                                                     const CvarOptions& opt = {}) {
  require(n_points >= 2, ErrorKind::ConfigError, "efficient_frontier: need at least 2 points");
  const Eigen::Index n = expected.size();
  require(cov_or_scenarios.cols() == n, ErrorKind::LengthMismatch, "efficient_frontier: dimension mismatch");
  std::vector<FrontierPoint> out;
  if (kind == FrontierKind::mean_variance) {
    require_pd(cov_or_scenarios, "efficient_frontier");
    const Matrix cov = symmetrize(cov_or_scenarios);
    const Vector w_min = quadratic_min(cov);
    const double lo = expected.dot(w_min), hi = expected.maxCoeff();
    Matrix e(2, n);
    e.row(0).setOnes();
    e.row(1) = expected.transpose();
    for (int k = 0; k < n_points; ++k) {
      const double target = lo + (hi - lo) * k / (n_points - 1);
      Vector w = w_min;
      if (k > 0) {
        Vector rhs(2);
        rhs << 1.0, target;
        std::optional<Vector> x;
        if (n <= detail::kEnumerateMax) x = detail::enumerate_qp(cov, e, rhs);
        require(x.has_value(), ErrorKind::NonConvergence, "efficient_frontier: target not attainable");
        w = clean_weights(*x);
      }
      out.push_back({std::sqrt(w.dot(cov * w)), expected.dot(w), w});
    }
    return out;
  }
  detail::check_scenarios(cov_or_scenarios, alpha, "efficient_frontier");
  const Matrix r = detail::subsample_rows(cov_or_scenarios, opt);
  const Vector w_min = detail::cvar_lp(r, alpha, 1.0, Vector::Zero(n));
  const double lo = expected.dot(w_min), hi = expected.maxCoeff();
  for (int k = 0; k < n_points; ++k) {
    const double target = lo + (hi - lo) * k / (n_points - 1);
    const Vector w = k == 0 ? w_min : detail::cvar_lp(r, alpha, 1.0, Vector::Zero(n), std::make_pair(expected, target));
    out.push_back({detail::cvar_of(r * w, alpha), expected.dot(w), w});
  }
  return out;
}

/// Average of k optimizations, each on its own simulated scenario set with
/// seed derived from (master_seed, replica).
inline Vector resampled_weights(const std::function<Vector(const ScenarioSet&)>& optimizer, const JointModelFit& model,
                                std::uint64_t master_seed, int k = 20, SimulationOptions sim = {}) {
  require(k >= 1, ErrorKind::ConfigError, "resampled_weights: k must be positive");
  const unsigned threads = sim.threads;
  sim.threads = 1;
  std::vector<Vector> ws(static_cast<std::size_t>(k));
  parallel_for(ws.size(), threads, [&](std::size_t i) {
    const auto s = simulate_scenarios(model, derive_seed(master_seed, {static_cast<std::uint64_t>(i)}), sim);
    ws[i] = optimizer(s);
  });
  Vector avg = Vector::Zero(model.dim());
  for (const auto& w : ws) avg += w;
  return avg / static_cast<double>(k);
}

}  // namespace dynalloc

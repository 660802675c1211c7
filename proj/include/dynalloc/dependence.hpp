#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
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
// Rank transforms
// ---------------------------------------------------------------------------

/// Average ranks (1-based) of a sample; ties share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Column-wise rank / (T + 1); entries strictly inside (0, 1).
inline Matrix pseudo_observations(const Matrix& residuals) {
  require(residuals.rows() >= 2, ErrorKind::SeriesTooShort, "pseudo_observations: need at least 2 rows");
  const double denom = static_cast<double>(residuals.rows() + 1);
  Matrix u(residuals.rows(), residuals.cols());
  for (Eigen::Index c = 0; c < residuals.cols(); ++c) {
    const Vector col = residuals.col(c);
    const bool constant = (col.array() == col(0)).all();
    require(!constant, ErrorKind::ConstantColumn, "pseudo_observations: column " + std::to_string(c) + " is constant");
    const auto r = average_ranks(as_span(col));
    for (Eigen::Index t = 0; t < col.size(); ++t) u(t, c) = r[static_cast<std::size_t>(t)] / denom;
  }
  return u;
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::LengthMismatch, "kendall_tau: bad lengths");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  auto pairs = [](double k) { return k * (k - 1.0) / 2.0; };

  double ties_x = 0.0, ties_xy = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    ties_x += pairs(static_cast<double>(j - i + 1));
    for (std::size_t a = i; a <= j;) {
      std::size_t b = a;
      while (b + 1 <= j && y[idx[b + 1]] == y[idx[a]]) ++b;
      ties_xy += pairs(static_cast<double>(b - a + 1));
      a = b + 1;
    }
    i = j + 1;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  double swaps = 0.0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t a = lo, b = mid, k = lo;
      while (a < mid && b < hi) {
        if (ys[b] < ys[a]) {
          swaps += static_cast<double>(mid - a);
          buf[k++] = ys[b++];
        } else {
          buf[k++] = ys[a++];
        }
      }
      while (a < mid) buf[k++] = ys[a++];
      while (b < hi) buf[k++] = ys[b++];
    }
    ys.swap(buf);
  }
  double ties_y = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
    ties_y += pairs(static_cast<double>(j - i + 1));
    i = j + 1;
  }
  const double n0 = pairs(static_cast<double>(n));
  const double denom = std::sqrt((n0 - ties_x) * (n0 - ties_y));
  require(denom > 0.0, ErrorKind::ZeroVariance, "kendall_tau: constant input");
  return (n0 - ties_x - ties_y + ties_xy - 2.0 * swaps) / denom;
}

// ---------------------------------------------------------------------------
// Constant and dynamic conditional correlation
// ---------------------------------------------------------------------------

/// Q_t = (1 - a - b) rbar + a z_{t-1} z_{t-1}' + b Q_{t-1},
/// R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}.  a = b = 0 is the CCC model.
struct DccParams {
  double a = 0.0;
  double b = 0.0;
  Matrix rbar;

  void validate() const {
    require(a >= 0.0 && b >= 0.0 && a + b < 1.0, ErrorKind::InvalidParams, "DCC requires a, b >= 0 and a + b < 1");
    require(rbar.rows() >= 1 && rbar.rows() == rbar.cols(), ErrorKind::InvalidParams, "DCC rbar must be square");
    require((rbar - rbar.transpose()).lpNorm<Eigen::Infinity>() < 1e-10 &&
                (rbar.diagonal().array() - 1.0).abs().maxCoeff() < 1e-10 && is_positive_definite(rbar),
            ErrorKind::InvalidParams, "DCC rbar must be a positive definite correlation matrix");
  }
};

enum class CorrelationMode { ccc, dcc };

struct DccFilterOutput {
  std::vector<Matrix> correlations;  // R_1..R_T
  Matrix q_next;                     // Q_{T+1}
  double loglik = 0.0;               // correlation part of the Gaussian likelihood
};

inline Matrix normalize_q(const Matrix& q) {
  const Vector d = q.diagonal().cwiseSqrt().cwiseInverse();
  Matrix r = d.asDiagonal() * q * d.asDiagonal();
  r.diagonal().setOnes();
  return r;
}

inline Matrix dcc_update(const DccParams& p, const Matrix& q_prev, const Vector& z_prev) {
  return (1.0 - p.a - p.b) * p.rbar + p.a * z_prev * z_prev.transpose() + p.b * q_prev;
}

namespace detail {
inline double dcc_loglik(double a, double b, const Matrix& rbar, const Matrix& z) {
  const Eigen::Index n = z.cols();
  Matrix q = rbar;
  double ll = 0.0;
  Eigen::LLT<Matrix> llt(n);
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    if (t > 0) {
      const Vector zp = z.row(t - 1).transpose();
      q = (1.0 - a - b) * rbar + a * zp * zp.transpose() + b * q;
    }
    const Matrix r = normalize_q(q);
    llt.compute(r);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Vector zt = z.row(t).transpose();
    const Vector w = llt.matrixL().solve(zt);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    ll -= 0.5 * (logdet + w.squaredNorm() - zt.squaredNorm());
  }
  return ll;
}
}  // namespace detail

/// Runs the DCC recursion from Q_1 = rbar.
inline DccFilterOutput dcc_filter(const DccParams& p, const Matrix& z) {
  p.validate();
  require(z.cols() == p.rbar.cols(), ErrorKind::InvalidParams, "dcc_filter: dimension mismatch");
  DccFilterOutput out;
  out.correlations.reserve(static_cast<std::size_t>(z.rows()));
  Matrix q = p.rbar;
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    if (t > 0) q = dcc_update(p, q, z.row(t - 1).transpose());
    out.correlations.push_back(normalize_q(q));
  }
  out.q_next = z.rows() > 0 ? dcc_update(p, q, z.row(z.rows() - 1).transpose()) : q;
  out.loglik = detail::dcc_loglik(p.a, p.b, p.rbar, z);
  return out;
}

struct DccFitOptions {
  /// DCC dynamics are dropped (a = b = 0) unless the likelihood-ratio
  /// statistic against CCC exceeds this value (chi-square, 2 dof, 95%).
  double lr_threshold = 5.991;
  /// Number of the fixed starts to try, after `initial` when present.
  int n_starts = 3;
  std::optional<std::array<double, 2>> initial{};
  optim::Options optimizer{.max_iter = 200, .grad_tol = 1e-7, .f_tol = 1e-13, .fd_step = 1e-6};
};

/// Two-step fit: rbar by correlation targeting (sample correlation of the
/// standardized residuals), then (a, b) by Gaussian quasi-maximum likelihood.
inline DccParams fit_correlation(const Matrix& std_residuals, CorrelationMode mode, const DccFitOptions& opt = {}) {
  require(std_residuals.cols() >= 2, ErrorKind::SingularCorrelation, "fit_correlation: need at least two assets");
  require(std_residuals.rows() >= 250, ErrorKind::SeriesTooShort, "fit_correlation: need at least 250 observations");
  DccParams p;
  p.rbar = sample_correlation(std_residuals);
  require(p.rbar.allFinite() && is_positive_definite(p.rbar), ErrorKind::SingularCorrelation,
          "fit_correlation: sample correlation is not positive definite");
  if (mode == CorrelationMode::ccc) return p;

  const double t = static_cast<double>(std_residuals.rows());
  auto decode = [](const Vector& raw) {
    const double e1 = std::exp(std::clamp(raw(0), -40.0, 40.0));
    const double e2 = std::exp(std::clamp(raw(1), -40.0, 40.0));
    const double d = 1.0 + e1 + e2;
    return std::array<double, 2>{e1 / d, e2 / d};
  };
  auto objective = [&](const Vector& raw) {
    const auto [a, b] = decode(raw);
    return -detail::dcc_loglik(a, b, p.rbar, std_residuals) / t;
  };
  static constexpr std::array<std::array<double, 2>, 3> kStarts{{{0.02, 0.95}, {0.05, 0.85}, {0.01, 0.50}}};
  double best_f = std::numeric_limits<double>::infinity();
  Vector best_raw;
  bool any_converged = false;
  std::vector<std::array<double, 2>> starts;
  if (opt.initial) starts.push_back({std::clamp((*opt.initial)[0], 1e-4, 0.5), std::clamp((*opt.initial)[1], 1e-4, 0.99)});
  for (int i = 0; i < std::min<int>(opt.n_starts, kStarts.size()); ++i) starts.push_back(kStarts[static_cast<std::size_t>(i)]);
  for (auto s : starts) {
    if (s[0] + s[1] > 0.999) s[1] = 0.999 - s[0];
    Vector raw(2);
    const double slack = 1.0 - s[0] - s[1];
    raw << std::log(s[0] / slack), std::log(s[1] / slack);
    const auto res = optim::minimize_bfgs(objective, raw, opt.optimizer);
    any_converged = any_converged || res.converged;
    if (res.f < best_f) {
      best_f = res.f;
      best_raw = res.x;
    }
  }
  require(std::isfinite(best_f) && any_converged, ErrorKind::NonConvergence, "fit_correlation: DCC fit failed");
  const auto [a, b] = decode(best_raw);
  const double ll_dcc = -best_f * t;
  const double ll_ccc = detail::dcc_loglik(0.0, 0.0, p.rbar, std_residuals);
  if (2.0 * (ll_dcc - ll_ccc) >= opt.lr_threshold) {
    p.a = a;
    p.b = b;
  }
  return p;
}

/// Gaussian innovations with DCC correlation dynamics, T x N.
inline Matrix simulate_dcc(const DccParams& p, Eigen::Index t, std::uint64_t seed) {
  p.validate();
  Engine eng = make_engine(seed, {0});
  std::normal_distribution<double> g;
  const Eigen::Index n = p.rbar.rows();
  Matrix z(t, n);
  Matrix q = p.rbar;
  for (Eigen::Index i = 0; i < t; ++i) {
    if (i > 0) q = dcc_update(p, q, z.row(i - 1).transpose());
    const Matrix l = Eigen::LLT<Matrix>(normalize_q(q)).matrixL();
    Vector e(n);
    for (Eigen::Index k = 0; k < n; ++k) e(k) = g(eng);
    z.row(i) = (l * e).transpose();
  }
  return z;
}

// ---------------------------------------------------------------------------
// Student-t copula
// ---------------------------------------------------------------------------

struct TCopulaParams {
  Matrix corr;
  double nu = 50.0;

  static constexpr double kNuCap = 50.0;

  void validate() const {
    require(corr.rows() >= 1 && corr.rows() == corr.cols() && nu > 2.0 && nu <= kNuCap + 1e-12,
            ErrorKind::InvalidParams, "t-copula requires N x N correlation and 2 < nu <= 50");
    require((corr - corr.transpose()).lpNorm<Eigen::Infinity>() < 1e-10 &&
                (corr.diagonal().array() - 1.0).abs().maxCoeff() < 1e-10,
            ErrorKind::InvalidParams, "t-copula correlation must be symmetric with unit diagonal");
  }
};

/// Log-likelihood of a t-copula at (corr, nu) for uniforms in (0, 1).
inline double t_copula_loglik(const Matrix& u, const Matrix& corr, double nu) {
  using boost::math::lgamma;
  const Eigen::Index n = u.cols();
  const double dn = static_cast<double>(n);
  Eigen::LLT<Matrix> llt(corr);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Matrix l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double c0 = lgamma((nu + dn) / 2.0) + (dn - 1.0) * lgamma(nu / 2.0) - dn * lgamma((nu + 1.0) / 2.0) -
                    0.5 * logdet;
  const boost::math::students_t dist(nu);
  // Pseudo-observations repeat the same rank grid in every column, so each
  // distinct value is inverted once.
  Matrix x(u.rows(), n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index k = 0; k < n; ++k) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return u(a, k) < u(b, k); });
    double prev_u = -1.0, prev_x = 0.0;
    for (const auto t : order) {
      if (u(t, k) != prev_u) {
        prev_u = u(t, k);
        prev_x = boost::math::quantile(dist, prev_u);
      }
      x(t, k) = prev_x;
    }
  }
  const double marg = x.array().square().unaryExpr([nu](double v) { return std::log1p(v / nu); }).sum();
  const Matrix w = l.triangularView<Eigen::Lower>().solve(x.transpose());
  double ll = static_cast<double>(u.rows()) * c0 + 0.5 * (nu + 1.0) * marg;
  for (Eigen::Index t = 0; t < u.rows(); ++t) ll -= 0.5 * (nu + dn) * std::log1p(w.col(t).squaredNorm() / nu);
  return ll;
}

/// Correlation by Kendall-tau inversion sin(pi tau / 2), repaired to the
/// nearest positive definite correlation when needed.
inline Matrix kendall_correlation(const Matrix& u) {
  const Eigen::Index n = u.cols();
  Matrix r = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector ci = u.col(i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vector cj = u.col(j);
      const double tau = kendall_tau(as_span(ci), as_span(cj));
      r(i, j) = r(j, i) = std::sin(std::numbers::pi * tau / 2.0);
    }
  }
  if (min_eigenvalue(r) < 1e-8) r = nearest_correlation(r, 1e-8);
  return r;
}

struct TCopulaFitOptions {
  /// nu is reported at the cap unless the likelihood-ratio statistic against
  /// nu = 50 exceeds this value (chi-square, 1 dof, boundary-adjusted 95%).
  double cap_lr_threshold = 2.706;
};

inline TCopulaParams fit_t_copula(const Matrix& u, const TCopulaFitOptions& opt = {}) {
  require(u.rows() >= 250, ErrorKind::SeriesTooShort, "fit_t_copula: need at least 250 observations");
  require(u.cols() >= 1, ErrorKind::InvalidParams, "fit_t_copula: no columns");
  require((u.array() > 0.0).all() && (u.array() < 1.0).all(), ErrorKind::OutOfRangeInput,
          "fit_t_copula: uniforms must lie strictly inside (0, 1)");
  TCopulaParams p;
  p.corr = kendall_correlation(u);
  if (u.cols() == 1) {
    p.nu = TCopulaParams::kNuCap;
    return p;
  }

  // Profile likelihood over log(nu - 2): coarse grid, then golden refinement.
  static constexpr std::array<double, 18> kGrid{2.2, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0,
                                                8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0};
  std::array<double, kGrid.size()> ll{};
  for (std::size_t i = 0; i < kGrid.size(); ++i) ll[i] = t_copula_loglik(u, p.corr, kGrid[i]);
  const auto best = static_cast<std::size_t>(std::max_element(ll.begin(), ll.end()) - ll.begin());
  require(std::isfinite(ll[best]), ErrorKind::NonConvergence, "fit_t_copula: likelihood not finite");
  double nu_hat = kGrid[best];
  double ll_hat = ll[best];
  if (best > 0 && best + 1 < kGrid.size()) {
    const double lo = std::log(kGrid[best - 1] - 2.0), hi = std::log(kGrid[best + 1] - 2.0);
    const double x = optim::golden_section(
        [&](double s) { return -t_copula_loglik(u, p.corr, 2.0 + std::exp(s)); }, lo, hi, 1e-2);
    const double cand = 2.0 + std::exp(x);
    const double ll_cand = t_copula_loglik(u, p.corr, cand);
    if (ll_cand > ll_hat) {
      nu_hat = cand;
      ll_hat = ll_cand;
    }
  }
  const double ll_cap = ll.back();
  p.nu = 2.0 * (ll_hat - ll_cap) < opt.cap_lr_threshold ? TCopulaParams::kNuCap : nu_hat;
  return p;
}

/// Draws n multivariate-t variates (t-space, before the marginal CDF).
inline Matrix sample_t_variates(const TCopulaParams& p, Eigen::Index n, Engine& eng) {
  const Eigen::Index dim = p.corr.rows();
  const Matrix l = Eigen::LLT<Matrix>(p.corr).matrixL();
  std::normal_distribution<double> g;
  std::chi_squared_distribution<double> chi(p.nu);
  Matrix out(n, dim);
  Vector e(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) e(k) = g(eng);
    const double scale = std::sqrt(p.nu / chi(eng));
    out.row(i) = (l * e).transpose() * scale;
  }
  return out;
}

inline Matrix sample_t_copula(const TCopulaParams& p, Eigen::Index n, std::uint64_t seed) {
  p.validate();
  Engine eng = make_engine(seed, {0});
  Matrix x = sample_t_variates(p, n, eng);
  const boost::math::students_t dist(p.nu);
  return x.unaryExpr([&](double v) { return boost::math::cdf(dist, v); });
}

// ---------------------------------------------------------------------------
// Tail dependence
// ---------------------------------------------------------------------------

/// Lower (= upper) tail dependence of a bivariate t copula:
/// 2 F_{t, nu+1}( -sqrt((nu + 1)(1 - rho) / (1 + rho)) ).
inline double t_tail_dependence(double rho, double nu) {
  require(nu > 0.0 && rho >= -1.0 && rho <= 1.0, ErrorKind::InvalidParams, "t_tail_dependence: bad inputs");
  if (rho >= 1.0) return 1.0;
  if (rho <= -1.0) return 0.0;
  const boost::math::students_t dist(nu + 1.0);
  return 2.0 * boost::math::cdf(dist, -std::sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho)));
}

inline Matrix t_tail_dependence(const TCopulaParams& p) {
  p.validate();
  const Eigen::Index n = p.corr.rows();
  Matrix lambda = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) lambda(i, j) = lambda(j, i) = t_tail_dependence(p.corr(i, j), p.nu);
  return lambda;
}

/// Empirical lower-tail dependence at level q: the joint exceedance count
/// divided by the mean of the two marginal exceedance counts (-> lambda as
/// q -> 0, exactly 1 for comonotone samples).
inline double empirical_tail_dependence(std::span<const double> u, std::span<const double> v, double q) {
  require(q > 0.0 && q < 0.5, ErrorKind::BadTailLevel, "empirical_tail_dependence: q must lie in (0, 0.5)");
  require(u.size() == v.size() && !u.empty(), ErrorKind::LengthMismatch, "empirical_tail_dependence: bad lengths");
  double joint = 0.0, mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const bool a = u[i] <= q, b = v[i] <= q;
    joint += (a && b) ? 1.0 : 0.0;
    mu += a ? 1.0 : 0.0;
    mv += b ? 1.0 : 0.0;
  }
  const double marg = 0.5 * (mu + mv);
  return marg > 0.0 ? joint / marg : 0.0;
}

/// Weight-and-vol weighted average of the off-diagonal entries of `pairwise`:
/// sum_{i<j} w_i w_j s_i s_j M_ij / sum_{i<j} w_i w_j s_i s_j. With M = rho this
/// is the weighted portfolio correlation; with M = lambda the weighted
/// portfolio tail dependence.
inline double weighted_pairwise(const Vector& weights, const Vector& vols, const Matrix& pairwise) {
  const Eigen::Index n = weights.size();
  require(vols.size() == n && pairwise.rows() == n && pairwise.cols() == n, ErrorKind::LengthMismatch,
          "weighted_pairwise: dimension mismatch");
  require((weights.array() >= 0.0).all() && (vols.array() >= 0.0).all(), ErrorKind::InvalidParams,
          "weighted_pairwise: weights and vols must be non-negative");
  const Vector ws = weights.cwiseProduct(vols);
  require((ws.array() > 0.0).count() >= 2, ErrorKind::DegenerateWeights,
          "weighted_pairwise: need two positive weight-vol products");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      num += ws(i) * ws(j) * pairwise(i, j);
      den += ws(i) * ws(j);
    }
  return num / den;
}

}  // namespace dynalloc

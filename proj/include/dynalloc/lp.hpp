#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"

namespace dynalloc::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// minimize c'x  subject to  A x = b,  lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be +inf. The solver is a
/// bounded-variable revised simplex with an explicit basis inverse, intended
/// for problems with few rows and many (boxed) columns.
struct Problem {
  Matrix a;
  Vector b;
  Vector c;
  Vector lower;
  Vector upper;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Solution {
  Status status = Status::iteration_limit;
  Vector x;
  /// Simplex multipliers y = c_B' B^-1, so reduced costs are c - A'y.
  Vector duals;
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

enum class VarState : unsigned char { lower, upper, basic };

struct Tableau {
  const Matrix& a;  // m x (n + m), artificials appended
  const Vector& b;
  Vector lower, upper;
  std::vector<VarState> state;
  std::vector<Eigen::Index> basis;  // basic variable of each row
  Vector x;
  Matrix b_inv;
  int iterations = 0;

  Tableau(const Matrix& a_, const Vector& b_) : a(a_), b(b_) {}

  void refactor() {
    const Eigen::Index m = a.rows();
    Matrix bm(m, m);
    for (Eigen::Index r = 0; r < m; ++r) bm.col(r) = a.col(basis[static_cast<std::size_t>(r)]);
    b_inv = bm.partialPivLu().inverse();
  }

  void compute_basic_values() {
    Vector rhs = b;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (state[static_cast<std::size_t>(j)] != VarState::basic && x(j) != 0.0) rhs -= a.col(j) * x(j);
    }
    const Vector xb = b_inv * rhs;
    for (Eigen::Index r = 0; r < a.rows(); ++r) x(basis[static_cast<std::size_t>(r)]) = xb(r);
  }

  // Returns the final status of the phase.
  Status run(const Vector& cost, int max_iter) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    constexpr double kDualTol = 1e-10;
    constexpr double kPivotTol = 1e-11;
    double best_obj = kInf;
    int stall = 0;
    bool bland = false;

    for (int it = 0; it < max_iter; ++it, ++iterations) {
      if (iterations % 50 == 0) refactor();
      compute_basic_values();
      Vector cb(m);
      for (Eigen::Index r = 0; r < m; ++r) cb(r) = cost(basis[static_cast<std::size_t>(r)]);
      const Eigen::RowVectorXd y = cb.transpose() * b_inv;
      const double obj = cost.dot(x);
      if (obj < best_obj - 1e-12 * (1.0 + std::abs(best_obj))) {
        best_obj = obj;
        stall = 0;
        bland = false;
      } else if (++stall > 50) {
        bland = true;
      }

      // Pricing.
      Eigen::Index q = -1;
      double best_score = 0.0;
      int dir = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto st = state[static_cast<std::size_t>(j)];
        if (st == VarState::basic || lower(j) == upper(j)) continue;
        const double d = cost(j) - y.dot(a.col(j));
        int jdir = 0;
        if (st == VarState::lower && d < -kDualTol) jdir = 1;
        else if (st == VarState::upper && d > kDualTol) jdir = -1;
        if (jdir == 0) continue;
        if (bland) {
          q = j;
          dir = jdir;
          break;
        }
        if (std::abs(d) > best_score) {
          best_score = std::abs(d);
          q = j;
          dir = jdir;
        }
      }
      if (q < 0) return Status::optimal;

      const Vector alpha = b_inv * a.col(q);
      // Ratio test: x_B(theta) = x_B - dir * theta * alpha.
      double theta = upper(q) - lower(q);
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        const double da = dir * alpha(r);
        if (std::abs(da) <= kPivotTol) continue;
        const Eigen::Index j = basis[static_cast<std::size_t>(r)];
        double limit;
        bool to_upper;
        if (da > 0.0) {
          limit = (x(j) - lower(j)) / da;
          to_upper = false;
        } else {
          if (!std::isfinite(upper(j))) continue;
          limit = (upper(j) - x(j)) / (-da);
          to_upper = true;
        }
        limit = std::max(limit, 0.0);
        bool take = limit < theta - 1e-12;
        if (!take && leave >= 0 && limit <= theta + 1e-12) {
          take = bland ? j < basis[static_cast<std::size_t>(leave)]
                       : std::abs(da) > std::abs(leave_pivot);
        }
        if (take) {
          theta = limit;
          leave = r;
          leave_to_upper = to_upper;
          leave_pivot = da;
        }
      }
      if (!std::isfinite(theta)) return Status::unbounded;

      if (leave < 0) {
        // Bound flip of the entering variable.
        x(q) = dir > 0 ? upper(q) : lower(q);
        state[static_cast<std::size_t>(q)] = dir > 0 ? VarState::upper : VarState::lower;
        continue;
      }
      const Eigen::Index out = basis[static_cast<std::size_t>(leave)];
      x(q) += dir * theta;
      state[static_cast<std::size_t>(out)] = leave_to_upper ? VarState::upper : VarState::lower;
      x(out) = leave_to_upper ? upper(out) : lower(out);
      state[static_cast<std::size_t>(q)] = VarState::basic;
      basis[static_cast<std::size_t>(leave)] = q;

      // Product-form update of the explicit inverse.
      const double piv = alpha(leave);
      const Eigen::RowVectorXd pivot_row = b_inv.row(leave) / piv;
      for (Eigen::Index r = 0; r < m; ++r) {
        if (r == leave) continue;
        b_inv.row(r) -= alpha(r) * pivot_row;
      }
      b_inv.row(leave) = pivot_row;
    }
    return Status::iteration_limit;
  }
};

}  // namespace detail

inline Solution solve(const Problem& p, int max_iter = 200000) {
  const Eigen::Index m = p.a.rows();
  const Eigen::Index n = p.a.cols();
  require(p.b.size() == m && p.c.size() == n && p.lower.size() == n && p.upper.size() == n,
          ErrorKind::InvalidParams, "lp: inconsistent problem dimensions");
  for (Eigen::Index j = 0; j < n; ++j) {
    require(std::isfinite(p.lower(j)) && p.upper(j) >= p.lower(j), ErrorKind::InvalidParams,
            "lp: lower bounds must be finite and not exceed upper bounds");
  }

  // Start every structural at its lower bound; artificials absorb the residual.
  Vector x0 = p.lower;
  const Vector resid = p.b - p.a * x0;
  Matrix aug(m, n + m);
  aug.leftCols(n) = p.a;
  aug.rightCols(m).setZero();
  for (Eigen::Index r = 0; r < m; ++r) aug(r, n + r) = resid(r) >= 0.0 ? 1.0 : -1.0;

  detail::Tableau tab(aug, p.b);
  tab.lower = Vector::Zero(n + m);
  tab.upper = Vector::Constant(n + m, kInf);
  tab.lower.head(n) = p.lower;
  tab.upper.head(n) = p.upper;
  tab.state.assign(static_cast<std::size_t>(n + m), detail::VarState::lower);
  tab.x = Vector::Zero(n + m);
  tab.x.head(n) = x0;
  tab.basis.resize(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    tab.basis[static_cast<std::size_t>(r)] = n + r;
    tab.state[static_cast<std::size_t>(n + r)] = detail::VarState::basic;
    tab.x(n + r) = std::abs(resid(r));
  }
  tab.refactor();

  Solution sol;
  Vector phase1_cost = Vector::Zero(n + m);
  phase1_cost.tail(m).setOnes();
  Status st = tab.run(phase1_cost, max_iter);
  tab.compute_basic_values();
  const double infeas = tab.x.tail(m).sum();
  if (st == Status::iteration_limit) {
    sol.status = st;
    return sol;
  }
  if (infeas > 1e-8 * (1.0 + p.b.lpNorm<Eigen::Infinity>())) {
    sol.status = Status::infeasible;
    return sol;
  }
  // Pin artificials at zero for phase 2.
  for (Eigen::Index r = 0; r < m; ++r) tab.upper(n + r) = 0.0;

  Vector cost = Vector::Zero(n + m);
  cost.head(n) = p.c;
  st = tab.run(cost, max_iter);
  tab.refactor();
  tab.compute_basic_values();
  sol.status = st;
  sol.iterations = tab.iterations;
  sol.x = tab.x.head(n).cwiseMax(p.lower).cwiseMin(p.upper);
  Vector cb(m);
  for (Eigen::Index r = 0; r < m; ++r) cb(r) = cost(tab.basis[static_cast<std::size_t>(r)]);
  sol.duals = (cb.transpose() * tab.b_inv).transpose();
  sol.objective = p.c.dot(sol.x);
  return sol;
}

}  // namespace dynalloc::lp

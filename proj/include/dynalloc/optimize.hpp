#pragma once

#include <cmath>
#include <limits>

#include "dynalloc/linalg.hpp"

namespace dynalloc::optim {

struct Options {
  int max_iter = 400;
  double grad_tol = 1e-6;
  double f_tol = 1e-12;
  double fd_step = 1e-5;
};

struct Result {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <class F>
double safe_eval(F& f, const Vector& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

template <class F>
Vector central_gradient(F& f, const Vector& x, double step) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + h;
    const double fp = safe_eval(f, probe);
    probe(i) = x(i) - h;
    const double fm = safe_eval(f, probe);
    probe(i) = x(i);
    g(i) = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h) : 0.0;
  }
  return g;
}

}  // namespace detail

/// Quasi-Newton minimization with central-difference gradients and an
/// Armijo backtracking line search. Non-finite objective values are treated
/// as +inf so the line search retreats from infeasible regions.
template <class F>
Result minimize_bfgs(F&& f, Vector x0, const Options& opt = {}) {
  const Eigen::Index n = x0.size();
  Result res;
  res.x = std::move(x0);
  res.f = detail::safe_eval(f, res.x);
  if (!std::isfinite(res.f)) return res;

  Matrix h_inv = Matrix::Identity(n, n);
  Vector g = detail::central_gradient(f, res.x, opt.fd_step);
  bool just_reset = true;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      res.converged = true;
      return res;
    }
    Vector dir = -h_inv * g;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      h_inv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
      just_reset = true;
    }
    double step = 1.0;
    // Keep the first trial step bounded in parameter space.
    const double dir_norm = dir.lpNorm<Eigen::Infinity>();
    if (dir_norm > 5.0) step = 5.0 / dir_norm;
    Vector x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = detail::safe_eval(f, x_new);
      if (f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (just_reset) {
        res.converged = g.lpNorm<Eigen::Infinity>() < 1e3 * opt.grad_tol;
        return res;
      }
      h_inv.setIdentity();
      just_reset = true;
      continue;
    }
    just_reset = false;
    const Vector g_new = detail::central_gradient(f, x_new, opt.fd_step);
    const Vector s = x_new - res.x;
    const Vector y = g_new - g;
    const double f_old = res.f;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix ident = Matrix::Identity(n, n);
      h_inv = (ident - rho * s * y.transpose()) * h_inv * (ident - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    if (std::abs(f_old - f_new) <= opt.f_tol * (1.0 + std::abs(f_new)) &&
        g.lpNorm<Eigen::Infinity>() < 1e2 * opt.grad_tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

/// Golden-section search for the minimum of a unimodal 1-D function.
template <class F>
double golden_section(F&& f, double lo, double hi, double tol = 1e-6) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace dynalloc::optim

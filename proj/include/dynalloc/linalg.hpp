#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "dynalloc/error.hpp"

namespace dynalloc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stdev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::LengthMismatch, "pearson: length mismatch");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::ZeroVariance, "pearson: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

/// Column covariance of a T x N sample (n - 1 denominator).
inline Matrix sample_covariance(const Matrix& x) {
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Matrix centered = x.rowwise() - mu;
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

inline Matrix cov_to_corr(const Matrix& cov) {
  const Vector inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  Matrix c = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  c.diagonal().setOnes();
  return c;
}

inline Matrix sample_correlation(const Matrix& x) { return cov_to_corr(sample_covariance(x)); }

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline bool is_positive_definite(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  return llt.info() == Eigen::Success && min_eigenvalue(m) > 0.0;
}

/// Nearest correlation matrix by eigenvalue clipping at `floor` followed by
/// rescaling to unit diagonal.
inline Matrix nearest_correlation(const Matrix& m, double floor = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector ev = es.eigenvalues().cwiseMax(floor);
  Matrix repaired = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return cov_to_corr(symmetrize(repaired));
}

/// Clips negative eigenvalues to zero. Returns false when the most negative
/// eigenvalue is below -tol (the matrix is genuinely indefinite).
inline bool repair_psd(Matrix& m, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.eigenvalues()(0) < -tol) return false;
  if (es.eigenvalues()(0) >= 0.0) {
    m = symmetrize(m);
    return true;
  }
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  m = symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  return true;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_eigen(std::span<const double> v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace dynalloc

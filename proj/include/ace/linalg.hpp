#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ace/error.hpp"
#include "ace/types.hpp"

namespace ace {

/// Symmetric dense matrix stored row-major, for small d.
struct sym_matrix {
  std::size_t n = 0;
  std::vector<double> a;  // n*n

  explicit sym_matrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// Column means of a matrix.
inline std::vector<double> column_means(const embedding_matrix& z) {
  std::vector<double> mu(z.cols(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) mu[j] += z(i, j);
  for (double& v : mu) v /= static_cast<double>(z.rows());
  return mu;
}

/// Sample covariance (n-1 denominator) of the rows of z. Requires n >= 2.
inline sym_matrix sample_covariance(const embedding_matrix& z) {
  require(z.rows() >= 2, errc::too_few_points, "covariance needs n >= 2");
  std::size_t d = z.cols();
  sym_matrix cov(d);
  std::vector<double> mu = column_means(z);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      double da = row[a] - mu[a];
      for (std::size_t b = a; b < d; ++b) cov.at(a, b) += da * (row[b] - mu[b]);
    }
  }
  double denom = static_cast<double>(z.rows() - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov.at(a, b) /= denom;
      cov.at(b, a) = cov.at(a, b);
    }
  return cov;
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations. Sweeps until
/// the off-diagonal Frobenius norm drops below tol. Returns eigenvalues in
/// descending order.
inline std::vector<double> jacobi_eigenvalues(sym_matrix m, double tol = 1e-12,
                                              int max_sweeps = 100) {
  std::size_t d = m.n;
  if (d == 1) return {m.at(0, 0)};
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) off += 2.0 * m.at(i, j) * m.at(i, j);
    if (std::sqrt(off) < tol) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        double apq = m.at(p, q);
        if (apq == 0.0) continue;
        double app = m.at(p, p), aqq = m.at(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          double akp = m.at(k, p), akq = m.at(k, q);
          m.at(k, p) = c * akp - s * akq;
          m.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          double apk = m.at(p, k), aqk = m.at(q, k);
          m.at(p, k) = c * apk - s * aqk;
          m.at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(d);
  for (std::size_t i = 0; i < d; ++i) eig[i] = m.at(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

/// Dominant eigenvector of a symmetric PSD matrix by power iteration.
/// Deterministic start along the largest-diagonal axis.
inline std::vector<double> power_iteration(const sym_matrix& m, double tol = 1e-10,
                                           int max_iter = 10000) {
  std::size_t d = m.n;
  std::vector<double> v(d, 0.0);
  std::size_t start = 0;
  for (std::size_t i = 1; i < d; ++i)
    if (m.at(i, i) > m.at(start, start)) start = i;
  v[start] = 1.0;
  // Mild off-axis component so an exactly orthogonal start cannot stall.
  for (std::size_t i = 0; i < d; ++i) v[i] += 1e-3 / static_cast<double>(i + 1);

  std::vector<double> w(d);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += m.at(i, j) * v[j];
      w[i] = s;
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    require(norm > 0.0, errc::zero_variance, "power iteration on zero matrix");
    double delta = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      w[i] /= norm;
      delta = std::max(delta, std::abs(std::abs(w[i]) - std::abs(v[i])));
    }
    v.swap(w);
    if (delta < tol) break;
  }
  return v;
}

}  // namespace ace

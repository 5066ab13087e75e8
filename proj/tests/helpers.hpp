#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ace/rng.hpp"
#include "ace/types.hpp"

namespace test_helpers {

/// K Gaussian blobs (unit variance per axis) on a simplex-ish layout with the
/// requested center separation. Labels follow generation order round-robin.
inline std::pair<ace::embedding_matrix, ace::partition> make_blobs(std::size_t n, std::size_t d,
                                                                   std::size_t k,
                                                                   double separation,
                                                                   ace::counter_rng rng) {
  std::vector<double> values(n * d);
  std::vector<long long> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i % k;
    labels[i] = static_cast<long long>(c);
    for (std::size_t j = 0; j < d; ++j) {
      double center = (j == c % d) ? separation * static_cast<double>(1 + c / d) : 0.0;
      values[i * d + j] = center + rng.normal();
    }
  }
  return {ace::embedding_matrix(n, d, std::move(values)), ace::partition::canonicalize(labels)};
}

inline ace::partition shuffled_labels(const ace::partition& p, ace::counter_rng rng) {
  std::vector<long long> labels(p.labels().begin(), p.labels().end());
  for (std::size_t i = labels.size(); i > 1; --i)
    std::swap(labels[i - 1], labels[rng.below(i)]);
  return ace::partition::canonicalize(labels);
}

/// Applies a fixed rigid motion: successive plane rotations plus a shift.
inline ace::embedding_matrix rigid_motion(const ace::embedding_matrix& z, double angle,
                                          double shift) {
  std::vector<double> v(z.values());
  std::size_t d = z.cols();
  double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t a = 0; a + 1 < d; ++a) {
      double& x = v[i * d + a];
      double& y = v[i * d + a + 1];
      double nx = c * x - s * y;
      double ny = s * x + c * y;
      x = nx;
      y = ny;
    }
    for (std::size_t a = 0; a < d; ++a) v[i * d + a] += shift * static_cast<double>(a + 1);
  }
  return ace::embedding_matrix(z.rows(), d, std::move(v));
}

/// Joint permutation of observation rows and labels.
inline std::pair<ace::embedding_matrix, ace::partition> permute_observations(
    const ace::embedding_matrix& z, const ace::partition& p, ace::counter_rng rng) {
  std::size_t n = z.rows();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<double> v(n * z.cols());
  std::vector<long long> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) v[i * z.cols() + j] = z(perm[i], j);
    labels[i] = static_cast<long long>(p.label(perm[i]));
  }
  return {ace::embedding_matrix(n, z.cols(), std::move(v)), ace::partition::canonicalize(labels)};
}

}  // namespace test_helpers

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ace/error.hpp"
#include "ace/types.hpp"

namespace ace {

/// Joint label counts between two partitions.
struct contingency_table {
  std::size_t ka = 0, kb = 0;
  std::size_t n = 0;
  std::vector<std::size_t> counts;  // ka * kb

  std::size_t at(std::size_t i, std::size_t j) const { return counts[i * kb + j]; }
};

inline contingency_table make_contingency(const partition& a, const partition& b) {
  require(a.size() == b.size(), errc::length_mismatch, "partitions have different lengths");
  contingency_table t;
  t.ka = a.k();
  t.kb = b.k();
  t.n = a.size();
  t.counts.assign(t.ka * t.kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) ++t.counts[a.label(i) * t.kb + b.label(i)];
  return t;
}

/// Normalized mutual information, 2 I(A;B) / (H(A) + H(B)), natural logs.
/// When both entropies vanish the partitions are single-cluster on both
/// sides, hence identical up to relabeling; returns 1 by convention.
inline double nmi(const partition& a, const partition& b) {
  contingency_table t = make_contingency(a, b);
  double n = static_cast<double>(t.n);

  std::vector<std::size_t> row(t.ka, 0), col(t.kb, 0);
  for (std::size_t i = 0; i < t.ka; ++i)
    for (std::size_t j = 0; j < t.kb; ++j) {
      row[i] += t.at(i, j);
      col[j] += t.at(i, j);
    }
  auto entropy = [&](const std::vector<std::size_t>& counts) {
    double h = 0.0;
    for (std::size_t c : counts) {
      if (c == 0) continue;
      double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  double ha = entropy(row), hb = entropy(col);
  if (ha + hb == 0.0) return 1.0;

  double mi = 0.0;
  for (std::size_t i = 0; i < t.ka; ++i)
    for (std::size_t j = 0; j < t.kb; ++j) {
      std::size_t c = t.at(i, j);
      if (c == 0) continue;
      double pij = static_cast<double>(c) / n;
      mi += pij * std::log(n * static_cast<double>(c) /
                           (static_cast<double>(row[i]) * static_cast<double>(col[j])));
    }
  return 2.0 * mi / (ha + hb);
}

namespace detail {

/// Min-cost injection of rows into columns (rows <= cols) via the potentials
/// form of the Hungarian method. Returns per-column assigned row or npos.
inline std::vector<std::size_t> hungarian_min(const std::vector<double>& cost, std::size_t rows,
                                              std::size_t cols) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> match(cols + 1, none), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    match[0] = i - 1;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<bool> used(cols + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = match[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 * cols + (j - 1)] - u[i0 + 1] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j] + 1] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != none);
    do {
      std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return {match.begin() + 1, match.end()};
}

}  // namespace detail

/// Fraction of observations matched under the best one-to-one alignment of
/// cluster labels, found by optimal assignment on the contingency table.
inline double clustering_accuracy(const partition& truth, const partition& pred) {
  contingency_table t = make_contingency(truth, pred);
  // Orient so rows are the smaller side; the assignment is an injection.
  bool transpose = t.ka > t.kb;
  std::size_t rows = transpose ? t.kb : t.ka;
  std::size_t cols = transpose ? t.ka : t.kb;
  std::vector<double> cost(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      cost[i * cols + j] = -static_cast<double>(transpose ? t.at(j, i) : t.at(i, j));

  std::vector<std::size_t> by_col = detail::hungarian_min(cost, rows, cols);
  double matched = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    if (by_col[j] == static_cast<std::size_t>(-1)) continue;
    matched += static_cast<double>(transpose ? t.at(j, by_col[j]) : t.at(by_col[j], j));
  }
  return matched / static_cast<double>(t.n);
}

}  // namespace ace

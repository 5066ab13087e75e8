#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ace/error.hpp"
#include "ace/indices.hpp"
#include "ace/stats.hpp"

namespace ace {

/// Undirected graph over one subgroup: vertices are space indices, kept edges
/// carry the (positive) rank correlation, zero means no edge.
struct correlation_graph {
  std::vector<std::size_t> vertices;  // original space indices
  std::vector<double> weights;        // v x v adjacency, 0 = no edge
  std::vector<double> p_values;       // v x v one-sided p-values (diagonal 1)

  std::size_t order() const { return vertices.size(); }
  double weight(std::size_t i, std::size_t j) const { return weights[i * order() + j]; }
};

/// Keeps edge (m, m') iff the one-sided Spearman test rejects the
/// non-positive null under Holm-Bonferroni at `alpha` and the correlation is
/// positive. `n_samples` is the number of scored partitions behind each
/// correlation.
inline correlation_graph build_graph(const std::vector<double>& corr,
                                     const std::vector<std::size_t>& members,
                                     std::size_t corr_stride, std::size_t n_samples,
                                     double alpha) {
  require(alpha > 0.0 && alpha < 1.0, errc::invalid_alpha, "alpha must lie in (0,1)");
  std::size_t v = members.size();
  correlation_graph g;
  g.vertices = members;
  g.weights.assign(v * v, 0.0);
  g.p_values.assign(v * v, 1.0);

  struct pair_ref {
    std::size_t a, b;
    double r;
  };
  std::vector<pair_ref> pairs;
  std::vector<double> pvals;
  for (std::size_t a = 0; a < v; ++a) {
    for (std::size_t b = a + 1; b < v; ++b) {
      double r = corr[members[a] * corr_stride + members[b]];
      if (std::isnan(r)) continue;  // undefined correlation: never an edge
      double p;
      if (r >= 1.0)
        p = 0.0;
      else if (r <= -1.0)
        p = 1.0;
      else if (n_samples < 3)
        p = 1.0;  // no degrees of freedom to reject with
      else
        p = spearman_onesided_pvalue(r, n_samples);
      g.p_values[a * v + b] = g.p_values[b * v + a] = p;
      pairs.push_back({a, b, r});
      pvals.push_back(p);
    }
  }
  if (!pairs.empty()) {
    std::vector<bool> reject = holm_bonferroni(pvals, alpha);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!reject[i] || pairs[i].r <= 0.0) continue;
      g.weights[pairs[i].a * v + pairs[i].b] = pairs[i].r;
      g.weights[pairs[i].b * v + pairs[i].a] = pairs[i].r;
    }
  }
  return g;
}

/// Per-vertex ratings, non-negative, summing to one.
struct link_weights {
  std::vector<double> w;
};

/// PageRank on the row-normalized weighted adjacency with uniform jumps.
/// Vertices without kept edges get uniform transition rows.
inline link_weights pagerank(const correlation_graph& g, double damping = 0.85,
                             double tol = 1e-10) {
  require(damping > 0.0 && damping < 1.0, errc::invalid_params, "damping must lie in (0,1)");
  std::size_t v = g.order();
  require(v >= 1, errc::invalid_params, "graph has no vertices");
  if (v == 1) return {{1.0}};

  std::vector<double> transition(v * v);
  for (std::size_t i = 0; i < v; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) row_sum += g.weight(i, j);
    for (std::size_t j = 0; j < v; ++j)
      transition[i * v + j] =
          row_sum > 0.0 ? g.weight(i, j) / row_sum : 1.0 / static_cast<double>(v);
  }
  std::vector<double> rank(v, 1.0 / static_cast<double>(v)), next(v);
  double jump = (1.0 - damping) / static_cast<double>(v);
  for (int it = 0; it < 10000; ++it) {
    for (std::size_t j = 0; j < v; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < v; ++i) s += transition[i * v + j] * rank[i];
      next[j] = damping * s + jump;
    }
    double delta = 0.0;
    for (std::size_t j = 0; j < v; ++j) delta = std::max(delta, std::abs(next[j] - rank[j]));
    rank.swap(next);
    if (delta < tol) {
      double total = 0.0;
      for (double x : rank) total += x;
      for (double& x : rank) x /= total;
      return {rank};
    }
  }
  fail(errc::non_convergence, "pagerank did not converge");
}

/// HITS authority scores via alternating updates with L1 normalization; on
/// non-convergence the weights fall back to uniform.
inline link_weights hits_authority(const correlation_graph& g, double tol = 1e-10) {
  std::size_t v = g.order();
  require(v >= 1, errc::invalid_params, "graph has no vertices");
  if (v == 1) return {{1.0}};

  std::vector<double> auth(v, 1.0 / static_cast<double>(v)), hub(v), next(v);
  auto normalize_l1 = [](std::vector<double>& x) {
    double s = 0.0;
    for (double t : x) s += t;
    if (s <= 0.0) return false;
    for (double& t : x) t /= s;
    return true;
  };
  for (int it = 0; it < 10000; ++it) {
    for (std::size_t i = 0; i < v; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v; ++j) s += g.weight(i, j) * auth[j];
      hub[i] = s;
    }
    if (!normalize_l1(hub)) break;  // empty edge set
    for (std::size_t i = 0; i < v; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v; ++j) s += g.weight(j, i) * hub[j];
      next[i] = s;
    }
    if (!normalize_l1(next)) break;
    double delta = 0.0;
    for (std::size_t i = 0; i < v; ++i) delta = std::max(delta, std::abs(next[i] - auth[i]));
    auth = next;
    if (delta < tol) return {auth};
  }
  return {std::vector<double>(v, 1.0 / static_cast<double>(v))};
}

/// pi(rho_j | G) = sum over subgroup members of w_m * pi(rho_j | Z_m).
/// Missing cells drop out with the member weights renormalized per column;
/// a column missing everywhere stays NaN.
inline std::vector<double> aggregate_scores(const score_matrix& scores,
                                            const std::vector<std::size_t>& subgroup,
                                            const link_weights& weights) {
  require(!subgroup.empty(), errc::empty_subgroup, "cannot aggregate an empty subgroup");
  require(weights.w.size() == subgroup.size(), errc::shape_mismatch,
          "one weight per subgroup member required");
  std::vector<double> out(scores.m, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < scores.m; ++j) {
    double total_w = 0.0, acc = 0.0;
    for (std::size_t t = 0; t < subgroup.size(); ++t) {
      double v = scores.at(subgroup[t], j);
      if (std::isnan(v)) continue;
      total_w += weights.w[t];
      acc += weights.w[t] * v;
    }
    if (total_w > 0.0) out[j] = acc / total_w;
  }
  return out;
}

}  // namespace ace

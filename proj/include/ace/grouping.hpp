#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "ace/error.hpp"
#include "ace/indices.hpp"

namespace ace {

/// Symmetric pairwise distances with zero diagonal.
struct distance_matrix {
  std::size_t size = 0;
  std::vector<double> d;

  explicit distance_matrix(std::size_t m) : size(m), d(m * m, 0.0) {}

  double at(std::size_t i, std::size_t j) const { return d[i * size + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    require(std::isfinite(v) && v >= 0.0, errc::invalid_params, "distances must be finite and >= 0");
    d[i * size + j] = v;
    d[j * size + i] = v;
  }
};

inline constexpr std::size_t outlier_label = static_cast<std::size_t>(-1);

/// Subgroup assignment over space indices; `outlier_label` marks spaces no
/// density cluster claimed.
struct grouping {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<std::size_t>> subgroups;

  /// Sorts members and orders subgroups by smallest member, rebuilding ids.
  void normalize() {
    for (auto& g : subgroups) std::sort(g.begin(), g.end());
    std::sort(subgroups.begin(), subgroups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (std::size_t s = 0; s < subgroups.size(); ++s)
      for (std::size_t i : subgroups[s]) assignment[i] = s;
  }
};

/// Classic density reachability on a precomputed distance matrix. A point is
/// core when at least min_pts points (itself included) lie within eps.
/// Border points attach to their nearest core neighbor's cluster.
inline grouping dbscan(const distance_matrix& d, double eps, std::size_t min_pts) {
  require(eps > 0.0, errc::invalid_params, "eps must be positive");
  require(min_pts >= 1, errc::invalid_params, "min_pts must be >= 1");
  std::size_t m = d.size;

  std::vector<bool> core(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t neighbors = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (d.at(i, j) <= eps) ++neighbors;
    core[i] = neighbors >= min_pts;
  }

  grouping g;
  g.assignment.assign(m, outlier_label);
  for (std::size_t i = 0; i < m; ++i) {
    if (!core[i] || g.assignment[i] != outlier_label) continue;
    std::vector<std::size_t> stack = {i};
    std::vector<std::size_t> members;
    g.assignment[i] = g.subgroups.size();
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (std::size_t v = 0; v < m; ++v) {
        if (!core[v] || g.assignment[v] != outlier_label || d.at(u, v) > eps) continue;
        g.assignment[v] = g.assignment[i];
        stack.push_back(v);
      }
    }
    g.subgroups.push_back(std::move(members));
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (core[i] || g.assignment[i] != outlier_label) continue;
    std::size_t best = outlier_label;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (!core[j] || d.at(i, j) > eps) continue;
      if (d.at(i, j) < best_d) {
        best_d = d.at(i, j);
        best = j;
      }
    }
    if (best != outlier_label) {
      g.assignment[i] = g.assignment[best];
      g.subgroups[g.assignment[i]].push_back(i);
    }
  }
  g.normalize();
  return g;
}

namespace detail {

struct dendro_node {
  std::size_t left, right;  // child node ids (leaves are 0..m-1)
  double dist;
  std::size_t size;
};

struct condensed_cluster {
  double birth_lambda = 0.0;
  double stability = 0.0;
  std::vector<std::pair<std::size_t, double>> falls;  // (point, lambda it left at)
  std::vector<std::size_t> children;                  // condensed child cluster ids
};

inline double lambda_of(double dist) { return 1.0 / std::max(dist, 1e-300); }

}  // namespace detail

/// HDBSCAN on a precomputed distance matrix: mutual-reachability distances,
/// single-linkage tree, condensed hierarchy at min_cluster_size, and
/// excess-of-mass extraction (the root may be selected).
inline grouping hdbscan(const distance_matrix& d, std::size_t min_cluster_size,
                        std::size_t min_samples) {
  require(min_cluster_size >= 2, errc::invalid_params, "min_cluster_size must be >= 2");
  require(min_samples >= 1, errc::invalid_params, "min_samples must be >= 1");
  std::size_t m = d.size;
  require(m >= 2, errc::invalid_params, "need at least 2 spaces");

  // Core distance: distance to the min_samples-th nearest neighbor counting
  // the point itself (clamped to the farthest when there are too few).
  std::vector<double> core(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row;
    row.reserve(m);
    for (std::size_t j = 0; j < m; ++j) row.push_back(d.at(i, j));
    std::sort(row.begin(), row.end());
    core[i] = row[std::min(min_samples, row.size()) - 1];
  }
  auto mreach = [&](std::size_t i, std::size_t j) {
    return std::max({core[i], core[j], d.at(i, j)});
  };

  // Prim MST over the complete mutual-reachability graph.
  std::vector<bool> in_tree(m, false);
  std::vector<double> best(m, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(m, 0);
  struct edge {
    double w;
    std::size_t a, b;
  };
  std::vector<edge> edges;
  in_tree[0] = true;
  for (std::size_t j = 1; j < m; ++j) {
    best[j] = mreach(0, j);
    from[j] = 0;
  }
  for (std::size_t step = 1; step < m; ++step) {
    std::size_t pick = outlier_label;
    for (std::size_t j = 0; j < m; ++j)
      if (!in_tree[j] && (pick == outlier_label || best[j] < best[pick])) pick = j;
    in_tree[pick] = true;
    edges.push_back({best[pick], from[pick], pick});
    for (std::size_t j = 0; j < m; ++j) {
      if (in_tree[j]) continue;
      double w = mreach(pick, j);
      if (w < best[j]) {
        best[j] = w;
        from[j] = pick;
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const edge& x, const edge& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  // Single-linkage dendrogram via union-find over sorted edges.
  std::vector<std::size_t> uf(2 * m - 1), node_of(2 * m - 1);
  std::iota(uf.begin(), uf.end(), 0);
  std::iota(node_of.begin(), node_of.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  std::vector<detail::dendro_node> nodes(2 * m - 1, {0, 0, 0.0, 1});
  std::size_t next = m;
  for (const auto& e : edges) {
    std::size_t ra = find(e.a), rb = find(e.b);
    std::size_t na = node_of[ra], nb = node_of[rb];
    nodes[next] = {na, nb, e.w, nodes[na].size + nodes[nb].size};
    uf[ra] = rb;
    node_of[find(rb)] = next;
    ++next;
  }
  std::size_t root = 2 * m - 2;

  grouping g;
  g.assignment.assign(m, outlier_label);
  if (m < min_cluster_size) return g;  // nothing can form a cluster

  // Condensed hierarchy: walk splits top-down; sides smaller than
  // min_cluster_size fall out of the running cluster at the split lambda.
  std::vector<detail::condensed_cluster> clusters(1);
  std::function<void(std::size_t, std::size_t)> condense = [&](std::size_t node,
                                                               std::size_t cid) {
    const auto& nd = nodes[node];
    double lam = detail::lambda_of(nd.dist);
    std::size_t szl = nd.left < m ? 1 : nodes[nd.left].size;
    std::size_t szr = nd.right < m ? 1 : nodes[nd.right].size;
    auto spill = [&](std::size_t sub) {
      std::vector<std::size_t> stack = {sub};
      while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        if (u < m)
          clusters[cid].falls.emplace_back(u, lam);
        else {
          stack.push_back(nodes[u].left);
          stack.push_back(nodes[u].right);
        }
      }
    };
    if (szl >= min_cluster_size && szr >= min_cluster_size) {
      clusters[cid].stability +=
          static_cast<double>(szl + szr) * (lam - clusters[cid].birth_lambda);
      std::size_t c1 = clusters.size();
      clusters.push_back({lam, 0.0, {}, {}});
      std::size_t c2 = clusters.size();
      clusters.push_back({lam, 0.0, {}, {}});
      clusters[cid].children = {c1, c2};
      condense(nd.left, c1);
      condense(nd.right, c2);
    } else if (szl >= min_cluster_size || szr >= min_cluster_size) {
      clusters[cid].stability +=
          static_cast<double>(std::min(szl, szr)) * (lam - clusters[cid].birth_lambda);
      spill(szl >= min_cluster_size ? nd.right : nd.left);
      condense(szl >= min_cluster_size ? nd.left : nd.right, cid);
    } else {
      clusters[cid].stability +=
          static_cast<double>(szl + szr) * (lam - clusters[cid].birth_lambda);
      spill(nd.left);
      spill(nd.right);
    }
  };
  condense(root, 0);

  // Excess-of-mass: keep a cluster when its own stability is at least the
  // best total among its children.
  std::vector<double> best_mass(clusters.size(), 0.0);
  std::function<double(std::size_t)> mass = [&](std::size_t c) -> double {
    double child_sum = 0.0;
    for (std::size_t ch : clusters[c].children) child_sum += mass(ch);
    best_mass[c] = std::max(clusters[c].stability, child_sum);
    return best_mass[c];
  };
  mass(0);
  std::function<void(std::size_t)> select = [&](std::size_t c) {
    double child_sum = 0.0;
    for (std::size_t ch : clusters[c].children) child_sum += best_mass[ch];
    if (!clusters[c].children.empty() && clusters[c].stability < child_sum) {
      for (std::size_t ch : clusters[c].children) select(ch);
      return;
    }
    std::vector<std::size_t> members;
    if (c == 0) {
      // Lone root cluster: points are members only from the last level the
      // cluster actually persisted at (everything earlier is noise). When
      // nothing at all is excluded there is no density contrast; keep the
      // group only in the degenerate coincident case (unbounded lambda),
      // otherwise report all points as noise.
      double threshold = 0.0;
      for (const auto& [p, lam] : clusters[c].falls) threshold = std::max(threshold, lam);
      for (std::size_t ch : clusters[c].children)
        threshold = std::max(threshold, clusters[ch].birth_lambda);
      for (const auto& [p, lam] : clusters[c].falls)
        if (lam >= threshold * (1.0 - 1e-9)) members.push_back(p);
    } else {
      std::vector<std::size_t> stack = {c};
      while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        for (const auto& [p, lam] : clusters[u].falls) members.push_back(p);
        for (std::size_t ch : clusters[u].children) stack.push_back(ch);
      }
    }
    if (members.empty()) return;
    for (std::size_t p : members) g.assignment[p] = g.subgroups.size();
    g.subgroups.push_back(std::move(members));
  };
  select(0);
  g.normalize();
  return g;
}

enum class grouping_method { dbscan, hdbscan };

struct grouping_params {
  grouping_method method = grouping_method::hdbscan;
  // phase-1 parameters
  double dbscan_eps = 0.1;
  std::size_t dbscan_min_pts = 2;
  std::size_t hdbscan_min_cluster_size = 2;
  std::size_t hdbscan_min_samples = 2;
};

/// Stage-wise grouping output; phase-1 outliers are preserved for the
/// rescue variant.
struct stagewise_result {
  grouping final;                    // mutually exclusive subgroups over all spaces
  std::vector<bool> phase1_outlier;  // spaces treated as rank-uncorrelated
};

/// Two-phase grouping: phase 1 clusters spaces on 1 - rank correlation;
/// phase 2 re-clusters each group on RMS distance between oriented score
/// rows. Outliers from either phase become singleton subgroups.
inline stagewise_result stagewise_group(const std::vector<double>& corr, std::size_t m,
                                        const score_matrix& scores,
                                        const grouping_params& params = {}) {
  require(corr.size() == m * m, errc::shape_mismatch, "correlation matrix shape");
  require(scores.m >= m, errc::shape_mismatch, "score matrix rows do not cover spaces");

  auto run_method = [&](const distance_matrix& d, double eps, std::size_t min_pts,
                        std::size_t mcs, std::size_t ms) {
    return params.method == grouping_method::dbscan ? dbscan(d, eps, min_pts)
                                                    : hdbscan(d, mcs, ms);
  };

  stagewise_result out;
  out.phase1_outlier.assign(m, false);
  out.final.assignment.assign(m, outlier_label);

  grouping phase1;
  if (m == 1) {
    phase1.assignment = {0};
    phase1.subgroups = {{0}};
  } else {
    distance_matrix d1(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        double c = corr[i * m + j];
        d1.set(i, j, std::isnan(c) ? 1.0 : std::max(0.0, 1.0 - c));
      }
    phase1 = run_method(d1, params.dbscan_eps, params.dbscan_min_pts,
                        params.hdbscan_min_cluster_size, params.hdbscan_min_samples);

    // A grouped space with no positive correlation to any group mate is a
    // rank-uncorrelated space; demote it to outlier.
    for (auto& group : phase1.subgroups) {
      std::vector<std::size_t> kept;
      for (std::size_t i : group) {
        double best = -1.0;
        for (std::size_t j : group)
          if (j != i) best = std::max(best, corr[i * m + j]);
        if (best > 0.0)
          kept.push_back(i);
        else
          phase1.assignment[i] = outlier_label;
      }
      group = std::move(kept);
    }
    std::erase_if(phase1.subgroups, [](const auto& g) { return g.empty(); });
  }
  for (std::size_t i = 0; i < m; ++i)
    if (phase1.assignment[i] == outlier_label) out.phase1_outlier[i] = true;

  // Phase-2 distance: RMS gap between oriented score rows over shared
  // non-missing columns.
  auto phase2_dist = [&](std::size_t a, std::size_t b) -> double {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < scores.m; ++j) {
      double va = scores.at(a, j), vb = scores.at(b, j);
      if (std::isnan(va) || std::isnan(vb)) continue;
      sum += (va - vb) * (va - vb);
      ++count;
    }
    if (count == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(sum / static_cast<double>(count));
  };

  for (const auto& group : phase1.subgroups) {
    if (group.size() == 1) {
      out.final.subgroups.push_back(group);
      continue;
    }
    std::size_t gsz = group.size();
    distance_matrix d2(gsz);
    double max_dist = 0.0;
    bool any_missing = false;
    for (std::size_t a = 0; a < gsz; ++a)
      for (std::size_t b = a + 1; b < gsz; ++b) {
        double v = phase2_dist(group[a], group[b]);
        if (std::isnan(v))
          any_missing = true;
        else
          max_dist = std::max(max_dist, v);
      }
    for (std::size_t a = 0; a < gsz; ++a)
      for (std::size_t b = a + 1; b < gsz; ++b) {
        double v = phase2_dist(group[a], group[b]);
        d2.set(a, b, std::isnan(v) ? 2.0 * max_dist + 1.0 : v);
      }

    if (max_dist == 0.0 && !any_missing) {  // identical score rows
      out.final.subgroups.push_back(group);
      continue;
    }
    grouping phase2 = run_method(d2, 0.25 * std::max(max_dist, 1e-300), 2,
                                 params.hdbscan_min_cluster_size, params.hdbscan_min_samples);
    for (const auto& sub : phase2.subgroups) {
      std::vector<std::size_t> mapped;
      mapped.reserve(sub.size());
      for (std::size_t local : sub) mapped.push_back(group[local]);
      out.final.subgroups.push_back(std::move(mapped));
    }
    for (std::size_t local = 0; local < gsz; ++local)
      if (phase2.assignment[local] == outlier_label)
        out.final.subgroups.push_back({group[local]});
  }
  for (std::size_t i = 0; i < m; ++i)
    if (out.phase1_outlier[i]) out.final.subgroups.push_back({i});

  out.final.normalize();
  return out;
}

}  // namespace ace

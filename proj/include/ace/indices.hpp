#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <charconv>
#include <string_view>
#include <vector>

#include "ace/error.hpp"
#include "ace/linalg.hpp"
#include "ace/types.hpp"
#include "ace/util.hpp"

namespace ace {

enum class index_id {
  silhouette_euclidean,
  silhouette_cosine,
  calinski_harabasz,
  davies_bouldin,
  dunn,
  cindex,
  ccc,
  sdbw,
  cdbw,
};

enum class orientation { higher_better, lower_better };

inline constexpr index_id all_index_ids[] = {
    index_id::silhouette_euclidean, index_id::silhouette_cosine, index_id::calinski_harabasz,
    index_id::davies_bouldin,       index_id::dunn,              index_id::cindex,
    index_id::ccc,                  index_id::sdbw,              index_id::cdbw,
};

inline orientation index_orientation(index_id id) {
  switch (id) {
    case index_id::davies_bouldin:
    case index_id::cindex:
    case index_id::sdbw:
      return orientation::lower_better;
    default:
      return orientation::higher_better;
  }
}

inline std::string_view index_name(index_id id) {
  switch (id) {
    case index_id::silhouette_euclidean: return "silhouette_euclidean";
    case index_id::silhouette_cosine: return "silhouette_cosine";
    case index_id::calinski_harabasz: return "calinski_harabasz";
    case index_id::davies_bouldin: return "davies_bouldin";
    case index_id::dunn: return "dunn";
    case index_id::cindex: return "cindex";
    case index_id::ccc: return "ccc";
    case index_id::sdbw: return "sdbw";
    case index_id::cdbw: return "cdbw";
  }
  return "?";
}

inline std::optional<index_id> index_from_name(std::string_view name) {
  for (index_id id : all_index_ids)
    if (index_name(id) == name) return id;
  return std::nullopt;
}

/// Raw index value plus its pipeline orientation (negated for lower-is-better
/// indices so that larger always means better downstream).
struct index_value {
  double raw = 0.0;
  double oriented = 0.0;
};

inline index_value make_index_value(index_id id, double raw) {
  return {raw, index_orientation(id) == orientation::lower_better ? -raw : raw};
}

enum class metric { euclidean, cosine };

namespace detail {

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  require(na > 0.0 && nb > 0.0, errc::non_finite_value,
          "cosine distance undefined for zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double point_distance(const embedding_matrix& z, std::size_t i, std::size_t j, metric m) {
  return m == metric::euclidean ? euclidean(z.row(i), z.row(j)) : cosine_distance(z.row(i), z.row(j));
}

inline void require_k_range(const partition& rho) {
  require(rho.k() >= 2 && rho.k() <= rho.size() - 1, errc::degenerate_k,
          "index needs 2 <= K <= n-1, got K=" + std::to_string(rho.k()));
}

inline void require_k_min2(const partition& rho) {
  require(rho.k() >= 2, errc::degenerate_k, "index needs K >= 2, got K=" + std::to_string(rho.k()));
}

inline std::vector<std::vector<double>> barycenters(const embedding_matrix& z,
                                                    const partition& rho) {
  std::vector<std::vector<double>> mu(rho.k(), std::vector<double>(z.cols(), 0.0));
  std::vector<std::size_t> sizes = rho.cluster_sizes();
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    auto& m = mu[rho.label(i)];
    for (std::size_t j = 0; j < z.cols(); ++j) m[j] += row[j];
  }
  for (std::size_t k = 0; k < rho.k(); ++k)
    for (double& v : mu[k]) v /= static_cast<double>(sizes[k]);
  return mu;
}

/// Per-dimension sample variance of a cluster; zero vector for singletons.
inline std::vector<double> cluster_variance_diag(const embedding_matrix& z,
                                                 const std::vector<std::size_t>& members) {
  std::vector<double> var(z.cols(), 0.0);
  if (members.size() < 2) return var;
  std::vector<double> mean(z.cols(), 0.0);
  for (std::size_t i : members) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(members.size());
  for (std::size_t i : members) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) {
      double d = row[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(members.size() - 1);
  return var;
}

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

inline index_value silhouette(const embedding_matrix& z, const partition& rho,
                              metric m = metric::euclidean) {
  detail::require_k_range(rho);
  std::size_t n = z.rows(), k = rho.k();
  std::vector<std::size_t> sizes = rho.cluster_sizes();
  std::vector<double> cluster_sum(k, 0.0);
  std::vector<double> dist_to_cluster(k);

  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist_to_cluster.begin(), dist_to_cluster.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist_to_cluster[rho.label(j)] += detail::point_distance(z, i, j, m);
    }
    std::size_t ci = rho.label(i);
    double s = 0.0;
    if (sizes[ci] > 1) {
      double a = dist_to_cluster[ci] / static_cast<double>(sizes[ci] - 1);
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        if (c == ci) continue;
        b = std::min(b, dist_to_cluster[c] / static_cast<double>(sizes[c]));
      }
      double denom = std::max(a, b);
      s = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    cluster_sum[ci] += s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) total += cluster_sum[c] / static_cast<double>(sizes[c]);
  return make_index_value(m == metric::euclidean ? index_id::silhouette_euclidean
                                                 : index_id::silhouette_cosine,
                          total / static_cast<double>(k));
}

inline index_value calinski_harabasz(const embedding_matrix& z, const partition& rho) {
  detail::require_k_range(rho);
  std::size_t n = z.rows(), k = rho.k();
  auto mu = detail::barycenters(z, rho);
  std::vector<double> grand = column_means(z);
  std::vector<std::size_t> sizes = rho.cluster_sizes();

  double wgss = 0.0;
  for (std::size_t i = 0; i < n; ++i) wgss += sq_dist(z.row(i), mu[rho.label(i)]);
  require(wgss > 0.0, errc::zero_within_dispersion, "within-cluster dispersion is zero");

  double bgss = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    bgss += static_cast<double>(sizes[c]) * sq_dist(mu[c], grand);

  double raw = (bgss / static_cast<double>(k - 1)) / (wgss / static_cast<double>(n - k));
  return make_index_value(index_id::calinski_harabasz, raw);
}

inline index_value davies_bouldin(const embedding_matrix& z, const partition& rho) {
  detail::require_k_min2(rho);
  std::size_t k = rho.k();
  auto mu = detail::barycenters(z, rho);
  std::vector<std::size_t> sizes = rho.cluster_sizes();

  std::vector<double> delta(k, 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i)
    delta[rho.label(i)] += euclidean(z.row(i), mu[rho.label(i)]);
  for (std::size_t c = 0; c < k; ++c) delta[c] /= static_cast<double>(sizes[c]);

  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double worst = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      double gap = euclidean(mu[a], mu[b]);
      require(gap > 0.0, errc::coincident_centroids, "coincident cluster barycenters");
      worst = std::max(worst, (delta[a] + delta[b]) / gap);
    }
    total += worst;
  }
  return make_index_value(index_id::davies_bouldin, total / static_cast<double>(k));
}

inline index_value dunn(const embedding_matrix& z, const partition& rho) {
  detail::require_k_min2(rho);
  std::size_t n = z.rows();
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = euclidean(z.row(i), z.row(j));
      if (rho.label(i) == rho.label(j))
        d_max = std::max(d_max, d);
      else
        d_min = std::min(d_min, d);
    }
  }
  require(d_max > 0.0, errc::zero_diameter, "no within-cluster pair at positive distance");
  return make_index_value(index_id::dunn, d_min / d_max);
}

inline index_value cindex(const embedding_matrix& z, const partition& rho) {
  detail::require_k_min2(rho);
  std::size_t n = z.rows();
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  double s_w = 0.0;
  std::size_t n_w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = euclidean(z.row(i), z.row(j));
      dists.push_back(d);
      if (rho.label(i) == rho.label(j)) {
        s_w += d;
        ++n_w;
      }
    }
  }
  require(n_w >= 1, errc::degenerate_distances, "no within-cluster pairs");
  std::sort(dists.begin(), dists.end());
  double s_min = 0.0, s_max = 0.0;
  for (std::size_t i = 0; i < n_w; ++i) {
    s_min += dists[i];
    s_max += dists[dists.size() - 1 - i];
  }
  require(s_max > s_min, errc::degenerate_distances, "all pairwise distances equal");
  return make_index_value(index_id::cindex, (s_w - s_min) / (s_max - s_min));
}

inline index_value ccc(const embedding_matrix& z, const partition& rho) {
  detail::require_k_min2(rho);
  std::size_t n = z.rows(), p = z.cols(), q = rho.k();
  std::vector<double> grand = column_means(z);

  // T = X'X on centered data; trace(T) is the total sum of squares.
  sym_matrix t(p);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = z.row(i);
    for (std::size_t a = 0; a < p; ++a) {
      double da = row[a] - grand[a];
      for (std::size_t b = a; b < p; ++b) t.at(a, b) += da * (row[b] - grand[b]);
    }
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) t.at(b, a) = t.at(a, b);
  double trace_t = 0.0;
  for (std::size_t a = 0; a < p; ++a) trace_t += t.at(a, a);
  require(trace_t > 0.0, errc::singular_total_scatter, "total scatter matrix has zero trace");

  auto mu = detail::barycenters(z, rho);
  double wgss = 0.0;
  for (std::size_t i = 0; i < n; ++i) wgss += sq_dist(z.row(i), mu[rho.label(i)]);
  double r2 = 1.0 - wgss / trace_t;
  require(r2 < 1.0, errc::singular_total_scatter, "observed R^2 is 1");

  sym_matrix scaled = t;
  for (double& v : scaled.a) v /= static_cast<double>(n - 1);
  std::vector<double> eig = jacobi_eigenvalues(std::move(scaled), 1e-12);
  std::vector<double> s(p);
  for (std::size_t j = 0; j < p; ++j) s[j] = std::sqrt(std::max(eig[j], 0.0));

  // Hyperbox edge search: accept the largest p* whose hypercube count along
  // dimension p* is at least one.
  std::size_t p_star = 0;
  double c = 0.0;
  for (std::size_t cand = p; cand >= 1; --cand) {
    double vol = 1.0;
    for (std::size_t j = 0; j < cand; ++j) vol *= s[j];
    if (vol <= 0.0) continue;
    double cc = std::pow(vol / static_cast<double>(q), 1.0 / static_cast<double>(cand));
    if (cc <= 0.0) continue;
    if (s[cand - 1] / cc >= 1.0) {
      p_star = cand;
      c = cc;
      break;
    }
  }
  require(p_star >= 1, errc::singular_total_scatter, "degenerate hyperbox in expected-R^2 search");

  std::vector<double> u(p);
  for (std::size_t j = 0; j < p; ++j) u[j] = s[j] / c;
  double num = 0.0, den = 0.0;
  double nn = static_cast<double>(n);
  for (std::size_t j = 0; j < p; ++j) {
    if (j < p_star)
      num += 1.0 / (nn + u[j]);
    else
      num += (u[j] * u[j]) / (nn + u[j]);
    den += u[j] * u[j];
  }
  double e_r2 = 1.0 - (num / den) * ((nn - static_cast<double>(q)) * (nn - static_cast<double>(q)) / nn) *
                          (1.0 + 4.0 / nn);
  require(e_r2 < 1.0, errc::singular_total_scatter, "expected R^2 is 1");

  double raw = std::log((1.0 - e_r2) / (1.0 - r2)) *
               std::sqrt(nn * static_cast<double>(p_star) / 2.0) / std::pow(0.001 + e_r2, 1.2);
  return make_index_value(index_id::ccc, raw);
}

inline index_value sdbw(const embedding_matrix& z, const partition& rho) {
  detail::require_k_min2(rho);
  std::size_t k = rho.k();
  auto clusters = rho.clusters();
  auto mu = detail::barycenters(z, rho);

  std::vector<std::size_t> all(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) all[i] = i;
  std::vector<double> v_global = detail::cluster_variance_diag(z, all);
  double norm_global = detail::norm(v_global);
  require(norm_global > 0.0, errc::zero_variance, "dataset variance is zero");

  double sum_norm = 0.0;
  std::vector<std::vector<double>> v_k(k);
  for (std::size_t c = 0; c < k; ++c) {
    v_k[c] = detail::cluster_variance_diag(z, clusters[c]);
    sum_norm += detail::norm(v_k[c]);
  }
  double scatter = (sum_norm / static_cast<double>(k)) / norm_global;
  double sigma = std::sqrt(sum_norm) / static_cast<double>(k);

  // Density: count of points in the two clusters strictly inside the
  // sigma-ball around the probe.
  auto density = [&](std::span<const double> probe, std::size_t a, std::size_t b) {
    std::size_t count = 0;
    for (std::size_t c : {a, b})
      for (std::size_t i : clusters[c])
        if (euclidean(z.row(i), probe) < sigma) ++count;
    return static_cast<double>(count);
  };

  double g = 0.0;
  std::vector<double> mid(z.cols());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      for (std::size_t j = 0; j < z.cols(); ++j) mid[j] = 0.5 * (mu[a][j] + mu[b][j]);
      double denom = std::max(density(mu[a], a, b), density(mu[b], a, b));
      g += denom > 0.0 ? density(mid, a, b) / denom : 0.0;
    }
  }
  g *= 2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
  return make_index_value(index_id::sdbw, scatter + g);
}

struct cdbw_params {
  std::size_t representatives = 10;
  std::vector<double> shrink_factors = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
};

inline index_value cdbw(const embedding_matrix& z, const partition& rho,
                        const cdbw_params& params = {}) {
  detail::require_k_min2(rho);
  require(params.representatives >= 1, errc::invalid_params, "need at least one representative");
  for (double s : params.shrink_factors)
    require(s > 0.0 && s < 1.0, errc::invalid_params, "shrink factors must lie in (0,1)");
  std::size_t k = rho.k();
  auto clusters = rho.clusters();
  for (const auto& c : clusters) require(!c.empty(), errc::empty_cluster, "empty cluster");
  auto mu = detail::barycenters(z, rho);

  // Per-cluster RMS spread around the barycenter; singletons spread 0.
  std::vector<double> spread(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (clusters[c].size() < 2) continue;
    double s = 0.0;
    for (std::size_t i : clusters[c]) s += sq_dist(z.row(i), mu[c]);
    spread[c] = std::sqrt(s / static_cast<double>(clusters[c].size() - 1));
  }
  double stdev_all = 0.0;
  for (double s : spread) stdev_all += s;
  stdev_all /= static_cast<double>(k);

  // Farthest-first representatives, seeded at the point nearest the barycenter.
  std::vector<std::vector<std::size_t>> reps(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& members = clusters[c];
    std::size_t want = std::min(params.representatives, members.size());
    std::size_t seed = members[0];
    double best = sq_dist(z.row(seed), mu[c]);
    for (std::size_t i : members) {
      double d = sq_dist(z.row(i), mu[c]);
      if (d < best) {
        best = d;
        seed = i;
      }
    }
    reps[c].push_back(seed);
    std::vector<double> min_dist(members.size());
    for (std::size_t t = 0; t < members.size(); ++t)
      min_dist[t] = sq_dist(z.row(members[t]), z.row(seed));
    while (reps[c].size() < want) {
      std::size_t far = 0;
      for (std::size_t t = 1; t < members.size(); ++t)
        if (min_dist[t] > min_dist[far]) far = t;
      if (min_dist[far] <= 0.0) break;  // remaining points coincide with chosen reps
      reps[c].push_back(members[far]);
      for (std::size_t t = 0; t < members.size(); ++t)
        min_dist[t] = std::min(min_dist[t], sq_dist(z.row(members[t]), z.row(members[far])));
    }
  }

  // Mutual closest-representative pairs between two clusters; falls back to
  // the single globally closest pair when no relation is mutual.
  auto rcr_pairs = [&](std::size_t a, std::size_t b) {
    auto closest = [&](std::size_t from_rep, std::size_t to_cluster) {
      std::size_t best = reps[to_cluster][0];
      double best_d = sq_dist(z.row(from_rep), z.row(best));
      for (std::size_t r : reps[to_cluster]) {
        double d = sq_dist(z.row(from_rep), z.row(r));
        if (d < best_d) {
          best_d = d;
          best = r;
        }
      }
      return best;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t ra : reps[a])
      if (closest(closest(ra, b), a) == ra) pairs.emplace_back(ra, closest(ra, b));
    if (pairs.empty()) {
      std::size_t best_a = reps[a][0], best_b = reps[b][0];
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t ra : reps[a])
        for (std::size_t rb : reps[b]) {
          double d = sq_dist(z.row(ra), z.row(rb));
          if (d < best_d) {
            best_d = d;
            best_a = ra;
            best_b = rb;
          }
        }
      pairs.emplace_back(best_a, best_b);
    }
    return pairs;
  };

  std::vector<double> dens(k * k, 0.0), dist(k * k, 0.0);
  std::vector<double> mid(z.cols());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      auto pairs = rcr_pairs(a, b);
      double stdev_ab = 0.5 * (spread[a] + spread[b]);
      double dens_ab = 0.0, dist_ab = 0.0;
      for (auto [ra, rb] : pairs) {
        double d = euclidean(z.row(ra), z.row(rb));
        dist_ab += d;
        if (stdev_ab > 0.0) {
          for (std::size_t j = 0; j < z.cols(); ++j) mid[j] = 0.5 * (z(ra, j) + z(rb, j));
          std::size_t count = 0;
          for (std::size_t c : {a, b})
            for (std::size_t i : clusters[c])
              if (euclidean(z.row(i), mid) <= stdev_ab) ++count;
          double card = static_cast<double>(count) /
                        static_cast<double>(clusters[a].size() + clusters[b].size());
          dens_ab += d / (2.0 * stdev_ab) * card;
        }
      }
      double np = static_cast<double>(pairs.size());
      dens[a * k + b] = dens[b * k + a] = dens_ab / np;
      dist[a * k + b] = dist[b * k + a] = dist_ab / np;
    }
  }

  double inter_dens = 0.0, min_dist_sum = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double max_dens = 0.0, min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      max_dens = std::max(max_dens, dens[a * k + b]);
      min_dist = std::min(min_dist, dist[a * k + b]);
    }
    inter_dens += max_dens;
    min_dist_sum += min_dist;
  }
  inter_dens /= static_cast<double>(k);
  double sep = (min_dist_sum / static_cast<double>(k)) / (1.0 + inter_dens);

  // Intra-cluster density across shrink factors.
  std::vector<double> intra(params.shrink_factors.size(), 0.0);
  if (stdev_all > 0.0) {
    std::vector<double> shrunk(z.cols());
    for (std::size_t si = 0; si < params.shrink_factors.size(); ++si) {
      double s = params.shrink_factors[si];
      double dens_cl = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        double cluster_sum = 0.0;
        for (std::size_t r : reps[c]) {
          for (std::size_t j = 0; j < z.cols(); ++j)
            shrunk[j] = (1.0 - s) * z(r, j) + s * mu[c][j];
          std::size_t count = 0;
          for (std::size_t i : clusters[c])
            if (euclidean(z.row(i), shrunk) <= stdev_all) ++count;
          cluster_sum += static_cast<double>(count) / static_cast<double>(clusters[c].size());
        }
        dens_cl += cluster_sum / static_cast<double>(reps[c].size());
      }
      intra[si] = dens_cl / (static_cast<double>(k) * stdev_all);
    }
  }
  double compactness = 0.0;
  for (double v : intra) compactness += v;
  compactness /= static_cast<double>(intra.size());
  double intra_change = 0.0;
  if (intra.size() > 1) {
    for (std::size_t i = 1; i < intra.size(); ++i) intra_change += std::abs(intra[i] - intra[i - 1]);
    intra_change /= static_cast<double>(intra.size() - 1);
  }
  double cohesion = compactness / (1.0 + intra_change);
  double sc = sep * compactness;
  return make_index_value(index_id::cdbw, cohesion * sc);
}

/// Single dispatcher used by the score matrix and CLI.
inline index_value compute_index(const embedding_matrix& z, const partition& rho, index_id id) {
  switch (id) {
    case index_id::silhouette_euclidean: return silhouette(z, rho, metric::euclidean);
    case index_id::silhouette_cosine: return silhouette(z, rho, metric::cosine);
    case index_id::calinski_harabasz: return calinski_harabasz(z, rho);
    case index_id::davies_bouldin: return davies_bouldin(z, rho);
    case index_id::dunn: return dunn(z, rho);
    case index_id::cindex: return cindex(z, rho);
    case index_id::ccc: return ccc(z, rho);
    case index_id::sdbw: return sdbw(z, rho);
    case index_id::cdbw: return cdbw(z, rho);
  }
  fail(errc::invalid_params, "unknown index id");
}

/// M x M grid of oriented scores: entry (m, j) scores partition j inside
/// space m. Failed cells are recorded as missing and skipped downstream.
struct score_matrix {
  index_id index = index_id::silhouette_euclidean;
  std::size_t m = 0;
  std::vector<double> raw;       // NaN where missing
  std::vector<double> oriented;  // NaN where missing
  std::vector<std::string> cell_errors;

  double at(std::size_t space, std::size_t part) const { return oriented[space * m + part]; }
  double raw_at(std::size_t space, std::size_t part) const { return raw[space * m + part]; }
  bool missing(std::size_t space, std::size_t part) const {
    return std::isnan(oriented[space * m + part]);
  }

  std::vector<double> row(std::size_t space) const {
    return std::vector<double>(oriented.begin() + space * m, oriented.begin() + (space + 1) * m);
  }
};

/// M x M CSV of oriented scores, `NA` for missing cells.
inline std::string score_matrix_to_csv(const score_matrix& sm) {
  std::string out;
  char buf[64];
  for (std::size_t a = 0; a < sm.m; ++a) {
    for (std::size_t b = 0; b < sm.m; ++b) {
      if (b) out += ',';
      double v = sm.at(a, b);
      if (std::isnan(v)) {
        out += "NA";
      } else {
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.append(buf, p);
      }
    }
    out += '\n';
  }
  return out;
}

inline score_matrix compute_score_matrix(const trial_bundle& bundle, index_id id,
                                         unsigned threads = 1) {
  require(bundle.m() >= 2, errc::shape_mismatch, "score matrix needs at least 2 trials");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  score_matrix out;
  out.index = id;
  out.m = bundle.m();
  out.raw.assign(out.m * out.m, nan);
  out.oriented.assign(out.m * out.m, nan);
  out.cell_errors.assign(out.m * out.m, {});

  parallel_for(out.m * out.m, threads, [&](std::size_t cell) {
    std::size_t space = cell / out.m, part = cell % out.m;
    try {
      index_value v =
          compute_index(bundle.trials[space].embedding, bundle.trials[part].labels, id);
      out.raw[cell] = v.raw;
      out.oriented[cell] = v.oriented;
    } catch (const error& e) {
      out.cell_errors[cell] = e.what();
    }
  });
  return out;
}

}  // namespace ace

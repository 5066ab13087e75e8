#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ace/error.hpp"
#include "ace/linalg.hpp"
#include "ace/rng.hpp"
#include "ace/types.hpp"
#include "ace/util.hpp"

namespace ace {

// ---------------------------------------------------------------------------
// Dip statistic
// ---------------------------------------------------------------------------

namespace detail {

/// Lower ("gcm") or upper ("lcm") convex hull indices of the points
/// (x[j], j) for j in [lo, hi], in ascending index order.
inline std::vector<std::size_t> hull_indices(std::span<const double> x, std::size_t lo,
                                             std::size_t hi, bool lower) {
  std::vector<std::size_t> h;
  for (std::size_t j = lo; j <= hi; ++j) {
    while (h.size() >= 2) {
      std::size_t a = h[h.size() - 2], b = h[h.size() - 1];
      // cross(b-a, j-b); pop when b is not a strict vertex of the hull
      double cross = (x[b] - x[a]) * (static_cast<double>(j) - static_cast<double>(b)) -
                     (static_cast<double>(b) - static_cast<double>(a)) * (x[j] - x[b]);
      bool keep = lower ? cross > 0.0 : cross < 0.0;
      if (keep) break;
      h.pop_back();
    }
    h.push_back(j);
  }
  return h;
}

/// Index-unit interpolation of the chord (a -> b) of a hull at abscissa x[j].
inline double chord_at(std::span<const double> x, std::size_t a, std::size_t b, std::size_t j,
                       bool lower) {
  double dx = x[b] - x[a];
  if (dx <= 0.0) {
    // Vertical riser: take the corner that widens the measured gap.
    return lower ? static_cast<double>(a) : static_cast<double>(b);
  }
  return static_cast<double>(a) +
         (x[j] - x[a]) * (static_cast<double>(b) - static_cast<double>(a)) / dx;
}

}  // namespace detail

/// Dip statistic D(F_n) of a sorted sample: the sup-distance from the
/// empirical CDF to the closest unimodal CDF, computed by iteratively
/// shrinking a modal interval between the greatest convex minorant and the
/// least concave majorant.
inline double dip_statistic(std::span<const double> x) {
  std::size_t n = x.size();
  require(n >= 2, errc::too_few_points, "dip needs at least 2 observations");
  for (std::size_t i = 1; i < n; ++i)
    require(x[i] >= x[i - 1], errc::unsorted, "dip input must be sorted ascending");
  if (x[n - 1] == x[0]) return 0.0;  // point mass is itself unimodal

  // Work in index units (multiples of 1/n); the result is d/(2n).
  double best = 1.0;
  std::size_t lo = 0, hi = n - 1;
  for (std::size_t guard = 0; guard <= n; ++guard) {
    std::vector<std::size_t> gcm = detail::hull_indices(x, lo, hi, true);
    std::vector<std::size_t> lcm = detail::hull_indices(x, lo, hi, false);

    // Largest gap between the two hulls, checked at every touch point, and
    // the modal-interval candidate where it occurs.
    double d = 1.0;
    std::size_t modal_lo = lo, modal_hi = hi;
    if (gcm.size() > 2 || lcm.size() > 2) {
      d = 0.0;
      std::size_t ig = 1, il = 1;
      while (ig < gcm.size() && il < lcm.size()) {
        if (gcm[ig] <= lcm[il]) {
          // gcm touch point inside the current lcm chord
          std::size_t g = gcm[ig];
          double interp = detail::chord_at(x, lcm[il - 1], lcm[il], g, false);
          double gap = interp - static_cast<double>(g) + 1.0;
          if (gap > d) {
            d = gap;
            modal_lo = g;
            modal_hi = lcm[il];
          }
          ++ig;
        } else {
          // lcm touch point inside the current gcm chord
          std::size_t l = lcm[il];
          double interp = detail::chord_at(x, gcm[ig - 1], gcm[ig], l, true);
          double gap = static_cast<double>(l) - interp + 1.0;
          if (gap >= d) {
            d = gap;
            modal_lo = gcm[ig - 1];
            modal_hi = l;
          }
          ++il;
        }
      }
    }
    if (d <= best) break;

    // Deviation of the empirical CDF from the minorant over the convex flank
    // [lo, modal_lo] and from the majorant over [modal_hi, hi].
    double flank = 0.0;
    for (std::size_t t = 0; t + 1 < gcm.size() && gcm[t + 1] <= modal_lo; ++t) {
      for (std::size_t j = gcm[t]; j <= gcm[t + 1]; ++j) {
        double dev =
            static_cast<double>(j) - detail::chord_at(x, gcm[t], gcm[t + 1], j, true) + 1.0;
        flank = std::max(flank, dev);
      }
    }
    for (std::size_t t = 0; t + 1 < lcm.size(); ++t) {
      if (lcm[t] < modal_hi) continue;
      for (std::size_t j = lcm[t]; j <= lcm[t + 1]; ++j) {
        double dev =
            detail::chord_at(x, lcm[t], lcm[t + 1], j, false) - static_cast<double>(j) + 1.0;
        flank = std::max(flank, dev);
      }
    }
    best = std::max(best, flank);
    if (modal_lo == lo && modal_hi == hi) break;
    lo = modal_lo;
    hi = modal_hi;
  }
  return best / (2.0 * static_cast<double>(n));
}

inline double dip_statistic(const std::vector<double>& x) {
  return dip_statistic(std::span<const double>(x));
}

/// Dip plus a Monte-Carlo p-value against the Unif(0,1) null.
struct dip_result {
  double dip = 0.0;
  double p_value = 1.0;
  std::size_t replicates = 0;
};

/// p = (1 + #{D_b >= D}) / (B + 1), each replicate drawn from its own
/// counter-indexed substream so the result is independent of evaluation
/// order and thread count.
inline dip_result dip_pvalue(std::vector<double> sample, std::size_t b, std::uint64_t seed,
                             unsigned threads = 1) {
  require(b >= 1, errc::invalid_params, "need at least one replicate");
  std::size_t n = sample.size();
  require(n >= 2, errc::too_few_points, "dip needs at least 2 observations");
  std::sort(sample.begin(), sample.end());
  double observed = dip_statistic(sample);

  counter_rng root(seed);
  std::vector<unsigned char> exceeds(b, 0);
  parallel_for(b, threads, [&](std::size_t rep) {
    counter_rng rng = root.substream(rep);
    std::vector<double> u(n);
    for (double& v : u) v = rng.uniform();
    std::sort(u.begin(), u.end());
    exceeds[rep] = dip_statistic(u) >= observed ? 1 : 0;
  });
  std::size_t count = 0;
  for (unsigned char e : exceeds) count += e;
  return {observed, static_cast<double>(1 + count) / static_cast<double>(b + 1), b};
}

// ---------------------------------------------------------------------------
// PCA projection for the multivariate dip input
// ---------------------------------------------------------------------------

/// Projects mean-centered rows onto the leading covariance eigenvector.
/// Sign fixed so the largest-magnitude loading is positive.
inline std::vector<double> pca_first_component(const embedding_matrix& z) {
  require(z.rows() >= 2, errc::too_few_points, "PCA projection needs n >= 2");
  bool all_equal = true;
  for (std::size_t i = 1; i < z.rows() && all_equal; ++i)
    if (!std::equal(z.row(i).begin(), z.row(i).end(), z.row(0).begin())) all_equal = false;
  require(!all_equal, errc::zero_variance, "all rows identical");

  std::vector<double> mu = column_means(z);
  std::vector<double> out(z.rows());
  if (z.cols() == 1) {
    for (std::size_t i = 0; i < z.rows(); ++i) out[i] = z(i, 0) - mu[0];
    return out;
  }
  sym_matrix cov = sample_covariance(z);
  std::vector<double> v = power_iteration(cov, 1e-10, 10000);
  std::size_t lead = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (std::abs(v[j]) > std::abs(v[lead])) lead = j;
  if (v[lead] < 0.0)
    for (double& c : v) c = -c;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double s = 0.0;
    auto row = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) s += (row[j] - mu[j]) * v[j];
    out[i] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

namespace detail {

/// Keeps positions where both entries are finite.
inline void drop_missing_pairs(std::span<const double> x, std::span<const double> y,
                               std::vector<double>& xs, std::vector<double>& ys) {
  require(x.size() == y.size(), errc::length_mismatch, "correlation inputs differ in length");
  xs.clear();
  ys.clear();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
}

/// Mid-ranks (ties share the average rank), 1-based.
inline std::vector<double> midranks(const std::vector<double>& v) {
  std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = r;
    i = j + 1;
  }
  return rank;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, errc::degenerate_variance,
          "correlation undefined for a constant vector");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// Spearman's r_s: Pearson correlation of mid-ranks. Pairs with a missing
/// entry on either side are dropped.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  std::vector<double> xs, ys;
  detail::drop_missing_pairs(x, y, xs, ys);
  require(xs.size() >= 2, errc::too_few_points, "need at least 2 complete pairs");
  return detail::pearson(detail::midranks(xs), detail::midranks(ys));
}

/// Kendall's tau-b with tie corrections.
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  std::vector<double> xs, ys;
  detail::drop_missing_pairs(x, y, xs, ys);
  std::size_t n = xs.size();
  require(n >= 2, errc::too_few_points, "need at least 2 complete pairs");

  long long nc = 0, nd = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx = xs[i] - xs[j], dy = ys[i] - ys[j];
      double prod = dx * dy;
      if (prod > 0.0)
        ++nc;
      else if (prod < 0.0)
        ++nd;
    }
  }
  auto tie_pairs = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double pairs = 0.0;
    std::size_t i = 0;
    while (i < v.size()) {
      std::size_t j = i;
      while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
      double t = static_cast<double>(j - i + 1);
      pairs += t * (t - 1.0) / 2.0;
      i = j + 1;
    }
    return pairs;
  };
  double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  double n1 = tie_pairs(xs), n2 = tie_pairs(ys);
  double denom = std::sqrt((n0 - n1) * (n0 - n2));
  require(denom > 0.0, errc::degenerate_variance, "tau-b undefined for a constant vector");
  return static_cast<double>(nc - nd) / denom;
}

// ---------------------------------------------------------------------------
// Student-t tails and tests
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(T > t) for T ~ Student-t with nu degrees of freedom.
inline double student_t_upper_tail(double t, double nu) {
  double tail = 0.5 * incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

/// One-sided (upper) p-value for Spearman's r_s against the non-positive
/// null, via t = r sqrt((n-2)/(1-r^2)) ~ t_{n-2}. Perfect correlations
/// short-circuit to p = 0 (r = 1) or p = 1 (r = -1).
inline double spearman_onesided_pvalue(double rs, std::size_t n) {
  require(rs >= -1.0 && rs <= 1.0, errc::invalid_params, "correlation out of range");
  if (rs == 1.0) return 0.0;
  if (rs == -1.0) return 1.0;
  require(n >= 3, errc::too_few_points, "significance test needs n >= 3");
  double t = rs * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - rs * rs));
  return student_t_upper_tail(t, static_cast<double>(n) - 2.0);
}

/// Holm-Bonferroni step-down rejection flags at family-wise error alpha.
inline std::vector<bool> holm_bonferroni(std::span<const double> pvals, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, errc::invalid_alpha, "alpha must lie in (0,1)");
  for (double p : pvals)
    require(p >= 0.0 && p <= 1.0, errc::invalid_params, "p-value outside [0,1]");
  std::size_t m = pvals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<bool> reject(m, false);
  for (std::size_t r = 0; r < m; ++r) {
    double threshold = alpha / static_cast<double>(m - r);
    if (pvals[order[r]] > threshold) break;
    reject[order[r]] = true;
  }
  return reject;
}

/// Upper-tail paired t-test for mean(a - b) > 0. A constant nonzero
/// difference is a certain conclusion: p = 0 (positive) or 1 (negative).
inline double paired_t_test_onesided(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), errc::length_mismatch, "paired samples differ in length");
  std::size_t n = a.size();
  require(n >= 2, errc::too_few_points, "paired test needs n >= 2");
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double mean = mean_of(diff);
  double var = 0.0;
  for (double d : diff) var += (d - mean) * (d - mean);
  var /= static_cast<double>(n - 1);
  if (var == 0.0) {
    require(mean != 0.0, errc::zero_variance, "paired differences are identically zero");
    return mean > 0.0 ? 0.0 : 1.0;
  }
  double t = mean / std::sqrt(var / static_cast<double>(n));
  return student_t_upper_tail(t, static_cast<double>(n) - 1.0);
}

}  // namespace ace

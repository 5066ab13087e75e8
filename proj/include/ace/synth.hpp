#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "ace/error.hpp"
#include "ace/indices.hpp"
#include "ace/rng.hpp"
#include "ace/types.hpp"
#include "ace/util.hpp"

namespace ace {

/// Recipe for a synthetic trial bundle: Gaussian-mixture embeddings with a
/// shared ground-truth partition, optional per-trial label noise, and a set
/// of trials whose embeddings are replaced by unimodal noise.
struct synth_spec {
  std::size_t m = 10;
  std::size_t n = 500;
  std::size_t d = 16;
  std::size_t k = 5;
  std::vector<double> separations;  // per trial, in sigma units
  std::set<std::size_t> corrupt;
  std::vector<double> label_noise;  // per trial, fraction in [0,1)
  std::uint64_t seed = 0;

  void validate() const {
    require(m >= 1 && n >= 2 && k >= 1 && d >= 1, errc::invalid_spec, "m,n,d,k must be positive");
    require(k <= n, errc::invalid_spec, "more clusters than observations");
    require(d >= k, errc::invalid_spec, "simplex centers need d >= k");
    require(separations.size() == m, errc::invalid_spec, "one separation per trial");
    require(label_noise.size() == m, errc::invalid_spec, "one label-noise entry per trial");
    for (double s : separations)
      require(s > 0.0, errc::invalid_spec, "separations must be positive");
    for (double f : label_noise)
      require(f >= 0.0 && f < 1.0, errc::invalid_spec, "label noise must lie in [0,1)");
    for (std::size_t c : corrupt)
      require(c < m, errc::invalid_spec, "corrupt index out of range");
  }

  static synth_spec with_defaults(std::size_t m_, std::size_t n_, std::size_t d_, std::size_t k_,
                                  std::uint64_t seed_) {
    synth_spec s;
    s.m = m_;
    s.n = n_;
    s.d = d_;
    s.k = k_;
    s.seed = seed_;
    s.separations.assign(m_, 6.0);
    s.label_noise.assign(m_, 0.0);
    return s;
  }
};

/// Each trial draws unit-variance Gaussian components on a regular simplex
/// scaled to the trial's separation; labels are the shared truth with the
/// requested fraction flipped. Corrupted trials get a single isotropic
/// Gaussian cloud but keep their labels.
inline trial_bundle generate_bundle(const synth_spec& spec) {
  spec.validate();
  counter_rng root(spec.seed);

  std::vector<std::size_t> truth(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) truth[i] = i % spec.k;

  trial_bundle bundle;
  double simplex_scale = 1.0 / std::sqrt(2.0);  // |a e_i - a e_j| = separation
  for (std::size_t t = 0; t < spec.m; ++t) {
    counter_rng rng = root.substream(t);
    bool corrupted = spec.corrupt.count(t) > 0;
    std::vector<double> values(spec.n * spec.d);
    for (std::size_t i = 0; i < spec.n; ++i) {
      for (std::size_t j = 0; j < spec.d; ++j) values[i * spec.d + j] = rng.normal();
      if (!corrupted) values[i * spec.d + truth[i]] += spec.separations[t] * simplex_scale;
    }

    std::vector<long long> labels(truth.begin(), truth.end());
    std::size_t flips = static_cast<std::size_t>(spec.label_noise[t] * static_cast<double>(spec.n));
    if (flips > 0) {
      counter_rng flip_rng = rng.substream(1u << 20);
      std::vector<std::size_t> order(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) order[i] = i;
      for (std::size_t i = spec.n; i > 1; --i) std::swap(order[i - 1], order[flip_rng.below(i)]);
      for (std::size_t f = 0; f < flips; ++f) {
        std::size_t i = order[f];
        if (spec.k == 1) continue;
        std::size_t shift = 1 + flip_rng.below(spec.k - 1);
        labels[i] = static_cast<long long>((truth[i] + shift) % spec.k);
      }
    }
    bundle.trials.emplace_back("trial" + std::to_string(t),
                               embedding_matrix(spec.n, spec.d, std::move(values)),
                               partition::canonicalize(labels));
  }
  std::vector<long long> truth_ll(truth.begin(), truth.end());
  bundle.truth = partition::canonicalize(truth_ll);
  bundle.validate();
  return bundle;
}

/// Distance-concentration measurements across dimensions: the spread of
/// nearest/farthest query distances and the silhouette magnitude of a random
/// balanced 2-partition, both shrinking as the dimension grows.
struct concentration_stats {
  std::vector<std::size_t> dims;
  std::vector<double> ratio_median;      // median d_max / d_min
  std::vector<double> index_abs_median;  // median |oriented silhouette|
};

inline concentration_stats concentration_demo(std::size_t n, const std::vector<std::size_t>& dims,
                                              std::size_t reps, std::uint64_t seed) {
  require(reps >= 1 && n >= 4, errc::invalid_params, "need reps >= 1 and n >= 4");
  for (std::size_t i = 1; i < dims.size(); ++i)
    require(dims[i] > dims[i - 1], errc::invalid_params, "dims must be ascending");
  for (std::size_t p : dims) require(p >= 1, errc::invalid_params, "dims must be positive");

  counter_rng root(seed);
  concentration_stats out;
  out.dims = dims;
  for (std::size_t pi = 0; pi < dims.size(); ++pi) {
    std::size_t p = dims[pi];
    std::vector<double> ratios(reps), sils(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      counter_rng rng = root.substream(pi * 1000003 + rep);
      std::vector<double> values(n * p);
      for (double& v : values) v = rng.uniform();
      embedding_matrix z(n, p, std::move(values));
      std::vector<double> query(p);
      for (double& v : query) v = rng.uniform();

      double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double dist = euclidean(z.row(i), query);
        dmin = std::min(dmin, dist);
        dmax = std::max(dmax, dist);
      }
      ratios[rep] = dmax / dmin;

      std::vector<long long> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 0 : 1;
      for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
      sils[rep] = std::abs(silhouette(z, partition::canonicalize(labels)).oriented);
    }
    out.ratio_median.push_back(median_of(ratios));
    out.index_abs_median.push_back(median_of(sils));
  }
  return out;
}

/// Two trials over the same underlying two-blob data: trial A keeps the wide
/// geometry but carries a few boundary label errors; trial B compresses the
/// between-center axis yet labels perfectly. Paired scores prefer A, the
/// external measure and any single common space prefer B.
inline trial_bundle make_scale_mismatch_pair(std::uint64_t seed) {
  counter_rng rng(seed);
  std::size_t n = 80;
  double separation = 10.0;
  double compress = 0.3;
  std::size_t flips = 6;

  std::vector<double> base(n * 2);
  std::vector<long long> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = static_cast<long long>(i % 2);
    base[i * 2] = rng.normal() + (i % 2 ? separation : 0.0);
    base[i * 2 + 1] = rng.normal();
  }

  // flip the labels nearest the midplane between the two centers
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  double mid = separation / 2.0;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(base[a * 2] - mid) < std::abs(base[b * 2] - mid);
  });
  std::vector<long long> noisy(truth);
  for (std::size_t f = 0; f < flips; ++f) noisy[order[f]] = 1 - noisy[order[f]];

  std::vector<double> compressed(base);
  for (std::size_t i = 0; i < n; ++i) compressed[i * 2] *= compress;

  trial_bundle bundle;
  bundle.trials.emplace_back("wide_noisy_labels", embedding_matrix(n, 2, base),
                             partition::canonicalize(noisy));
  bundle.trials.emplace_back("compressed_clean_labels", embedding_matrix(n, 2, compressed),
                             partition::canonicalize(truth));
  bundle.truth = partition::canonicalize(truth);
  bundle.validate();
  return bundle;
}

}  // namespace ace

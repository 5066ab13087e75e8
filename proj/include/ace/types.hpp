#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ace/error.hpp"

namespace ace {

/// Dense n x d matrix of observations, row-major, doubles. One row per
/// observation. All values must be finite.
class embedding_matrix {
 public:
  embedding_matrix() = default;

  embedding_matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    require(rows_ >= 1 && cols_ >= 1, errc::shape_mismatch, "matrix must be at least 1x1");
    require(values_.size() == rows_ * cols_, errc::shape_mismatch,
            "value count does not match rows*cols");
    for (double v : values_) {
      require(std::isfinite(v), errc::non_finite_value, "matrix contains NaN or Inf");
    }
  }

  static embedding_matrix zeros(std::size_t rows, std::size_t cols) {
    return embedding_matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_.data() + i * cols_, cols_);
  }
  std::span<double> row(std::size_t i) { return std::span<double>(values_.data() + i * cols_, cols_); }

  const std::vector<double>& values() const { return values_; }

  bool operator==(const embedding_matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(sq_dist(a, b));
}

/// Cluster labels for n observations, canonicalized to 0..k-1 by first
/// occurrence.
class partition {
 public:
  partition() = default;

  /// Remaps arbitrary integer labels to 0..k-1 in order of first occurrence.
  static partition canonicalize(std::span<const long long> raw_labels) {
    require(!raw_labels.empty(), errc::empty_input, "label sequence is empty");
    partition p;
    p.labels_.reserve(raw_labels.size());
    std::unordered_map<long long, std::size_t> remap;
    for (long long v : raw_labels) {
      auto [it, inserted] = remap.try_emplace(v, remap.size());
      p.labels_.push_back(it->second);
    }
    p.k_ = remap.size();
    return p;
  }

  static partition canonicalize(const std::vector<long long>& raw) {
    return canonicalize(std::span<const long long>(raw));
  }

  /// Accepts labels that are already contiguous 0..k-1; canonicalizes otherwise.
  static partition from_labels(std::vector<std::size_t> labels) {
    std::vector<long long> raw(labels.begin(), labels.end());
    return canonicalize(raw);
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t k() const { return k_; }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::size_t>& labels() const { return labels_; }

  /// Member indices per cluster, in ascending observation order.
  std::vector<std::vector<std::size_t>> clusters() const {
    std::vector<std::vector<std::size_t>> out(k_);
    for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i);
    return out;
  }

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> out(k_, 0);
    for (std::size_t l : labels_) ++out[l];
    return out;
  }

  bool operator==(const partition&) const = default;

 private:
  std::vector<std::size_t> labels_;
  std::size_t k_ = 0;
};

/// One deep-clustering trial: an embedding space plus the partition produced
/// in it.
struct trial {
  std::string id;
  embedding_matrix embedding;
  partition labels;

  trial(std::string id_, embedding_matrix z, partition rho)
      : id(std::move(id_)), embedding(std::move(z)), labels(std::move(rho)) {
    require(labels.size() == embedding.rows(), errc::shape_mismatch,
            "trial '" + id + "': label count differs from embedding rows");
  }
};

/// All trials under evaluation, plus (optionally) the shared raw input space
/// and the ground-truth partition.
struct trial_bundle {
  std::vector<trial> trials;
  std::optional<embedding_matrix> raw_input;
  std::optional<partition> truth;

  std::size_t m() const { return trials.size(); }
  std::size_t n() const { return trials.empty() ? 0 : trials.front().embedding.rows(); }

  void validate() const {
    require(!trials.empty(), errc::empty_input, "bundle has no trials");
    std::size_t n0 = trials.front().embedding.rows();
    for (const auto& t : trials) {
      require(t.embedding.rows() == n0, errc::shape_mismatch,
              "trial '" + t.id + "': observation count differs across trials");
    }
    for (std::size_t i = 0; i < trials.size(); ++i)
      for (std::size_t j = i + 1; j < trials.size(); ++j)
        require(trials[i].id != trials[j].id, errc::parse_error,
                "duplicate trial id '" + trials[i].id + "'");
    if (raw_input) {
      require(raw_input->rows() == n0, errc::shape_mismatch,
              "raw input observation count differs from trials");
    }
    if (truth) {
      require(truth->size() == n0, errc::shape_mismatch,
              "truth label count differs from trials");
    }
  }
};

}  // namespace ace

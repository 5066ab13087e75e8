#pragma once

#include <stdexcept>
#include <string>

namespace ace {

enum class errc {
  missing_file,
  parse_error,
  shape_mismatch,
  non_finite_value,
  empty_input,
  degenerate_k,
  zero_within_dispersion,
  coincident_centroids,
  zero_diameter,
  degenerate_distances,
  singular_total_scatter,
  empty_cluster,
  length_mismatch,
  too_few_points,
  unsorted,
  zero_variance,
  degenerate_variance,
  perfect_correlation,
  invalid_alpha,
  invalid_params,
  invalid_spec,
  non_convergence,
  missing_raw_input,
  missing_truth,
  no_retained_spaces,
  empty_subgroup,
  id_mismatch,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_file: return "MissingFile";
    case errc::parse_error: return "ParseError";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::non_finite_value: return "NonFiniteValue";
    case errc::empty_input: return "EmptyInput";
    case errc::degenerate_k: return "DegenerateK";
    case errc::zero_within_dispersion: return "ZeroWithinDispersion";
    case errc::coincident_centroids: return "CoincidentCentroids";
    case errc::zero_diameter: return "ZeroDiameter";
    case errc::degenerate_distances: return "DegenerateDistances";
    case errc::singular_total_scatter: return "SingularTotalScatter";
    case errc::empty_cluster: return "EmptyCluster";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::too_few_points: return "TooFewPoints";
    case errc::unsorted: return "Unsorted";
    case errc::zero_variance: return "ZeroVariance";
    case errc::degenerate_variance: return "DegenerateVariance";
    case errc::perfect_correlation: return "PerfectCorrelation";
    case errc::invalid_alpha: return "InvalidAlpha";
    case errc::invalid_params: return "InvalidParams";
    case errc::invalid_spec: return "InvalidSpec";
    case errc::non_convergence: return "NonConvergence";
    case errc::missing_raw_input: return "MissingRawInput";
    case errc::missing_truth: return "MissingTruth";
    case errc::no_retained_spaces: return "NoRetainedSpaces";
    case errc::empty_subgroup: return "EmptySubgroup";
    case errc::id_mismatch: return "IdMismatch";
  }
  return "UnknownError";
}

/// Exception carrying a stable error code plus a human-readable message.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool ok, errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace ace

#pragma once

// Reconstruction retrieval against a calibrated metric interval: the
// reconstructions whose metric lands closest to each bound, the inlier /
// outlier split, and the signed retrieval error as a percentage of the
// interval length.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgb/conformal.hpp"

namespace mgb {

enum class Bound { kLower, kUpper };

struct BoundIndices {
  std::size_t lb_index = 0;
  std::size_t ub_index = 0;
};

struct Partition {
  std::vector<std::size_t> inliers;
  std::vector<std::size_t> outliers;
};

struct RetrievalReport {
  PredictionInterval interval;
  /// Unset for unbounded intervals.
  std::optional<BoundIndices> bounds;
  Partition partition;
  /// Unset for unbounded or zero-length intervals.
  std::optional<double> lb_error_pct;
  std::optional<double> ub_error_pct;
  /// Why optional fields are unset ("unbounded", "degenerate interval"), else empty.
  std::string reason;
};

/// argmin_j |estimates[j] - bound| for each bound; ties go to the smallest j.
BoundIndices retrieve_bound_volumes(std::span<const double> estimates,
                                    const PredictionInterval& interval);

/// Closed-interval membership.
Partition partition_inliers_outliers(std::span<const double> estimates,
                                     const PredictionInterval& interval);

/// (closest estimate - bound) / (ub - lb) * 100, signed.
double retrieval_error(std::span<const double> estimates, const PredictionInterval& interval,
                       Bound which);

/// Runs the three operations above, recording why any field is missing.
RetrievalReport retrieve(std::span<const double> estimates, const PredictionInterval& interval);

}  // namespace mgb

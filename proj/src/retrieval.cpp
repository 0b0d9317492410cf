#include "mgb/retrieval.hpp"

#include <cmath>

#include "mgb/error.hpp"

namespace mgb {

namespace {

void require_estimates(std::span<const double> estimates) {
  if (estimates.empty()) throw Error(ErrorCode::kInvalidArgument, "empty sample");
}

std::size_t closest_index(std::span<const double> estimates, double target) {
  std::size_t best = 0;
  double best_gap = std::fabs(estimates[0] - target);
  for (std::size_t j = 1; j < estimates.size(); ++j) {
    const double gap = std::fabs(estimates[j] - target);
    if (gap < best_gap) {
      best = j;
      best_gap = gap;
    }
  }
  return best;
}

}  // namespace

BoundIndices retrieve_bound_volumes(std::span<const double> estimates,
                                    const PredictionInterval& interval) {
  require_estimates(estimates);
  if (!interval.bounded()) {
    throw Error(ErrorCode::kInvalidArgument, "unbounded interval: retrieval undefined");
  }
  return {closest_index(estimates, interval.lb), closest_index(estimates, interval.ub)};
}

Partition partition_inliers_outliers(std::span<const double> estimates,
                                     const PredictionInterval& interval) {
  require_estimates(estimates);
  Partition p;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    (interval.contains(estimates[j]) ? p.inliers : p.outliers).push_back(j);
  }
  return p;
}

double retrieval_error(std::span<const double> estimates, const PredictionInterval& interval,
                       Bound which) {
  require_estimates(estimates);
  if (!interval.bounded()) throw Error(ErrorCode::kInvalidArgument, "unbounded interval");
  const double length = interval.ub - interval.lb;
  if (!(length > 0.0)) throw Error(ErrorCode::kDegenerate, "degenerate interval");
  const double bound = which == Bound::kLower ? interval.lb : interval.ub;
  const double closest = estimates[closest_index(estimates, bound)];
  return (closest - bound) / length * 100.0;
}

RetrievalReport retrieve(std::span<const double> estimates, const PredictionInterval& interval) {
  RetrievalReport report;
  report.interval = interval;
  report.partition = partition_inliers_outliers(estimates, interval);
  if (!interval.bounded()) {
    report.reason = "unbounded";
    return report;
  }
  report.bounds = retrieve_bound_volumes(estimates, interval);
  if (interval.ub > interval.lb) {
    report.lb_error_pct = retrieval_error(estimates, interval, Bound::kLower);
    report.ub_error_pct = retrieval_error(estimates, interval, Bound::kUpper);
  } else {
    report.reason = "degenerate interval";
  }
  return report;
}

}  // namespace mgb

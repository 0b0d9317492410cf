#pragma once

// Split-conformal calibration of metric prediction intervals.
//
// Two quantile conventions live here on purpose:
//   * sample_quantile() is the linearly interpolated empirical quantile used
//     for the band [Q_{a/2}, Q_{1-a/2}] of a patient's estimated metrics.
//   * conformal_order_quantile() is the plain k-th order statistic used for
//     the conformal offset, which is what makes the finite-sample coverage
//     bound hold.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mgb {

/// Probability level in [0, 1]. Construction outside that range throws.
class QuantileLevel {
 public:
  explicit QuantileLevel(double level);
  double value() const noexcept { return level_; }

 private:
  double level_;
};

/// Estimated downstream metric values for one patient's reconstruction set.
/// values[j] belongs to reconstruction j.
struct MetricSet {
  std::string patient_id;
  std::string metric;
  std::vector<double> values;
};

/// One calibration patient: estimated metrics plus the ground-truth metric.
struct CalibrationSample {
  MetricSet estimates;
  double truth = 0.0;
};

struct CalibrationResult {
  double alpha = 0.0;
  /// +inf when unbounded.
  double q = 0.0;
  /// Nonconformity scores sorted ascending, one per calibration patient.
  std::vector<double> scores;
  std::size_t n_p = 0;
  double adjusted_level = 0.0;
  bool unbounded = false;
};

struct PredictionInterval {
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  double alpha = 0.0;

  bool bounded() const noexcept;
  bool contains(double y) const noexcept { return lb <= y && y <= ub; }
};

/// Interpolated empirical quantile: position p = level*(n-1) over the sorted
/// sample, linear between the neighbouring order statistics.
double sample_quantile(std::span<const double> values, QuantileLevel level);

/// Same as sample_quantile() for several levels at once (one sort).
std::vector<double> sample_quantiles(std::span<const double> values,
                                     std::span<const double> levels);

/// k-th smallest score (1-based). +inf when k exceeds the sample size.
double conformal_order_quantile(std::span<const double> scores, std::size_t k);

/// ceil((n_p + 1) * (1 - alpha)), evaluated so that exact products such as
/// 20 * 0.9 are not pushed to the next integer by binary rounding.
std::size_t conformal_rank(std::size_t n_p, double alpha);

/// ceil((n_p + 1) * (1 - alpha)) / n_p.
double adjusted_level(std::size_t n_p, double alpha);

/// max(Q_{a/2}(estimates) - truth, truth - Q_{1-a/2}(estimates)). Negative
/// when the truth sits strictly inside the band.
double cqr_score(std::span<const double> estimates, double truth, double alpha);

CalibrationResult calibrate_offset(std::span<const CalibrationSample> calibration,
                                   double alpha);

/// [Q_{a/2}(test) - q, Q_{1-a/2}(test) + q]; the whole real line when the
/// calibration is unbounded.
PredictionInterval predict_interval(std::span<const double> test,
                                    const CalibrationResult& calib);

void validate_alpha(double alpha);

}  // namespace mgb

#include "mgb/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "mgb/detail/interpolate.hpp"
#include "mgb/error.hpp"

namespace mgb {

namespace {

void check_sample(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "empty sample");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite input");
  }
}

// Quantile of a scratch copy; reorders `scratch` but never sorts it fully.
double select_quantile(std::vector<double>& scratch, double level) {
  const auto pos = detail::quantile_position(level, scratch.size());
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(pos.index);
  std::nth_element(scratch.begin(), nth, scratch.end());
  const double lo = *nth;
  if (pos.fraction == 0.0) return lo;
  const double hi = *std::min_element(nth + 1, scratch.end());
  return detail::interpolate(lo, hi, pos.fraction);
}

}  // namespace

QuantileLevel::QuantileLevel(double level) : level_(level) {
  if (!(level >= 0.0 && level <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile level outside [0, 1]");
  }
}

bool PredictionInterval::bounded() const noexcept {
  return std::isfinite(lb) && std::isfinite(ub);
}

void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
}

double sample_quantile(std::span<const double> values, QuantileLevel level) {
  check_sample(values);
  std::vector<double> scratch(values.begin(), values.end());
  return select_quantile(scratch, level.value());
}

std::vector<double> sample_quantiles(std::span<const double> values,
                                     std::span<const double> levels) {
  check_sample(values);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(levels.size());
  for (double level : levels) {
    const auto pos = detail::quantile_position(QuantileLevel(level).value(), sorted.size());
    out.push_back(detail::interpolate(sorted[pos.index], sorted[pos.next], pos.fraction));
  }
  return out;
}

double conformal_order_quantile(std::span<const double> scores, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "invalid rank");
  if (scores.empty()) throw Error(ErrorCode::kInvalidArgument, "empty sample");
  if (k > scores.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> scratch(scores.begin(), scores.end());
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

std::size_t conformal_rank(std::size_t n_p, double alpha) {
  validate_alpha(alpha);
  const double x = static_cast<double>(n_p + 1) * (1.0 - alpha);
  const double k = std::ceil(x - 1e-9 * std::max(1.0, x));
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

double adjusted_level(std::size_t n_p, double alpha) {
  if (n_p == 0) throw Error(ErrorCode::kInvalidArgument, "no calibration data");
  return static_cast<double>(conformal_rank(n_p, alpha)) / static_cast<double>(n_p);
}

double cqr_score(std::span<const double> estimates, double truth, double alpha) {
  validate_alpha(alpha);
  const double levels[2] = {alpha / 2.0, 1.0 - alpha / 2.0};
  const auto band = sample_quantiles(estimates, levels);
  return std::max(band[0] - truth, truth - band[1]);
}

CalibrationResult calibrate_offset(std::span<const CalibrationSample> calibration,
                                   double alpha) {
  validate_alpha(alpha);
  if (calibration.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no calibration data");
  }
  CalibrationResult result;
  result.alpha = alpha;
  result.n_p = calibration.size();
  result.scores.reserve(calibration.size());
  for (const auto& sample : calibration) {
    result.scores.push_back(cqr_score(sample.estimates.values, sample.truth, alpha));
  }
  std::sort(result.scores.begin(), result.scores.end());

  const std::size_t k = conformal_rank(result.n_p, alpha);
  result.adjusted_level = static_cast<double>(k) / static_cast<double>(result.n_p);
  result.unbounded = k > result.n_p;
  result.q = result.unbounded ? std::numeric_limits<double>::infinity()
                              : result.scores[k - 1];
  return result;
}

PredictionInterval predict_interval(std::span<const double> test,
                                    const CalibrationResult& calib) {
  PredictionInterval interval;
  interval.alpha = calib.alpha;
  if (calib.unbounded) {
    check_sample(test);
    return interval;
  }
  const double levels[2] = {calib.alpha / 2.0, 1.0 - calib.alpha / 2.0};
  const auto band = sample_quantiles(test, levels);
  interval.lb = band[0] - calib.q;
  interval.ub = band[1] + calib.q;
  if (interval.lb > interval.ub) {
    // Negative offset larger than half the band: the interval would be empty.
    // Collapse it onto the band midpoint so lb <= ub still holds.
    const double mid = band[0] + (band[1] - band[0]) / 2.0;
    interval.lb = interval.ub = mid;
  }
  return interval;
}

}  // namespace mgb

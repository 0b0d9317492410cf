#pragma once

// Coverage validation of metric-guided intervals against the voxel-wise
// quantile baseline, Monte Carlo checks of the marginal guarantee, and the
// paired t-test used to compare bound anatomies.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgb/cohort.hpp"
#include "mgb/conformal.hpp"
#include "mgb/metrics.hpp"

namespace mgb {

enum class CoverageMethod { kMetricGuided, kPixelWise };

std::string to_string(CoverageMethod method);

struct CoverageReport {
  CoverageMethod method = CoverageMethod::kMetricGuided;
  std::string metric;
  double alpha = 0.0;
  std::size_t n_patients = 0;
  std::size_t covered = 0;
  double coverage_pct = 0.0;
  double adjusted_target_pct = 0.0;
  /// Per-patient containment flags, in cohort order.
  std::vector<bool> fold_covered;
};

struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double t_stat = 0.0;
  std::size_t dof = 0;
  double p_two_sided = 1.0;
};

/// Estimated and ground-truth metric for one patient: cached values when the
/// record has them, otherwise measured from its volumes. Throws
/// Error(kMissingTruth, "ground truth required") when neither is available.
CalibrationSample labeled_metrics(const Cohort& cohort, const PatientRecord& patient,
                                  const MetricSpec& spec);

/// Per-reconstruction estimates only; no ground truth needed.
MetricSet estimated_metrics(const Cohort& cohort, const PatientRecord& patient,
                            const MetricSpec& spec);

/// Leave-one-out: each patient is predicted from a calibration on all others.
CoverageReport loo_coverage(std::span<const CalibrationSample> samples, double alpha,
                            const std::string& metric);
CoverageReport loo_coverage(const Cohort& cohort, const MetricSpec& spec, double alpha);

/// Metric evaluated on the voxel-wise lower and upper bound volumes (each
/// segmented afresh); the interval is [min, max] of those two values.
CoverageReport pixelwise_coverage(const Cohort& cohort, const MetricSpec& spec, double alpha);

/// Pixel-wise interval for a single patient.
PredictionInterval pixelwise_interval_for_metric(const Cohort& cohort, const PatientRecord& patient,
                                                 const MetricSpec& spec, double alpha);

struct MonteCarloCoverage {
  std::size_t trials = 0;
  std::size_t covered = 0;
  double coverage() const noexcept {
    return trials == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(trials);
  }
};

/// Each trial draws a fresh cohort (seed trial_seed(cfg.seed, t)), calibrates
/// on patients 0..n-2 and tests on patient n-1.
MonteCarloCoverage marginal_coverage_mc(const CohortConfig& cfg, const MetricSpec& spec,
                                        double alpha, std::size_t trials, unsigned threads = 1);

struct CoverageGridCell {
  std::string metric;
  double alpha = 0.0;
  std::size_t n_p = 0;
  MonteCarloCoverage result;
};

/// marginal_coverage_mc for every (metric, alpha, n_p) at once. Trial t uses
/// one cohort of max(n_p) + 1 patients; the cell for n_p reads its first
/// n_p + 1 patients, which is exactly the cohort marginal_coverage_mc draws
/// with n_patients = n_p + 1.
std::vector<CoverageGridCell> marginal_coverage_grid(const CohortConfig& cfg,
                                                     std::span<const MetricSpec> specs,
                                                     std::span<const double> alphas,
                                                     std::span<const std::size_t> n_ps,
                                                     std::size_t trials, unsigned threads = 1);

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

struct AnatomicalStudy {
  std::string metric;
  std::string organ;
  std::vector<double> metric_guided_upper;
  std::vector<double> metric_guided_lower;
  std::vector<double> pixelwise_upper;
  std::vector<double> pixelwise_lower;
  /// Unset when the paired differences are all equal ("no difference").
  std::optional<TTestResult> upper;
  std::optional<TTestResult> lower;
};

/// Organ volume (segmented metric region) of the metric-guided and pixel-wise
/// bound reconstructions, per patient, compared across methods with paired
/// t-tests. Metric-guided bounds come from leave-one-out calibration.
AnatomicalStudy anatomical_difference_study(const Cohort& cohort, const MetricSpec& spec,
                                            double alpha);

}  // namespace mgb

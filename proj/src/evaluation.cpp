#include "mgb/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "mgb/detail/parallel.hpp"
#include "mgb/error.hpp"
#include "mgb/retrieval.hpp"

namespace mgb {

namespace {

const Mask& roi_for(const PatientRecord& patient, const std::string& organ) {
  const auto it = patient.rois.find(organ);
  if (it == patient.rois.end()) {
    throw Error(ErrorCode::kUnknownEntity, "unknown region: " + organ);
  }
  return it->second;
}

void require_reconstructions(const PatientRecord& patient) {
  if (patient.reconstructions.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "patient " + std::to_string(patient.id) + " has no reconstruction volumes");
  }
}

double organ_volume(const Volume& v, const SegmentationRule& rule, const Mask& roi) {
  return region_volume(segment_threshold(v, rule.lo, rule.hi, roi), v.spacing());
}

double target_pct(std::size_t n_patients, double alpha) {
  if (n_patients >= 2) return 100.0 * adjusted_level(n_patients - 1, alpha);
  return 100.0 * (1.0 - alpha);
}

void finish(CoverageReport& report) {
  report.n_patients = report.fold_covered.size();
  report.covered = static_cast<std::size_t>(
      std::count(report.fold_covered.begin(), report.fold_covered.end(), true));
  report.coverage_pct = report.n_patients == 0
                            ? 0.0
                            : 100.0 * static_cast<double>(report.covered) /
                                  static_cast<double>(report.n_patients);
  report.adjusted_target_pct = target_pct(report.n_patients, report.alpha);
}

std::vector<CalibrationSample> all_samples(const Cohort& cohort, const MetricSpec& spec) {
  std::vector<CalibrationSample> samples;
  samples.reserve(cohort.patients.size());
  for (const auto& p : cohort.patients) samples.push_back(labeled_metrics(cohort, p, spec));
  return samples;
}

std::vector<CalibrationSample> without(std::span<const CalibrationSample> samples, std::size_t skip) {
  std::vector<CalibrationSample> rest;
  rest.reserve(samples.size() - 1);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (j != skip) rest.push_back(samples[j]);
  }
  return rest;
}

}  // namespace

std::string to_string(CoverageMethod method) {
  return method == CoverageMethod::kMetricGuided ? "metric_guided" : "pixelwise";
}

CalibrationSample labeled_metrics(const Cohort& cohort, const PatientRecord& patient,
                                  const MetricSpec& spec) {
  const std::string name = spec.name();
  CalibrationSample sample;

  if (const auto it = patient.truths.find(name); it != patient.truths.end()) {
    sample.truth = it->second;
  } else if (patient.ground_truth) {
    sample.truth = measure_metric(spec, *patient.ground_truth, patient.rois, cohort.rules);
  } else {
    throw Error(ErrorCode::kMissingTruth, "ground truth required");
  }

  sample.estimates = estimated_metrics(cohort, patient, spec);
  return sample;
}

MetricSet estimated_metrics(const Cohort& cohort, const PatientRecord& patient,
                            const MetricSpec& spec) {
  const std::string name = spec.name();
  if (const auto it = patient.estimates.find(name); it != patient.estimates.end()) return it->second;
  require_reconstructions(patient);
  MetricSet set{std::to_string(patient.id), name, {}};
  for (const auto& recon : patient.reconstructions) {
    set.values.push_back(measure_metric(spec, recon, patient.rois, cohort.rules));
  }
  return set;
}

CoverageReport loo_coverage(std::span<const CalibrationSample> samples, double alpha,
                            const std::string& metric) {
  validate_alpha(alpha);
  if (samples.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "leave-one-out needs at least 2 patients");
  }
  CoverageReport report;
  report.method = CoverageMethod::kMetricGuided;
  report.metric = metric;
  report.alpha = alpha;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto rest = without(samples, i);
    const auto calib = calibrate_offset(rest, alpha);
    const auto interval = predict_interval(samples[i].estimates.values, calib);
    report.fold_covered.push_back(interval.contains(samples[i].truth));
  }
  finish(report);
  return report;
}

CoverageReport loo_coverage(const Cohort& cohort, const MetricSpec& spec, double alpha) {
  const auto samples = all_samples(cohort, spec);
  return loo_coverage(samples, alpha, spec.name());
}

PredictionInterval pixelwise_interval_for_metric(const Cohort& cohort, const PatientRecord& patient,
                                                 const MetricSpec& spec, double alpha) {
  require_reconstructions(patient);
  const auto bounds = voxelwise_bounds(patient.reconstructions, alpha);
  const double at_lower = measure_metric(spec, bounds.lower, patient.rois, cohort.rules);
  const double at_upper = measure_metric(spec, bounds.upper, patient.rois, cohort.rules);
  PredictionInterval interval;
  interval.alpha = alpha;
  interval.lb = std::min(at_lower, at_upper);
  interval.ub = std::max(at_lower, at_upper);
  return interval;
}

CoverageReport pixelwise_coverage(const Cohort& cohort, const MetricSpec& spec, double alpha) {
  validate_alpha(alpha);
  if (cohort.patients.empty()) throw Error(ErrorCode::kInvalidArgument, "empty cohort");
  CoverageReport report;
  report.method = CoverageMethod::kPixelWise;
  report.metric = spec.name();
  report.alpha = alpha;
  for (const auto& patient : cohort.patients) {
    const double truth = labeled_metrics(cohort, patient, spec).truth;
    const auto interval = pixelwise_interval_for_metric(cohort, patient, spec, alpha);
    report.fold_covered.push_back(interval.contains(truth));
  }
  finish(report);
  return report;
}

std::vector<CoverageGridCell> marginal_coverage_grid(const CohortConfig& cfg,
                                                     std::span<const MetricSpec> specs,
                                                     std::span<const double> alphas,
                                                     std::span<const std::size_t> n_ps,
                                                     std::size_t trials, unsigned threads) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  if (specs.empty() || alphas.empty() || n_ps.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty coverage grid");
  }
  for (double a : alphas) validate_alpha(a);
  for (std::size_t n_p : n_ps) {
    if (n_p < 1) throw Error(ErrorCode::kInvalidArgument, "no calibration data");
  }
  const std::size_t max_np = *std::max_element(n_ps.begin(), n_ps.end());

  std::vector<CoverageGridCell> cells;
  for (const auto& spec : specs) {
    for (double a : alphas) {
      for (std::size_t n_p : n_ps) cells.push_back({spec.name(), a, n_p, {trials, 0}});
    }
  }

  // hits[t * cells + c]; summed afterwards so the totals do not depend on
  // scheduling.
  std::vector<std::uint8_t> hits(trials * cells.size(), 0);
  detail::parallel_for(trials, threads, [&](std::size_t t) {
    CohortConfig trial_cfg = cfg;
    trial_cfg.seed = trial_seed(cfg.seed, t);
    trial_cfg.n_patients = static_cast<std::uint32_t>(max_np + 1);
    std::vector<PatientMetrics> patients;
    patients.reserve(max_np + 1);
    for (std::size_t i = 0; i <= max_np; ++i) {
      patients.push_back(simulate_patient_metrics(trial_cfg, static_cast<std::uint32_t>(i), specs));
    }
    std::size_t c = 0;
    for (std::size_t m = 0; m < specs.size(); ++m) {
      for (double a : alphas) {
        for (std::size_t n_p : n_ps) {
          std::vector<CalibrationSample> calibration;
          calibration.reserve(n_p);
          for (std::size_t i = 0; i < n_p; ++i) {
            calibration.push_back({{std::to_string(i), cells[c].metric, patients[i].estimates[m]},
                                   patients[i].truths[m]});
          }
          const auto calib = calibrate_offset(calibration, a);
          const auto interval = predict_interval(patients[n_p].estimates[m], calib);
          hits[t * cells.size() + c] = interval.contains(patients[n_p].truths[m]) ? 1 : 0;
          ++c;
        }
      }
    }
  });
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c].result.covered += hits[t * cells.size() + c];
  }
  return cells;
}

MonteCarloCoverage marginal_coverage_mc(const CohortConfig& cfg, const MetricSpec& spec,
                                        double alpha, std::size_t trials, unsigned threads) {
  cfg.validate();
  if (cfg.n_patients < 2) {
    throw Error(ErrorCode::kInvalidArgument, "Monte Carlo coverage needs at least 2 patients");
  }
  const MetricSpec specs[] = {spec};
  const double alphas[] = {alpha};
  const std::size_t n_ps[] = {cfg.n_patients - 1u};
  return marginal_coverage_grid(cfg, specs, alphas, n_ps, trials, threads).front().result;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidArgument, "length mismatch");
  if (a.size() < 2) throw Error(ErrorCode::kInvalidArgument, "paired t-test needs at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    if (!std::isfinite(d[i])) throw Error(ErrorCode::kInvalidArgument, "non-finite input");
  }
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw Error(ErrorCode::kDegenerate, "degenerate differences");

  TTestResult r;
  r.n = n;
  r.mean_diff = mean;
  r.sd_diff = sd;
  r.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.dof = n - 1;
  r.p_two_sided = student_t_two_sided_p(r.t_stat, static_cast<double>(r.dof));
  return r;
}

AnatomicalStudy anatomical_difference_study(const Cohort& cohort, const MetricSpec& spec,
                                            double alpha) {
  validate_alpha(alpha);
  AnatomicalStudy study;
  study.metric = spec.name();
  study.organ = spec.region;
  const SegmentationRule& rule = find_rule(cohort.rules, spec.region);
  const auto samples = all_samples(cohort, spec);
  if (samples.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "leave-one-out needs at least 2 patients");
  }

  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    const PatientRecord& patient = cohort.patients[i];
    require_reconstructions(patient);
    const Mask& roi = roi_for(patient, spec.region);

    const auto calib = calibrate_offset(without(samples, i), alpha);
    const auto interval = predict_interval(samples[i].estimates.values, calib);
    const auto picked = retrieve_bound_volumes(samples[i].estimates.values, interval);
    study.metric_guided_upper.push_back(organ_volume(patient.reconstructions.at(picked.ub_index), rule, roi));
    study.metric_guided_lower.push_back(organ_volume(patient.reconstructions.at(picked.lb_index), rule, roi));

    const auto bounds = voxelwise_bounds(patient.reconstructions, alpha);
    study.pixelwise_upper.push_back(organ_volume(bounds.upper, rule, roi));
    study.pixelwise_lower.push_back(organ_volume(bounds.lower, rule, roi));
  }

  auto compare = [](const std::vector<double>& x, const std::vector<double>& y) -> std::optional<TTestResult> {
    try {
      return paired_t_test(x, y);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerate) return std::nullopt;
      throw;
    }
  };
  study.upper = compare(study.metric_guided_upper, study.pixelwise_upper);
  study.lower = compare(study.metric_guided_lower, study.pixelwise_lower);
  return study;
}

}  // namespace mgb

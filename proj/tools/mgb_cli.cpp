// mgb: simulate cohorts, calibrate metric intervals, retrieve bound
// reconstructions, evaluate coverage and compare samples.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mgb/cohort.hpp"
#include "mgb/conformal.hpp"
#include "mgb/error.hpp"
#include "mgb/evaluation.hpp"
#include "mgb/io.hpp"
#include "mgb/metrics.hpp"
#include "mgb/retrieval.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "1.0.0";

int fail(mgb::ErrorCode code, const std::string& message) {
  const int n = static_cast<int>(code);
  std::fprintf(stderr, "MGB-E%02d: %s\n", n, message.c_str());
  return n;
}

mgb::Error usage(const std::string& message) {
  return mgb::Error(mgb::ErrorCode::kInvalidArgument, message);
}

struct SimulateArgs {
  std::uint32_t patients = 20;
  std::uint32_t recons = 10;
  std::vector<std::uint32_t> dims{64, 64, 64};
  std::uint64_t seed = 0;
  double noise = mgb::CohortConfig{}.noise_sigma;
  std::uint32_t smooth = mgb::CohortConfig{}.smoothing_radius;
  double shift = mgb::CohortConfig{}.shift_sigma;
  double jitter = mgb::CohortConfig{}.intensity_jitter_sigma;
  std::string out;
  unsigned threads = 1;
};

struct CalibrateArgs {
  std::string cohort, metric, out;
  double alpha = 0.1;
  std::optional<std::uint32_t> exclude;
};

struct PredictArgs {
  std::string cohort, metric, calib, out;
  std::uint32_t patient = 0;
};

struct EvaluateArgs {
  std::string cohort, metric, out, mode = "loo";
  double alpha = 0.1;
  std::size_t trials = 500;
  unsigned threads = 1;
};

struct TTestArgs {
  std::string a, b, out;
};

const mgb::PatientRecord& find_patient(const mgb::Cohort& cohort, std::uint32_t id) {
  for (const auto& p : cohort.patients) {
    if (p.id == id) return p;
  }
  throw mgb::Error(mgb::ErrorCode::kUnknownEntity, "unknown patient: " + std::to_string(id));
}

void write_json(const std::string& path, const nlohmann::json& j) {
  mgb::io::write_text(path, j.dump(2) + "\n");
}

// Organs referenced by a metric must exist in the cohort before any work.
void check_region(const mgb::Cohort& cohort, const mgb::MetricSpec& spec) {
  for (const auto& p : cohort.patients) {
    if (p.estimates.count(spec.name())) continue;
    if (!p.rois.count(spec.region)) {
      throw mgb::Error(mgb::ErrorCode::kUnknownEntity, "unknown region: " + spec.region);
    }
  }
}

int run_simulate(const SimulateArgs& a) {
  if (a.dims.size() != 3) throw usage("--dims expects X,Y,Z");
  mgb::CohortConfig cfg;
  cfg.n_patients = a.patients;
  cfg.n_recons = a.recons;
  cfg.dims = {a.dims[0], a.dims[1], a.dims[2]};
  cfg.seed = a.seed;
  cfg.noise_sigma = a.noise;
  cfg.smoothing_radius = a.smooth;
  cfg.shift_sigma = a.shift;
  cfg.intensity_jitter_sigma = a.jitter;
  cfg.validate();
  const auto cohort = mgb::generate_cohort(cfg, mgb::default_metric_specs(), a.threads);
  mgb::io::write_cohort(a.out, cohort);
  return 0;
}

int run_calibrate(const CalibrateArgs& a) {
  mgb::validate_alpha(a.alpha);
  const auto spec = mgb::MetricSpec::parse(a.metric);
  const auto cohort = mgb::io::load_cohort(a.cohort);
  if (a.exclude) find_patient(cohort, *a.exclude);
  check_region(cohort, spec);
  std::vector<mgb::CalibrationSample> samples;
  for (const auto& p : cohort.patients) {
    if (a.exclude && p.id == *a.exclude) continue;
    samples.push_back(mgb::labeled_metrics(cohort, p, spec));
  }
  const auto calib = mgb::calibrate_offset(samples, a.alpha);
  write_json(a.out, mgb::io::to_json(calib));
  return 0;
}

int run_predict(const PredictArgs& a) {
  const auto spec = mgb::MetricSpec::parse(a.metric);
  nlohmann::json cj;
  try {
    cj = nlohmann::json::parse(mgb::io::read_text(a.calib));
  } catch (const nlohmann::json::exception& e) {
    throw mgb::Error(mgb::ErrorCode::kIo, "malformed calibration file: " + std::string(e.what()));
  }
  const auto calib = mgb::io::calibration_from_json(cj);
  const auto cohort = mgb::io::load_cohort(a.cohort);
  const auto& patient = find_patient(cohort, a.patient);
  if (!patient.estimates.count(spec.name()) && !patient.rois.count(spec.region)) {
    throw mgb::Error(mgb::ErrorCode::kUnknownEntity, "unknown region: " + spec.region);
  }
  const auto estimates = mgb::estimated_metrics(cohort, patient, spec);
  const auto interval = mgb::predict_interval(estimates.values, calib);
  write_json(a.out, mgb::io::to_json(mgb::retrieve(estimates.values, interval)));
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  mgb::validate_alpha(a.alpha);
  const auto spec = mgb::MetricSpec::parse(a.metric);
  const auto cohort = mgb::io::load_cohort(a.cohort);
  std::string csv;
  if (a.mode == "mc") {
    // Fresh cohorts from the stored generator settings; the directory's
    // volumes are not used.
    const mgb::MetricSpec specs[] = {spec};
    const double alphas[] = {a.alpha};
    if (cohort.config.n_patients < 2) throw usage("mc mode needs at least 2 patients");
    const std::size_t n_ps[] = {cohort.config.n_patients - 1u};
    const auto cells = mgb::marginal_coverage_grid(cohort.config, specs, alphas, n_ps, a.trials, a.threads);
    csv = mgb::io::coverage_csv_header(true) +
          mgb::io::coverage_csv_row(cells.front(), 100.0 * (1.0 - a.alpha));
  } else {
    check_region(cohort, spec);
    mgb::CoverageReport report;
    if (a.mode == "loo") {
      report = mgb::loo_coverage(cohort, spec, a.alpha);
    } else {
      report = mgb::pixelwise_coverage(cohort, spec, a.alpha);
    }
    csv = mgb::io::coverage_csv_header(false) + mgb::io::coverage_csv_row(report);
  }
  mgb::io::write_text(a.out, csv);
  return 0;
}

int run_ttest(const TTestArgs& a) {
  const auto xs = mgb::io::read_column_csv(a.a);
  const auto ys = mgb::io::read_column_csv(a.b);
  write_json(a.out, mgb::io::to_json(mgb::paired_t_test(xs, ys)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric-guided conformal bounds for image reconstructions"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("mgb ") + kToolVersion +
                           "\nvolume format " + std::to_string(mgb::io::kVolumeFormatVersion) +
                           "\ncohort format " + std::to_string(mgb::io::kCohortFormatVersion));

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort directory");
  simulate->add_option("--patients", sim.patients, "Number of patients")->capture_default_str();
  simulate->add_option("--recons", sim.recons, "Reconstructions per patient")->capture_default_str();
  simulate->add_option("--dims", sim.dims, "Volume dims X,Y,Z")->delimiter(',')->expected(3);
  simulate->add_option("--seed", sim.seed, "Generator seed")->capture_default_str();
  simulate->add_option("--noise", sim.noise, "White noise sigma before smoothing")->capture_default_str();
  simulate->add_option("--smooth", sim.smooth, "Box smoothing radius (voxels)")->capture_default_str();
  simulate->add_option("--shift", sim.shift, "Shift sigma (voxels)")->capture_default_str();
  simulate->add_option("--jitter", sim.jitter, "Intensity jitter sigma")->capture_default_str();
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->required();

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the conformal offset for a metric");
  calibrate->add_option("--cohort", cal.cohort, "Cohort directory")->required();
  calibrate->add_option("--metric", cal.metric, "Metric spec")->required();
  calibrate->add_option("--alpha", cal.alpha, "Miscoverage rate")->capture_default_str();
  calibrate->add_option("--exclude-patient", cal.exclude, "Patient id held out of calibration");
  calibrate->add_option("--out", cal.out, "Output JSON")->required();

  PredictArgs pred;
  auto* predict = app.add_subcommand("predict", "Prediction interval and bound retrieval for a patient");
  predict->alias("predict-retrieve");
  predict->add_option("--cohort", pred.cohort, "Cohort directory")->required();
  predict->add_option("--patient", pred.patient, "Patient id")->required();
  predict->add_option("--metric", pred.metric, "Metric spec")->required();
  predict->add_option("--calib", pred.calib, "Calibration JSON")->required();
  predict->add_option("--out", pred.out, "Output JSON")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Coverage of metric intervals");
  evaluate->add_option("--cohort", ev.cohort, "Cohort directory")->required();
  evaluate->add_option("--metric", ev.metric, "Metric spec")->required();
  evaluate->add_option("--alpha", ev.alpha, "Miscoverage rate")->capture_default_str();
  evaluate->add_option("--mode", ev.mode, "loo, pixelwise or mc")
      ->check(CLI::IsMember({"loo", "pixelwise", "mc"}))
      ->capture_default_str();
  evaluate->add_option("--trials", ev.trials, "Monte Carlo trials (mc mode)")->capture_default_str();
  evaluate->add_option("--threads", ev.threads, "Worker threads (0 = all cores)")->capture_default_str();
  evaluate->add_option("--out", ev.out, "Output CSV")->required();

  TTestArgs tt;
  auto* ttest = app.add_subcommand("ttest", "Paired t-test of two single-column CSVs");
  ttest->add_option("--a", tt.a, "First sample")->required();
  ttest->add_option("--b", tt.b, "Second sample")->required();
  ttest->add_option("--out", tt.out, "Output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::fprintf(stderr, "%s", sub->help().c_str());
    return fail(mgb::ErrorCode::kInvalidArgument, e.what());
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*calibrate) return run_calibrate(cal);
    if (*predict) return run_predict(pred);
    if (*evaluate) return run_evaluate(ev);
    if (*ttest) return run_ttest(tt);
  } catch (const mgb::Error& e) {
    return fail(e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(mgb::ErrorCode::kIo, e.what());
  } catch (const std::exception& e) {
    return fail(mgb::ErrorCode::kInvalidArgument, e.what());
  }
  return 0;
}

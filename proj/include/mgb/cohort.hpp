#pragma once

// Synthetic exchangeable patient cohorts.
//
// Each patient is an ellipsoidal body containing two lungs and a heart. A
// reconstruction is the ground truth moved by a whole-voxel shift, scaled by a
// global intensity jitter, plus box-smoothed white noise:
//
//     recon = shift(gt, delta) * (1 + gamma) + smooth(noise_sigma * w, radius)
//
// Random streams (see rng.hpp), all children of Stream(seed):
//     patient i         child(i)
//       phantom         child(i).child(0)
//       recon j         child(i).child(1 + j)   draws delta_x, delta_y, delta_z, gamma
//         noise field   child(i).child(1 + j).child(0), counter = voxel index
// A patient's content therefore does not depend on the cohort size or on
// which other patients were generated.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgb/conformal.hpp"
#include "mgb/metrics.hpp"
#include "mgb/rng.hpp"
#include "mgb/volume.hpp"

namespace mgb {

struct CohortConfig {
  std::uint32_t n_patients = 20;
  std::uint32_t n_recons = 10;
  Dims dims{64, 64, 64};
  Spacing spacing{1.0f, 1.0f, 1.0f};
  std::uint64_t seed = 0;
  /// Standard deviation of the white noise before smoothing.
  double noise_sigma = 1.0;
  std::uint32_t smoothing_radius = 1;
  /// Per-axis shift standard deviation in voxels (rounded to whole voxels).
  double shift_sigma = 0.3;
  double intensity_jitter_sigma = 0.02;

  /// Throws Error(kInvalidArgument) naming the violated constraint.
  void validate() const;
};

struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> semi_axes{};

  /// Normalised squared radius of point p; <= 1 means inside.
  double radius2(double x, double y, double z) const noexcept;
  bool contains(double x, double y, double z) const noexcept { return radius2(x, y, z) <= 1.0; }
  Ellipsoid dilated(double margin) const;
};

struct Organ {
  std::string name;
  Ellipsoid shape;
  /// Intensity at the organ centre; varies linearly along x by +-gradient
  /// across the organ's extent.
  double level = 0.0;
  double gradient = 0.0;

  double intensity_at(double x) const noexcept;
};

struct Phantom {
  Ellipsoid body;
  double body_level = 1.0;
  double background = 0.0;
  /// Painted in order; later organs overwrite earlier ones where they overlap.
  std::vector<Organ> organs;
};

struct GroundTruth {
  Volume volume;
  /// "body" plus one exact mask per organ.
  MaskSet masks;
};

struct PatientRecord {
  std::uint32_t id = 0;
  std::optional<Volume> ground_truth;
  MaskSet masks;
  /// Prior regions of interest used by threshold segmentation.
  MaskSet rois;
  std::vector<Volume> reconstructions;
  /// Metric name -> ground-truth value.
  std::map<std::string, double, std::less<>> truths;
  /// Metric name -> per-reconstruction estimates.
  std::map<std::string, MetricSet, std::less<>> estimates;
};

struct Cohort {
  CohortConfig config;
  std::vector<SegmentationRule> rules;
  std::vector<PatientRecord> patients;
};

/// Metric values only, for Monte Carlo runs that never keep volumes.
struct PatientMetrics {
  std::uint32_t id = 0;
  std::vector<double> truths;            // index-aligned with the spec list
  std::vector<std::vector<double>> estimates;
};

/// Organ windows: lungs [0.1, 0.55], heart [1.2, 1.9], body [0.15, 1e30].
const std::vector<SegmentationRule>& default_segmentation_rules();

/// region_max:heart, v_above:0.3:lung_r, d_at_v:35:lung_r, region_volume:lung_r.
const std::vector<MetricSpec>& default_metric_specs();

/// ROI dilation in voxels applied to each organ ellipsoid.
inline constexpr double kRoiMargin = 3.0;

Phantom sample_phantom(Stream stream, const Dims& dims);

/// Sufficient test that `inner` lies inside `outer`.
bool ellipsoid_within(const Ellipsoid& inner, const Ellipsoid& outer);

GroundTruth render_ground_truth(const Phantom& phantom, const Dims& dims, const Spacing& spacing);

MaskSet regions_of_interest(const Phantom& phantom, const Dims& dims);

Volume simulate_reconstruction(const Volume& gt, Stream stream, const CohortConfig& cfg);

PatientRecord generate_patient(const CohortConfig& cfg, std::uint32_t index,
                               std::span<const MetricSpec> metrics);

/// threads == 0 uses the hardware concurrency. Output does not depend on it.
Cohort generate_cohort(const CohortConfig& cfg,
                       std::span<const MetricSpec> metrics = default_metric_specs(),
                       unsigned threads = 1);

PatientMetrics simulate_patient_metrics(const CohortConfig& cfg, std::uint32_t index,
                                        std::span<const MetricSpec> metrics);

/// Seed of the t-th independent cohort derived from a base seed.
std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial);

}  // namespace mgb

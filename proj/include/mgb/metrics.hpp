#pragma once

// Downstream metrics of a reconstruction inside an organ region. The voxel
// intensity plays the role of dose:
//
//   region_max      hottest voxel (D_0 analogue)
//   d_at_v:<x>      value received by the hottest x% of the region (D_x)
//   v_above:<t>     percent of the region at or above t (V_t)
//   region_volume   region size in cm^3
//
// Textual form: `region_max:<organ>`, `d_at_v:<x>:<organ>`,
// `v_above:<t>:<organ>`, `region_volume:<organ>`.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/volume.hpp"

namespace mgb {

enum class MetricKind { kRegionMax, kDoseAtVolumeFraction, kVolumeFractionAbove, kRegionVolume };

struct MetricSpec {
  MetricKind kind = MetricKind::kRegionMax;
  /// x for d_at_v (percent, strictly inside (0, 100)); t for v_above.
  double parameter = 0.0;
  std::string region;

  static MetricSpec region_max(std::string region);
  static MetricSpec dose_at_volume_fraction(double percent, std::string region);
  static MetricSpec volume_fraction_above(double threshold, std::string region);
  static MetricSpec region_volume(std::string region);

  /// Throws Error(kUnknownEntity, "unknown metric: ...") on bad grammar.
  static MetricSpec parse(std::string_view text);

  /// Canonical text form; numbers in shortest round-trip decimal.
  std::string name() const;

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Threshold segmentation for one organ: voxels in [lo, hi] inside the
/// organ's region of interest.
struct SegmentationRule {
  std::string organ;
  double lo = 0.0;
  double hi = 0.0;
};

double region_max(const Volume& v, const Mask& m);
double dose_at_volume_fraction(const Volume& v, const Mask& m, double percent);
double volume_fraction_above(const Volume& v, const Mask& m, double threshold);
double region_volume(const Mask& m, const Spacing& spacing);

Mask segment_threshold(const Volume& v, double lo, double hi, const Mask& roi);

/// Dispatch on spec.kind with masks looked up by spec.region.
double evaluate_metric(const MetricSpec& spec, const Volume& v, const MaskSet& masks);

/// Segment spec.region in `v` with its rule and ROI, then evaluate. This is the
/// path used for both ground-truth and estimated metrics.
double measure_metric(const MetricSpec& spec, const Volume& v, const MaskSet& rois,
                      std::span<const SegmentationRule> rules);

/// measure_metric for several specs; each region is segmented once.
std::vector<double> measure_metrics(std::span<const MetricSpec> specs, const Volume& v,
                                    const MaskSet& rois, std::span<const SegmentationRule> rules);

const SegmentationRule& find_rule(std::span<const SegmentationRule> rules,
                                  std::string_view organ);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_number(double value);

}  // namespace mgb

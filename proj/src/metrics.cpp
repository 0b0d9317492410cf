#include "mgb/metrics.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "mgb/conformal.hpp"
#include "mgb/error.hpp"
#include "mgb/simd/kernels.hpp"

namespace mgb {

namespace {

[[noreturn]] void unknown_metric(std::string_view text) {
  throw Error(ErrorCode::kUnknownEntity, "unknown metric: " + std::string(text));
}

double parse_number(std::string_view token, std::string_view whole) {
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) unknown_metric(whole);
  return value;
}

std::size_t require_region(const Volume& v, const Mask& m) {
  require_same_dims(v.dims(), m.dims());
  const std::size_t count = m.count();
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "empty region");
  return count;
}

// Smallest float f with (double)f >= t, so that float comparisons against f
// agree with double comparisons against t.
float float_at_least(double t) {
  float f = static_cast<float>(t);
  if (static_cast<double>(f) < t) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

float float_at_most(double t) {
  float f = static_cast<float>(t);
  if (static_cast<double>(f) > t) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  return f;
}

const Mask& find_mask(const MaskSet& masks, std::string_view region) {
  const auto it = masks.find(region);
  if (it == masks.end()) {
    throw Error(ErrorCode::kUnknownEntity, "unknown region: " + std::string(region));
  }
  return it->second;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

MetricSpec MetricSpec::region_max(std::string region) {
  return {MetricKind::kRegionMax, 0.0, std::move(region)};
}

MetricSpec MetricSpec::dose_at_volume_fraction(double percent, std::string region) {
  if (!(percent > 0.0 && percent < 100.0)) {
    throw Error(ErrorCode::kUnknownEntity, "unknown metric: d_at_v fraction must lie in (0, 100)");
  }
  return {MetricKind::kDoseAtVolumeFraction, percent, std::move(region)};
}

MetricSpec MetricSpec::volume_fraction_above(double threshold, std::string region) {
  if (!std::isfinite(threshold)) {
    throw Error(ErrorCode::kUnknownEntity, "unknown metric: v_above threshold must be finite");
  }
  return {MetricKind::kVolumeFractionAbove, threshold, std::move(region)};
}

MetricSpec MetricSpec::region_volume(std::string region) {
  return {MetricKind::kRegionVolume, 0.0, std::move(region)};
}

MetricSpec MetricSpec::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  for (auto p : parts) {
    if (p.empty()) unknown_metric(text);
  }
  const auto kind = parts.front();
  if (kind == "region_max" && parts.size() == 2) return region_max(std::string(parts[1]));
  if (kind == "region_volume" && parts.size() == 2) return region_volume(std::string(parts[1]));
  if (kind == "d_at_v" && parts.size() == 3) {
    const double x = parse_number(parts[1], text);
    if (!(x > 0.0 && x < 100.0)) unknown_metric(text);
    return dose_at_volume_fraction(x, std::string(parts[2]));
  }
  if (kind == "v_above" && parts.size() == 3) {
    return volume_fraction_above(parse_number(parts[1], text), std::string(parts[2]));
  }
  unknown_metric(text);
}

std::string MetricSpec::name() const {
  switch (kind) {
    case MetricKind::kRegionMax: return "region_max:" + region;
    case MetricKind::kDoseAtVolumeFraction: return "d_at_v:" + format_number(parameter) + ":" + region;
    case MetricKind::kVolumeFractionAbove: return "v_above:" + format_number(parameter) + ":" + region;
    case MetricKind::kRegionVolume: return "region_volume:" + region;
  }
  return {};
}

double region_max(const Volume& v, const Mask& m) {
  require_region(v, m);
  return simd::active_kernels().masked_max(v.data().data(), m.bits().data(), v.size());
}

double dose_at_volume_fraction(const Volume& v, const Mask& m, double percent) {
  if (!(percent > 0.0 && percent < 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "volume fraction must lie in (0, 100)");
  }
  const auto values = mask_values(v, m);
  return sample_quantile(values, QuantileLevel(1.0 - percent / 100.0));
}

double volume_fraction_above(const Volume& v, const Mask& m, double threshold) {
  const std::size_t total = require_region(v, m);
  const std::size_t hits = simd::active_kernels().masked_count_at_least(
      v.data().data(), m.bits().data(), v.size(), float_at_least(threshold));
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

double region_volume(const Mask& m, const Spacing& spacing) {
  return static_cast<double>(m.count()) * spacing.voxel_volume_mm3() / 1000.0;
}

Mask segment_threshold(const Volume& v, double lo, double hi, const Mask& roi) {
  require_same_dims(v.dims(), roi.dims());
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw Error(ErrorCode::kInvalidArgument, "segmentation window requires lo <= hi");
  }
  std::vector<std::uint8_t> bits(v.size());
  simd::active_kernels().window_mask(v.data().data(), roi.bits().data(), v.size(),
                                     float_at_least(lo), float_at_most(hi), bits.data());
  return Mask(v.dims(), std::move(bits));
}

double evaluate_metric(const MetricSpec& spec, const Volume& v, const MaskSet& masks) {
  const Mask& m = find_mask(masks, spec.region);
  switch (spec.kind) {
    case MetricKind::kRegionMax: return region_max(v, m);
    case MetricKind::kDoseAtVolumeFraction: return dose_at_volume_fraction(v, m, spec.parameter);
    case MetricKind::kVolumeFractionAbove: return volume_fraction_above(v, m, spec.parameter);
    case MetricKind::kRegionVolume:
      require_same_dims(v.dims(), m.dims());
      return region_volume(m, v.spacing());
  }
  throw Error(ErrorCode::kUnknownEntity, "unknown metric kind");
}

const SegmentationRule& find_rule(std::span<const SegmentationRule> rules,
                                  std::string_view organ) {
  for (const auto& rule : rules) {
    if (rule.organ == organ) return rule;
  }
  throw Error(ErrorCode::kUnknownEntity, "unknown region: " + std::string(organ));
}

double measure_metric(const MetricSpec& spec, const Volume& v, const MaskSet& rois,
                      std::span<const SegmentationRule> rules) {
  const SegmentationRule& rule = find_rule(rules, spec.region);
  MaskSet segmented;
  segmented.emplace(spec.region, segment_threshold(v, rule.lo, rule.hi, find_mask(rois, spec.region)));
  return evaluate_metric(spec, v, segmented);
}

std::vector<double> measure_metrics(std::span<const MetricSpec> specs, const Volume& v,
                                    const MaskSet& rois, std::span<const SegmentationRule> rules) {
  MaskSet segmented;
  std::vector<double> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    if (segmented.find(spec.region) == segmented.end()) {
      const SegmentationRule& rule = find_rule(rules, spec.region);
      segmented.emplace(spec.region, segment_threshold(v, rule.lo, rule.hi, find_mask(rois, spec.region)));
    }
    out.push_back(evaluate_metric(spec, v, segmented));
  }
  return out;
}

}  // namespace mgb

#include "mgb/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mgb/detail/parallel.hpp"
#include "mgb/error.hpp"
#include "mgb/simd/kernels.hpp"

namespace mgb {

namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

// Organ placement relative to the body, in body-normalised coordinates:
// centre template, +-jitter on each centre coordinate, and semi-axis ranges.
struct OrganTemplate {
  const char* name;
  std::array<double, 3> center;
  std::array<std::array<double, 2>, 3> semi;
  std::array<double, 2> level;
};

constexpr double kCenterJitter = 0.05;
constexpr std::array<double, 2> kGradient{0.04, 0.08};

constexpr OrganTemplate kOrgans[] = {
    {"lung_r", {-0.45, 0.05, 0.0}, {{{0.22, 0.28}, {0.30, 0.36}, {0.32, 0.40}}}, {0.25, 0.35}},
    {"lung_l", {0.45, 0.05, 0.0}, {{{0.22, 0.28}, {0.30, 0.36}, {0.32, 0.40}}}, {0.25, 0.35}},
    {"heart", {0.05, -0.35, 0.0}, {{{0.16, 0.22}, {0.16, 0.22}, {0.16, 0.22}}}, {1.40, 1.60}},
};

// Voxel index range along one axis that can hold points of e, padded by one
// voxel so rounding in radius2() never reaches past it.
std::pair<std::size_t, std::size_t> axis_range(const Ellipsoid& e, int axis, std::uint32_t len) {
  const double lo = std::floor(e.center[axis] - e.semi_axes[axis]) - 1.0;
  const double hi = std::ceil(e.center[axis] + e.semi_axes[axis]) + 1.0;
  const double top = static_cast<double>(len);
  return {static_cast<std::size_t>(std::clamp(lo, 0.0, top)),
          static_cast<std::size_t>(std::clamp(hi + 1.0, 0.0, top))};
}

Mask ellipsoid_mask(const Ellipsoid& e, const Dims& dims) {
  std::vector<std::uint8_t> bits(dims.count(), 0);
  const auto [x0, x1] = axis_range(e, 0, dims.x);
  const auto [y0, y1] = axis_range(e, 1, dims.y);
  const auto [z0, z1] = axis_range(e, 2, dims.z);
  for (std::size_t z = z0; z < z1; ++z) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        bits[dims.index(x, y, z)] = e.contains(static_cast<double>(x), static_cast<double>(y),
                                               static_cast<double>(z));
      }
    }
  }
  return Mask(dims, std::move(bits));
}

}  // namespace

void CohortConfig::validate() const {
  if (n_patients < 1) bad_config("n_patients must be >= 1");
  if (n_recons < 2) bad_config("n_recons must be >= 2");
  if (dims.x == 0 || dims.y == 0 || dims.z == 0) bad_config("dims must be positive");
  if (!(spacing.x > 0.0f && spacing.y > 0.0f && spacing.z > 0.0f)) bad_config("spacing must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad_config("noise_sigma must be >= 0");
  if (!(shift_sigma >= 0.0) || !std::isfinite(shift_sigma)) bad_config("shift_sigma must be >= 0");
  if (!(intensity_jitter_sigma >= 0.0) || !std::isfinite(intensity_jitter_sigma)) {
    bad_config("intensity_jitter_sigma must be >= 0");
  }
}

double Ellipsoid::radius2(double x, double y, double z) const noexcept {
  const double dx = (x - center[0]) / semi_axes[0];
  const double dy = (y - center[1]) / semi_axes[1];
  const double dz = (z - center[2]) / semi_axes[2];
  return dx * dx + dy * dy + dz * dz;
}

Ellipsoid Ellipsoid::dilated(double margin) const {
  Ellipsoid e = *this;
  for (auto& a : e.semi_axes) a += margin;
  return e;
}

double Organ::intensity_at(double x) const noexcept {
  const double u = std::clamp((x - shape.center[0]) / shape.semi_axes[0], -1.0, 1.0);
  return level + gradient * u;
}

const std::vector<SegmentationRule>& default_segmentation_rules() {
  static const std::vector<SegmentationRule> rules{
      {"body", 0.15, 1e30},
      {"lung_r", 0.1, 0.55},
      {"lung_l", 0.1, 0.55},
      {"heart", 1.2, 1.9},
  };
  return rules;
}

const std::vector<MetricSpec>& default_metric_specs() {
  static const std::vector<MetricSpec> specs{
      MetricSpec::region_max("heart"),
      MetricSpec::volume_fraction_above(0.3, "lung_r"),
      MetricSpec::dose_at_volume_fraction(35.0, "lung_r"),
      MetricSpec::region_volume("lung_r"),
  };
  return specs;
}

bool ellipsoid_within(const Ellipsoid& inner, const Ellipsoid& outer) {
  double center2 = 0.0;
  double widest = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double c = (inner.center[a] - outer.center[a]) / outer.semi_axes[a];
    center2 += c * c;
    widest = std::max(widest, inner.semi_axes[a] / outer.semi_axes[a]);
  }
  return std::sqrt(center2) + widest <= 1.0;
}

Phantom sample_phantom(Stream stream, const Dims& dims) {
  const std::array<double, 3> extent{static_cast<double>(dims.x), static_cast<double>(dims.y),
                                     static_cast<double>(dims.z)};
  Phantom p;
  for (int a = 0; a < 3; ++a) {
    p.body.center[a] = (extent[a] - 1.0) / 2.0 + stream.uniform(-0.02, 0.02) * extent[a];
    p.body.semi_axes[a] = stream.uniform(0.40, 0.45) * extent[a];
  }
  p.body_level = stream.uniform(0.9, 1.1);
  p.background = 0.0;
  for (const auto& t : kOrgans) {
    Organ organ;
    organ.name = t.name;
    for (int a = 0; a < 3; ++a) {
      const double c = t.center[a] + stream.uniform(-kCenterJitter, kCenterJitter);
      organ.shape.center[a] = p.body.center[a] + c * p.body.semi_axes[a];
      organ.shape.semi_axes[a] = stream.uniform(t.semi[a][0], t.semi[a][1]) * p.body.semi_axes[a];
    }
    organ.level = stream.uniform(t.level[0], t.level[1]);
    organ.gradient = stream.uniform(kGradient[0], kGradient[1]);
    p.organs.push_back(std::move(organ));
  }
  return p;
}

GroundTruth render_ground_truth(const Phantom& phantom, const Dims& dims, const Spacing& spacing) {
  const std::size_t n = dims.count();
  std::vector<float> data(n, static_cast<float>(phantom.background));
  // 0 = outside, 1 = body, 2 + k = organ k.
  std::vector<std::uint16_t> label(n, 0);
  const auto [x0, x1] = axis_range(phantom.body, 0, dims.x);
  const auto [y0, y1] = axis_range(phantom.body, 1, dims.y);
  const auto [z0, z1] = axis_range(phantom.body, 2, dims.z);
  for (std::size_t z = z0; z < z1; ++z) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        const double px = static_cast<double>(x), py = static_cast<double>(y), pz = static_cast<double>(z);
        if (!phantom.body.contains(px, py, pz)) continue;
        const std::size_t i = dims.index(x, y, z);
        label[i] = 1;
        data[i] = static_cast<float>(phantom.body_level);
        for (std::size_t k = 0; k < phantom.organs.size(); ++k) {
          const Organ& organ = phantom.organs[k];
          if (organ.shape.contains(px, py, pz)) {
            label[i] = static_cast<std::uint16_t>(2 + k);
            data[i] = static_cast<float>(organ.intensity_at(px));
          }
        }
      }
    }
  }
  GroundTruth gt{Volume(dims, spacing, std::move(data)), {}};
  std::vector<std::uint8_t> body(n);
  for (std::size_t i = 0; i < n; ++i) body[i] = label[i] != 0;
  gt.masks.emplace("body", Mask(dims, std::move(body)));
  for (std::size_t k = 0; k < phantom.organs.size(); ++k) {
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = label[i] == 2 + k;
    gt.masks.insert_or_assign(phantom.organs[k].name, Mask(dims, std::move(bits)));
  }
  return gt;
}

MaskSet regions_of_interest(const Phantom& phantom, const Dims& dims) {
  MaskSet rois;
  rois.emplace("body", ellipsoid_mask(phantom.body.dilated(kRoiMargin), dims));
  for (const auto& organ : phantom.organs) {
    rois.insert_or_assign(organ.name, ellipsoid_mask(organ.shape.dilated(kRoiMargin), dims));
  }
  return rois;
}

Volume simulate_reconstruction(const Volume& gt, Stream stream, const CohortConfig& cfg) {
  std::array<std::int32_t, 3> offset{};
  for (auto& o : offset) o = static_cast<std::int32_t>(std::round(cfg.shift_sigma * stream.normal()));
  const double gamma = cfg.intensity_jitter_sigma * stream.normal();

  const Dims& dims = gt.dims();
  std::vector<float> base = (offset == std::array<std::int32_t, 3>{})
                                ? std::vector<float>(gt.data().begin(), gt.data().end())
                                : shift_clamped(gt.data(), dims, offset);
  const auto& k = simd::active_kernels();
  const auto gain = static_cast<float>(1.0 + gamma);
  if (cfg.noise_sigma > 0.0) {
    // w is uniform on (-1, 1) in steps of 2^-23, so sqrt(3) gives unit variance.
    const auto step = static_cast<float>(cfg.noise_sigma * std::sqrt(3.0) * 0x1.0p-23);
    const std::size_t n = base.size();
    const auto buffers = std::make_unique_for_overwrite<float[]>(3 * n);
    const std::span<float> noise(buffers.get(), n), smoothed(buffers.get() + n, n),
        scratch(buffers.get() + 2 * n, n);
    k.uniform_noise(stream.child(0).key(), 0, step, noise.data(), n);
    box_smooth(noise, dims, cfg.smoothing_radius, smoothed, scratch);
    k.scale_add(base.data(), gain, smoothed.data(), base.data(), n);
  } else if (gamma != 0.0) {
    k.scale(base.data(), base.size(), gain);
  }
  return Volume(dims, gt.spacing(), std::move(base));
}

namespace {

struct PatientSetup {
  Stream stream;
  GroundTruth gt;
  MaskSet rois;
};

PatientSetup setup_patient(const CohortConfig& cfg, std::uint32_t index) {
  const Stream patient = Stream(cfg.seed).child(index);
  const Phantom phantom = sample_phantom(patient.child(0), cfg.dims);
  return {patient, render_ground_truth(phantom, cfg.dims, cfg.spacing),
          regions_of_interest(phantom, cfg.dims)};
}

}  // namespace

PatientRecord generate_patient(const CohortConfig& cfg, std::uint32_t index,
                               std::span<const MetricSpec> metrics) {
  cfg.validate();
  auto setup = setup_patient(cfg, index);
  const auto& rules = default_segmentation_rules();
  PatientRecord record;
  record.id = index;
  for (std::uint32_t j = 0; j < cfg.n_recons; ++j) {
    record.reconstructions.push_back(
        simulate_reconstruction(setup.gt.volume, setup.stream.child(1 + j), cfg));
  }
  const auto truths = measure_metrics(metrics, setup.gt.volume, setup.rois, rules);
  std::vector<std::vector<double>> per_recon;
  for (const auto& recon : record.reconstructions) {
    per_recon.push_back(measure_metrics(metrics, recon, setup.rois, rules));
  }
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const std::string name = metrics[m].name();
    record.truths[name] = truths[m];
    MetricSet set{std::to_string(index), name, {}};
    for (const auto& values : per_recon) set.values.push_back(values[m]);
    record.estimates[name] = std::move(set);
  }
  record.ground_truth = std::move(setup.gt.volume);
  record.masks = std::move(setup.gt.masks);
  record.rois = std::move(setup.rois);
  return record;
}

Cohort generate_cohort(const CohortConfig& cfg, std::span<const MetricSpec> metrics,
                       unsigned threads) {
  cfg.validate();
  Cohort cohort{cfg, default_segmentation_rules(), {}};
  std::vector<std::optional<PatientRecord>> slots(cfg.n_patients);
  detail::parallel_for(cfg.n_patients, threads, [&](std::size_t i) {
    slots[i] = generate_patient(cfg, static_cast<std::uint32_t>(i), metrics);
  });
  cohort.patients.reserve(cfg.n_patients);
  for (auto& slot : slots) cohort.patients.push_back(std::move(*slot));
  return cohort;
}

PatientMetrics simulate_patient_metrics(const CohortConfig& cfg, std::uint32_t index,
                                        std::span<const MetricSpec> metrics) {
  cfg.validate();
  const auto setup = setup_patient(cfg, index);
  const auto& rules = default_segmentation_rules();
  PatientMetrics out;
  out.id = index;
  out.estimates.resize(metrics.size());
  out.truths = measure_metrics(metrics, setup.gt.volume, setup.rois, rules);
  for (std::uint32_t j = 0; j < cfg.n_recons; ++j) {
    const Volume recon = simulate_reconstruction(setup.gt.volume, setup.stream.child(1 + j), cfg);
    const auto values = measure_metrics(metrics, recon, setup.rois, rules);
    for (std::size_t m = 0; m < metrics.size(); ++m) out.estimates[m].push_back(values[m]);
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial) {
  constexpr std::uint64_t kTrialDomain = 0x545249414C53ULL;  // "TRIALS"
  return child_key(base_seed ^ kTrialDomain, trial);
}

}  // namespace mgb

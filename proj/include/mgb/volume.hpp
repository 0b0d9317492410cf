#pragma once

// 3-D scalar fields, binary masks, and the voxel-wise quantile baseline.
//
// Voxel order is x-fastest, then y, then z:
//     index(x, y, z) = x + dims.x * (y + dims.y * z)

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mgb {

struct Dims {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t z = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(x) * y * z;
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + x * (j + static_cast<std::size_t>(y) * k);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Millimetres per voxel along each axis.
struct Spacing {
  float x = 1.0f;
  float y = 1.0f;
  float z = 1.0f;

  double voxel_volume_mm3() const noexcept {
    return static_cast<double>(x) * static_cast<double>(y) * static_cast<double>(z);
  }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

class Volume {
 public:
  /// Validates dims (all > 0), spacing (all > 0), data length and finiteness.
  Volume(Dims dims, Spacing spacing, std::vector<float> data);

  static Volume filled(Dims dims, Spacing spacing, float value);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::span<const float> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[dims_.index(x, y, z)];
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<float> data_;
};

class Mask {
 public:
  Mask(Dims dims, std::vector<std::uint8_t> bits);

  static Mask empty(Dims dims) { return Mask(dims, std::vector<std::uint8_t>(dims.count(), 0)); }
  static Mask full(Dims dims) { return Mask(dims, std::vector<std::uint8_t>(dims.count(), 1)); }

  const Dims& dims() const noexcept { return dims_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  std::size_t count() const noexcept { return count_; }
  bool subset_of(const Mask& other) const;

  friend bool operator==(const Mask& a, const Mask& b) { return a.dims_ == b.dims_ && a.bits_ == b.bits_; }

 private:
  Dims dims_;
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

using MaskSet = std::map<std::string, Mask, std::less<>>;

struct VoxelwiseBounds {
  Volume lower;
  Volume upper;
  double alpha;
};

/// Per-voxel interpolated quantiles at alpha/2 and 1 - alpha/2 across one
/// patient's reconstructions. No conformal adjustment.
VoxelwiseBounds voxelwise_bounds(std::span<const Volume> recons, double alpha);

/// Sum of absolute voxel differences.
double l1_distance(const Volume& a, const Volume& b);

/// Voxel values under the mask, x-fastest order. Throws "empty region".
std::vector<double> mask_values(const Volume& v, const Mask& m);

/// Separable box mean of the given radius; the window is truncated at the
/// volume border and averaged over the voxels that remain.
std::vector<float> box_smooth(std::span<const float> data, Dims dims, unsigned radius);

/// Same result written to `out`; `scratch` is clobbered. Both must hold
/// dims.count() values and neither may alias `data`.
void box_smooth(std::span<const float> data, Dims dims, unsigned radius, std::span<float> out,
                std::span<float> scratch);

/// result(p) = v(clamp(p - offset)) per axis, i.e. the content moves by
/// +offset voxels and the border is replicated.
std::vector<float> shift_clamped(std::span<const float> data, Dims dims,
                                 const std::array<std::int32_t, 3>& offset);

void require_same_dims(const Dims& a, const Dims& b);

}  // namespace mgb

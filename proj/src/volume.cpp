#include "mgb/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "mgb/conformal.hpp"
#include "mgb/error.hpp"
#include "mgb/simd/kernels.hpp"

namespace mgb {

namespace {

void check_dims(const Dims& dims) {
  if (dims.x == 0 || dims.y == 0 || dims.z == 0) {
    throw Error(ErrorCode::kInvalidArgument, "volume dimensions must be positive");
  }
}

}  // namespace

void require_same_dims(const Dims& a, const Dims& b) {
  if (!(a == b)) throw Error(ErrorCode::kInvalidArgument, "incompatible volumes");
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_dims(dims_);
  if (!(spacing_.x > 0.0f && spacing_.y > 0.0f && spacing_.z > 0.0f) ||
      !std::isfinite(spacing_.x) || !std::isfinite(spacing_.y) || !std::isfinite(spacing_.z)) {
    throw Error(ErrorCode::kInvalidArgument, "voxel spacing must be positive");
  }
  if (data_.size() != dims_.count()) {
    throw Error(ErrorCode::kInvalidArgument, "volume data length does not match dimensions");
  }
  // Exponent all ones means inf or nan; written as a reduction so it vectorizes.
  std::uint32_t special = 0;
  for (float v : data_) special |= ((std::bit_cast<std::uint32_t>(v) & 0x7f800000u) == 0x7f800000u);
  if (special) throw Error(ErrorCode::kInvalidArgument, "non-finite input");
}

Volume Volume::filled(Dims dims, Spacing spacing, float value) {
  return Volume(dims, spacing, std::vector<float>(dims.count(), value));
}

Mask::Mask(Dims dims, std::vector<std::uint8_t> bits) : dims_(dims), bits_(std::move(bits)) {
  check_dims(dims_);
  if (bits_.size() != dims_.count()) {
    throw Error(ErrorCode::kInvalidArgument, "mask length does not match dimensions");
  }
  constexpr std::uint64_t kLowBits = 0x0101010101010101ULL;
  std::size_t count = 0;
  std::size_t i = 0;
  // Eight bytes at a time while they are already 0/1; the multiply sums them.
  for (; i + 8 <= bits_.size(); i += 8) {
    std::uint64_t w;
    std::memcpy(&w, bits_.data() + i, 8);
    if (w & ~kLowBits) {
      for (std::size_t j = i; j < i + 8; ++j) bits_[j] = bits_[j] != 0 ? 1 : 0;
      std::memcpy(&w, bits_.data() + i, 8);
    }
    count += static_cast<std::size_t>((w * kLowBits) >> 56);
  }
  for (; i < bits_.size(); ++i) {
    bits_[i] = bits_[i] != 0 ? 1 : 0;
    count += bits_[i];
  }
  count_ = count;
}

bool Mask::subset_of(const Mask& other) const {
  require_same_dims(dims_, other.dims_);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

VoxelwiseBounds voxelwise_bounds(std::span<const Volume> recons, double alpha) {
  validate_alpha(alpha);
  if (recons.empty()) throw Error(ErrorCode::kInvalidArgument, "empty sample");
  const Volume& first = recons.front();
  std::vector<const float*> samples;
  samples.reserve(recons.size());
  for (const auto& r : recons) {
    require_same_dims(first.dims(), r.dims());
    if (!(first.spacing() == r.spacing())) {
      throw Error(ErrorCode::kInvalidArgument, "incompatible volumes");
    }
    samples.push_back(r.data().data());
  }
  const std::size_t n = first.size();
  std::vector<float> lower(n), upper(n);
  simd::active_kernels().voxel_quantile_pair(samples, n, alpha / 2.0, 1.0 - alpha / 2.0,
                                              lower.data(), upper.data());
  return {Volume(first.dims(), first.spacing(), std::move(lower)),
          Volume(first.dims(), first.spacing(), std::move(upper)), alpha};
}

double l1_distance(const Volume& a, const Volume& b) {
  require_same_dims(a.dims(), b.dims());
  return simd::active_kernels().l1_distance(a.data().data(), b.data().data(), a.size());
}

std::vector<double> mask_values(const Volume& v, const Mask& m) {
  require_same_dims(v.dims(), m.dims());
  const std::size_t count = m.count();
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "empty region");
  std::vector<double> out;
  out.reserve(count);
  const auto bits = m.bits();
  const auto data = v.data();
  std::size_t i = 0;
  // Masks are mostly empty; skip zero words.
  for (; i + 8 <= data.size(); i += 8) {
    std::uint64_t w;
    std::memcpy(&w, bits.data() + i, 8);
    if (w == 0) continue;
    for (std::size_t j = i; j < i + 8; ++j) {
      if (bits[j]) out.push_back(data[j]);
    }
  }
  for (; i < data.size(); ++i) {
    if (bits[i]) out.push_back(data[i]);
  }
  return out;
}

void box_smooth(std::span<const float> data, Dims dims, unsigned radius, std::span<float> out,
                std::span<float> scratch) {
  check_dims(dims);
  if (data.size() != dims.count() || out.size() != data.size() || scratch.size() != data.size()) {
    throw Error(ErrorCode::kInvalidArgument, "volume data length does not match dimensions");
  }
  if (radius == 0) {
    std::copy(data.begin(), data.end(), out.begin());
    return;
  }
  const auto& k = simd::active_kernels();
  const std::size_t total = data.size();
  const auto r = static_cast<std::ptrdiff_t>(radius);

  // out[p] = mean of in[p + o * stride] over the clipped window along one
  // axis, always summed from the lowest coordinate up. Positions whose window
  // is not clipped are done as whole-array slices; the rest are redone below.
  auto pass = [&](const float* in, float* out, std::size_t stride, std::size_t len) {
    const auto span = static_cast<std::ptrdiff_t>(stride);
    const std::ptrdiff_t begin = r * span;
    const std::ptrdiff_t end = static_cast<std::ptrdiff_t>(total) - r * span;
    if (end > begin) {
      k.window_mean(in, stride, static_cast<std::size_t>(2 * r + 1), 1.0f / static_cast<float>(2 * r + 1),
                    out + begin, static_cast<std::size_t>(end - begin));
    }
    const auto ilen = static_cast<std::ptrdiff_t>(len);
    const std::size_t block = stride * len;
    for (std::size_t base = 0; base < total; base += block) {
      for (std::ptrdiff_t i = 0; i < ilen; ++i) {
        if (i >= r && i < ilen - r) continue;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - r);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(ilen - 1, i + r);
        const float scale = 1.0f / static_cast<float>(hi - lo + 1);
        k.window_mean(in + base + static_cast<std::size_t>(lo) * stride, stride,
                      static_cast<std::size_t>(hi - lo + 1), scale,
                      out + base + static_cast<std::size_t>(i) * stride, stride);
      }
    }
  };

  pass(data.data(), out.data(), 1, dims.x);
  pass(out.data(), scratch.data(), dims.x, dims.y);
  pass(scratch.data(), out.data(), std::size_t{dims.x} * dims.y, dims.z);
}

std::vector<float> box_smooth(std::span<const float> data, Dims dims, unsigned radius) {
  std::vector<float> out(data.size()), scratch(data.size());
  box_smooth(data, dims, radius, out, scratch);
  return out;
}

std::vector<float> shift_clamped(std::span<const float> data, Dims dims,
                                 const std::array<std::int32_t, 3>& offset) {
  check_dims(dims);
  std::vector<float> out(data.size());
  auto source = [](std::ptrdiff_t i, std::int32_t off, std::uint32_t len) {
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(i - off, 0, static_cast<std::ptrdiff_t>(len) - 1));
  };
  for (std::size_t z = 0; z < dims.z; ++z) {
    const std::size_t sz = source(static_cast<std::ptrdiff_t>(z), offset[2], dims.z);
    for (std::size_t y = 0; y < dims.y; ++y) {
      const std::size_t sy = source(static_cast<std::ptrdiff_t>(y), offset[1], dims.y);
      const float* src_row = data.data() + dims.index(0, sy, sz);
      float* dst_row = out.data() + dims.index(0, y, z);
      for (std::size_t x = 0; x < dims.x; ++x) {
        dst_row[x] = src_row[source(static_cast<std::ptrdiff_t>(x), offset[0], dims.x)];
      }
    }
  }
  return out;
}

}  // namespace mgb

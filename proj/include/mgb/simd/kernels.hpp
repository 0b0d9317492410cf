#pragma once

// Data-parallel inner loops behind the volume, metric and simulation code.
//
// Every kernel has a scalar reference and, on x86-64 builds, an AVX2 variant.
// The table in use is chosen once at runtime from the CPU's feature bits and
// can be forced with select_backend(). All kernels except l1_distance produce
// bit-identical results across backends; l1_distance reorders a floating-point
// sum and agrees to within rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace mgb::simd {

struct KernelTable {
  std::string_view name;

  /// sum |a[i] - b[i]|, accumulated in double.
  double (*l1_distance)(const float* a, const float* b, std::size_t n);

  /// Maximum of v[i] over mask[i] != 0. Requires at least one set mask byte.
  float (*masked_max)(const float* v, const std::uint8_t* mask, std::size_t n);

  /// Count of i with mask[i] != 0 and v[i] >= threshold.
  std::size_t (*masked_count_at_least)(const float* v, const std::uint8_t* mask,
                                       std::size_t n, float threshold);

  /// out[i] = roi[i] != 0 && lo <= v[i] && v[i] <= hi.
  void (*window_mask)(const float* v, const std::uint8_t* roi, std::size_t n,
                      float lo, float hi, std::uint8_t* out);

  /// out[i] = (in[i] + in[i + stride] + ... + in[i + (taps - 1) * stride]) * factor,
  /// summed left to right. taps >= 1.
  void (*window_mean)(const float* in, std::size_t stride, std::size_t taps, float factor,
                      float* out, std::size_t n);

  /// data[i] *= factor.
  void (*scale)(float* data, std::size_t n, float factor);

  /// out[i] = a[i] * s + b[i], rounded after the multiply.
  void (*scale_add)(const float* a, float s, const float* b, float* out, std::size_t n);

  /// Counter-based white noise: out[i] = w_i * step, where w_i is the odd
  /// integer 2*(mix64(key + (counter0 + i + 1) * golden) >> 41) + 1 - 2^23.
  void (*uniform_noise)(std::uint64_t key, std::uint64_t counter0, float step,
                        float* out, std::size_t n);

  /// Per-voxel interpolated quantiles across samples.size() volumes.
  /// lower[i] / upper[i] get the quantiles at lo_level / hi_level of
  /// {samples[j][i]}.
  void (*voxel_quantile_pair)(std::span<const float* const> samples, std::size_t n,
                              double lo_level, double hi_level, float* lower,
                              float* upper);
};

enum class Backend { kAuto, kScalar, kAvx2 };

const KernelTable& scalar_kernels();

/// nullptr when the build lacks AVX2 support or the CPU does not report it.
const KernelTable* avx2_kernels();

/// Table used by the library. Auto picks the widest supported backend.
const KernelTable& active_kernels();

/// Returns false (and leaves the selection unchanged) when the backend is
/// unavailable on this machine.
bool select_backend(Backend backend);

}  // namespace mgb::simd

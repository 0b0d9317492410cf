#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mgb/detail/interpolate.hpp"
#include "mgb/rng.hpp"
#include "mgb/simd/kernels.hpp"

namespace mgb::simd {

namespace {

double l1_distance(const float* a, const float* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return sum;
}

float masked_max(const float* v, const std::uint8_t* mask, std::size_t n) {
  float best = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] && v[i] > best) best = v[i];
  }
  return best;
}

std::size_t masked_count_at_least(const float* v, const std::uint8_t* mask,
                                  std::size_t n, float threshold) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    count += (mask[i] != 0 && v[i] >= threshold) ? 1 : 0;
  }
  return count;
}

void window_mask(const float* v, const std::uint8_t* roi, std::size_t n, float lo,
                 float hi, std::uint8_t* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (roi[i] != 0 && lo <= v[i] && v[i] <= hi) ? 1 : 0;
  }
}

void window_mean(const float* in, std::size_t stride, std::size_t taps, float factor, float* out,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    float acc = in[i];
    for (std::size_t t = 1; t < taps; ++t) acc += in[i + t * stride];
    out[i] = acc * factor;
  }
}

void scale(float* data, std::size_t n, float factor) {
  for (std::size_t i = 0; i < n; ++i) data[i] *= factor;
}

void scale_add(const float* a, float s, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float product = a[i] * s;
    out[i] = product + b[i];
  }
}

void uniform_noise(std::uint64_t key, std::uint64_t counter0, float step, float* out,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t h = stream_output(key, counter0 + i);
    const auto w = static_cast<std::int32_t>(2 * (h >> 41) + 1) - (1 << 23);
    out[i] = static_cast<float>(w) * step;
  }
}

void voxel_quantile_pair(std::span<const float* const> samples, std::size_t n,
                         double lo_level, double hi_level, float* lower, float* upper) {
  const std::size_t m = samples.size();
  const auto lo_pos = detail::quantile_position(lo_level, m);
  const auto hi_pos = detail::quantile_position(hi_level, m);
  std::vector<float> column(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) column[j] = samples[j][i];
    std::sort(column.begin(), column.end());
    lower[i] = static_cast<float>(detail::interpolate(
        column[lo_pos.index], column[lo_pos.next], lo_pos.fraction));
    upper[i] = static_cast<float>(detail::interpolate(
        column[hi_pos.index], column[hi_pos.next], hi_pos.fraction));
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",      l1_distance, masked_max,    masked_count_at_least,
      window_mask,   window_mean,    scale,         scale_add,
      uniform_noise, voxel_quantile_pair,
  };
  return table;
}

}  // namespace mgb::simd

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "mgb/detail/interpolate.hpp"
#include "mgb/rng.hpp"
#include "mgb/simd/kernels.hpp"

namespace mgb::simd {

namespace {

// 8 mask bytes -> 8 lanes of all-ones / all-zeros.
inline __m256 mask_lanes(const std::uint8_t* mask) {
  const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask));
  const __m256i wide = _mm256_cvtepu8_epi32(bytes);
  return _mm256_castsi256_ps(_mm256_cmpgt_epi32(wide, _mm256_setzero_si256()));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

double l1_distance(const float* a, const float* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                                     _mm256_cvtps_pd(_mm256_castps256_ps128(vb)));
    const __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                                     _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)));
    acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign, d1));
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    sum += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return sum;
}

float masked_max(const float* v, const std::uint8_t* mask, std::size_t n) {
  const __m256 neg_inf = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
  __m256 best = neg_inf;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 lanes = _mm256_blendv_ps(neg_inf, _mm256_loadu_ps(v + i), mask_lanes(mask + i));
    best = _mm256_max_ps(best, lanes);
  }
  alignas(32) float tmp[8];
  _mm256_store_ps(tmp, best);
  float result = tmp[0];
  for (float t : tmp) result = t > result ? t : result;
  for (; i < n; ++i) {
    if (mask[i] && v[i] > result) result = v[i];
  }
  return result;
}

std::size_t masked_count_at_least(const float* v, const std::uint8_t* mask,
                                  std::size_t n, float threshold) {
  const __m256 t = _mm256_set1_ps(threshold);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 hit = _mm256_and_ps(_mm256_cmp_ps(_mm256_loadu_ps(v + i), t, _CMP_GE_OQ),
                                     mask_lanes(mask + i));
    count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(_mm256_movemask_ps(hit))));
  }
  for (; i < n; ++i) count += (mask[i] != 0 && v[i] >= threshold) ? 1 : 0;
  return count;
}

// Four 8-lane compare results (all ones or zero) -> 32 bytes of 0 / 1.
inline __m256i pack_flags(__m256 a, __m256 b, __m256 c, __m256 d) {
  const __m256i ab = _mm256_packs_epi32(_mm256_castps_si256(a), _mm256_castps_si256(b));
  const __m256i cd = _mm256_packs_epi32(_mm256_castps_si256(c), _mm256_castps_si256(d));
  const __m256i bytes = _mm256_packs_epi16(ab, cd);
  const __m256i ordered = _mm256_permutevar8x32_epi32(bytes, _mm256_setr_epi32(0, 4, 1, 5, 2, 6, 3, 7));
  return _mm256_and_si256(ordered, _mm256_set1_epi8(1));
}

void window_mask(const float* v, const std::uint8_t* roi, std::size_t n, float lo,
                 float hi, std::uint8_t* out) {
  const __m256 vlo = _mm256_set1_ps(lo);
  const __m256 vhi = _mm256_set1_ps(hi);
  auto lanes = [&](std::size_t at) {
    const __m256 x = _mm256_loadu_ps(v + at);
    return _mm256_and_ps(_mm256_and_ps(_mm256_cmp_ps(vlo, x, _CMP_LE_OQ), _mm256_cmp_ps(x, vhi, _CMP_LE_OQ)),
                         mask_lanes(roi + at));
  };
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i flags = pack_flags(lanes(i), lanes(i + 8), lanes(i + 16), lanes(i + 24));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), flags);
  }
  if (i < n) scalar_kernels().window_mask(v + i, roi + i, n - i, lo, hi, out + i);
}

template <std::size_t Taps>
void window_mean_fixed(const float* in, std::size_t stride, __m256 f, float* out, std::size_t n,
                       std::size_t& i) {
  for (; i + 8 <= n; i += 8) {
    __m256 acc = _mm256_loadu_ps(in + i);
    for (std::size_t t = 1; t < Taps; ++t) acc = _mm256_add_ps(acc, _mm256_loadu_ps(in + i + t * stride));
    _mm256_storeu_ps(out + i, _mm256_mul_ps(acc, f));
  }
}

void window_mean(const float* in, std::size_t stride, std::size_t taps, float factor, float* out,
                 std::size_t n) {
  const __m256 f = _mm256_set1_ps(factor);
  std::size_t i = 0;
  switch (taps) {
    case 2: window_mean_fixed<2>(in, stride, f, out, n, i); break;
    case 3: window_mean_fixed<3>(in, stride, f, out, n, i); break;
    case 4: window_mean_fixed<4>(in, stride, f, out, n, i); break;
    case 5: window_mean_fixed<5>(in, stride, f, out, n, i); break;
    default:
      for (; i + 8 <= n; i += 8) {
        __m256 acc = _mm256_loadu_ps(in + i);
        for (std::size_t t = 1; t < taps; ++t) acc = _mm256_add_ps(acc, _mm256_loadu_ps(in + i + t * stride));
        _mm256_storeu_ps(out + i, _mm256_mul_ps(acc, f));
      }
  }
  if (i < n) scalar_kernels().window_mean(in + i, stride, taps, factor, out + i, n - i);
}

void scale(float* data, std::size_t n, float factor) {
  const __m256 f = _mm256_set1_ps(factor);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(data + i, _mm256_mul_ps(_mm256_loadu_ps(data + i), f));
  }
  for (; i < n; ++i) data[i] *= factor;
}

void scale_add(const float* a, float s, const float* b, float* out, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 product = _mm256_mul_ps(_mm256_loadu_ps(a + i), vs);
    _mm256_storeu_ps(out + i, _mm256_add_ps(product, _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) {
    const float product = a[i] * s;
    out[i] = product + b[i];
  }
}

// Low 64 bits of a 64x64 product per lane.
inline __m256i mullo64(__m256i a, __m256i b) {
  const __m256i lolo = _mm256_mul_epu32(a, b);
  const __m256i hilo = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), b);
  const __m256i lohi = _mm256_mul_epu32(a, _mm256_srli_epi64(b, 32));
  return _mm256_add_epi64(lolo, _mm256_slli_epi64(_mm256_add_epi64(hilo, lohi), 32));
}

inline __m256i mix64x4(__m256i z) {
  const __m256i c1 = _mm256_set1_epi64x(static_cast<long long>(0xBF58476D1CE4E5B9ULL));
  const __m256i c2 = _mm256_set1_epi64x(static_cast<long long>(0x94D049BB133111EBULL));
  z = mullo64(_mm256_xor_si256(z, _mm256_srli_epi64(z, 30)), c1);
  z = mullo64(_mm256_xor_si256(z, _mm256_srli_epi64(z, 27)), c2);
  return _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
}

// Odd integer 2*(h >> 41) + 1 - 2^23 per 64-bit lane, gathered into the low
// four 32-bit lanes.
inline __m128i centered_words(__m256i h) {
  const __m256i k = _mm256_srli_epi64(h, 41);
  const __m256i w = _mm256_sub_epi64(_mm256_add_epi64(_mm256_add_epi64(k, k), _mm256_set1_epi64x(1)),
                                     _mm256_set1_epi64x(1 << 23));
  const __m256i packed = _mm256_permutevar8x32_epi32(w, _mm256_setr_epi32(0, 2, 4, 6, 1, 3, 5, 7));
  return _mm256_castsi256_si128(packed);
}

void uniform_noise(std::uint64_t key, std::uint64_t counter0, float step, float* out,
                   std::size_t n) {
  const __m256 vstep = _mm256_set1_ps(step);
  std::size_t i = 0;
  if (n >= 8) {
    __m256i x0 = _mm256_setr_epi64x(
        static_cast<long long>(key + (counter0 + 1) * kGolden),
        static_cast<long long>(key + (counter0 + 2) * kGolden),
        static_cast<long long>(key + (counter0 + 3) * kGolden),
        static_cast<long long>(key + (counter0 + 4) * kGolden));
    const __m256i four = _mm256_set1_epi64x(static_cast<long long>(4 * kGolden));
    const __m256i eight = _mm256_set1_epi64x(static_cast<long long>(8 * kGolden));
    for (; i + 8 <= n; i += 8) {
      const __m256i x1 = _mm256_add_epi64(x0, four);
      const __m128i lo = centered_words(mix64x4(x0));
      const __m128i hi = centered_words(mix64x4(x1));
      const __m256 w = _mm256_cvtepi32_ps(_mm256_set_m128i(hi, lo));
      _mm256_storeu_ps(out + i, _mm256_mul_ps(w, vstep));
      x0 = _mm256_add_epi64(x0, eight);
    }
  }
  if (i < n) scalar_kernels().uniform_noise(key, counter0 + i, step, out + i, n - i);
}

inline __m256 interpolate8(__m256 lo, __m256 hi, double fraction) {
  if (fraction == 0.0) return lo;
  const __m256d f = _mm256_set1_pd(fraction);
  auto half = [&](__m128 l4, __m128 h4) {
    const __m256d l = _mm256_cvtps_pd(l4);
    const __m256d h = _mm256_cvtps_pd(h4);
    __m256d r = _mm256_add_pd(l, _mm256_mul_pd(f, _mm256_sub_pd(h, l)));
    r = _mm256_max_pd(l, r);
    r = _mm256_min_pd(h, r);
    return _mm256_cvtpd_ps(r);
  };
  const __m128 r0 = half(_mm256_castps256_ps128(lo), _mm256_castps256_ps128(hi));
  const __m128 r1 = half(_mm256_extractf128_ps(lo, 1), _mm256_extractf128_ps(hi, 1));
  return _mm256_set_m128(r1, r0);
}

constexpr std::size_t kMaxNetworkSamples = 64;

void voxel_quantile_pair(std::span<const float* const> samples, std::size_t n,
                         double lo_level, double hi_level, float* lower, float* upper) {
  const std::size_t m = samples.size();
  const auto lo_pos = detail::quantile_position(lo_level, m);
  const auto hi_pos = detail::quantile_position(hi_level, m);
  if (m > kMaxNetworkSamples) {
    scalar_kernels().voxel_quantile_pair(samples, n, lo_level, hi_level, lower, upper);
    return;
  }
  std::size_t i = 0;
  {
    __m256 lanes[kMaxNetworkSamples];
    for (; i + 8 <= n; i += 8) {
      for (std::size_t j = 0; j < m; ++j) lanes[j] = _mm256_loadu_ps(samples[j] + i);
      // Odd-even transposition sort: m rounds of min/max compare-exchange.
      for (std::size_t round = 0; round < m; ++round) {
        for (std::size_t j = round & 1; j + 1 < m; j += 2) {
          const __m256 a = lanes[j];
          const __m256 b = lanes[j + 1];
          lanes[j] = _mm256_min_ps(a, b);
          lanes[j + 1] = _mm256_max_ps(a, b);
        }
      }
      _mm256_storeu_ps(lower + i, interpolate8(lanes[lo_pos.index], lanes[lo_pos.next], lo_pos.fraction));
      _mm256_storeu_ps(upper + i, interpolate8(lanes[hi_pos.index], lanes[hi_pos.next], hi_pos.fraction));
    }
  }
  if (i < n) {
    // Tail voxels: the scalar kernel on offset pointers.
    const float* shifted[kMaxNetworkSamples];
    for (std::size_t j = 0; j < m; ++j) shifted[j] = samples[j] + i;
    scalar_kernels().voxel_quantile_pair(std::span<const float* const>(shifted, m), n - i,
                                         lo_level, hi_level, lower + i, upper + i);
  }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{
      "avx2",        l1_distance, masked_max,    masked_count_at_least,
      window_mask,   window_mean,    scale,         scale_add,
      uniform_noise, voxel_quantile_pair,
  };
  return table;
}

}  // namespace mgb::simd

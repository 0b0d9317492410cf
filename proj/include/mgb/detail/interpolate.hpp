#pragma once

#include <cmath>
#include <cstddef>

namespace mgb::detail {

// Internal linkage: these are compiled into ISA-specific translation units and
// must not be merged across them by the linker.
namespace {

// Position of an interpolated quantile inside a sorted sample of size n:
// lower order-statistic index and the fractional weight toward the next one.
struct QuantilePosition {
  std::size_t index;
  std::size_t next;
  double fraction;
};

inline QuantilePosition quantile_position(double level, std::size_t n) {
  const double p = level * static_cast<double>(n - 1);
  double whole = std::floor(p);
  std::size_t index = static_cast<std::size_t>(whole);
  if (index >= n - 1) {
    return {n - 1, n - 1, 0.0};
  }
  return {index, index + 1, p - whole};
}

// lo + fraction * (hi - lo), clamped into [lo, hi]. Every quantile path in the
// library (scalar, SIMD, volume kernels) goes through this exact expression.
inline double interpolate(double lo, double hi, double fraction) {
  if (fraction == 0.0) return lo;
  const double r = lo + fraction * (hi - lo);
  if (r < lo) return lo;
  if (hi < r) return hi;
  return r;
}

}  // namespace

}  // namespace mgb::detail

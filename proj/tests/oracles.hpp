#pragma once

// Brute-force reference implementations. Deliberately naive: full sorts,
// linear scans, triple loops. Nothing here calls into the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

namespace oracle {

// Full sort, then interpolate between the order statistics around
// p = level * (n - 1).
inline double quantile(std::vector<double> v, double level) {
  std::sort(v.begin(), v.end());
  const double p = level * static_cast<double>(v.size() - 1);
  const double floor_p = std::floor(p);
  const auto lo = static_cast<std::size_t>(floor_p);
  if (lo + 1 >= v.size()) return v.back();
  const double f = p - floor_p;
  if (f == 0.0) return v[lo];
  return v[lo] + f * (v[lo + 1] - v[lo]);
}

// ceil((n + 1)(1 - alpha)) by exact integer search over candidate ranks.
inline std::size_t rank(std::size_t n, double alpha) {
  const long double target = static_cast<long double>(n + 1) * (1.0L - static_cast<long double>(alpha));
  std::size_t k = 0;
  while (static_cast<long double>(k) < target - 1e-9L) ++k;
  return std::max<std::size_t>(k, 1);
}

// Smallest r among the scores with |{s <= r}| >= k, by scanning every
// candidate; +inf when no candidate reaches k.
inline double smallest_covering(const std::vector<double>& scores, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  for (double r : scores) {
    std::size_t at_most = 0;
    for (double s : scores) at_most += s <= r;
    if (at_most >= k && r < best) best = r;
  }
  return best;
}

inline std::size_t argmin_distance(const std::vector<double>& values, double target) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (std::fabs(values[j] - target) < std::fabs(values[best] - target)) best = j;
  }
  return best;
}

// Separable truncated box mean in x, then y, then z, each window summed from
// its low end and multiplied by float(1 / count).
inline std::vector<float> box_smooth(const std::vector<float>& in, std::size_t nx, std::size_t ny,
                                     std::size_t nz, int r) {
  auto at = [&](std::size_t x, std::size_t y, std::size_t z) { return x + nx * (y + ny * z); };
  std::vector<float> cur = in, next(in.size());
  const std::size_t len[3] = {nx, ny, nz};
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t z = 0; z < nz; ++z) {
      for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < nx; ++x) {
          const std::size_t c[3] = {x, y, z};
          const long i = static_cast<long>(c[axis]);
          const long lo = std::max(0L, i - r);
          const long hi = std::min(static_cast<long>(len[axis]) - 1, i + r);
          float acc = 0.0f;
          for (long j = lo; j <= hi; ++j) {
            std::size_t p[3] = {x, y, z};
            p[axis] = static_cast<std::size_t>(j);
            acc = (j == lo) ? cur[at(p[0], p[1], p[2])] : acc + cur[at(p[0], p[1], p[2])];
          }
          next[at(x, y, z)] = acc * (1.0f / static_cast<float>(hi - lo + 1));
        }
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

struct TTest {
  double t;
  double p;
};

// Paired t-test in long double with the Student-t tail from Boost's ibeta.
inline TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  long double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += static_cast<long double>(a[i]) - b[i];
  mean /= n;
  long double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i] - mean;
    ss += d * d;
  }
  const long double sd = std::sqrt(ss / (n - 1));
  const long double t = mean / (sd / std::sqrt(static_cast<long double>(n)));
  const long double nu = n - 1;
  const long double p = boost::math::ibeta(nu / 2, 0.5L, nu / (nu + t * t));
  return {static_cast<double>(t), static_cast<double>(p)};
}

// Units in the last place between two doubles of the same sign.
inline std::uint64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  auto key = [](double x) {
    std::int64_t i;
    std::memcpy(&i, &x, sizeof i);
    return i < 0 ? std::numeric_limits<std::int64_t>::min() - i : i;
  };
  const std::int64_t ka = key(a), kb = key(b);
  return static_cast<std::uint64_t>(ka > kb ? ka - kb : kb - ka);
}

}  // namespace oracle

namespace gen {

// Hand-rolled generators over std::mt19937_64.
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Mix of smooth values, heavy ties and wide magnitudes.
inline std::vector<double> values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  const int style = static_cast<int>(size(rng, 0, 3));
  for (auto& x : v) {
    switch (style) {
      case 0: x = uniform(rng, -10.0, 10.0); break;
      case 1: x = static_cast<double>(size(rng, 0, 4)); break;
      case 2: x = std::normal_distribution<double>(0.0, 1.0)(rng) * 1e6; break;
      default: x = std::ldexp(uniform(rng, 0.5, 1.0), static_cast<int>(size(rng, 0, 60)) - 30); break;
    }
  }
  return v;
}

inline std::vector<float> floats(Rng& rng, std::size_t n, float lo = -5.0f, float hi = 5.0f) {
  std::vector<float> v(n);
  std::uniform_real_distribution<float> d(lo, hi);
  for (auto& x : v) x = d(rng);
  return v;
}

inline std::vector<std::uint8_t> bits(Rng& rng, std::size_t n, double density) {
  std::vector<std::uint8_t> v(n);
  std::bernoulli_distribution d(density);
  for (auto& b : v) b = d(rng) ? 1 : 0;
  return v;
}

}  // namespace gen

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mgb/conformal.hpp"
#include "mgb/error.hpp"
#include "oracles.hpp"

using namespace mgb;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::vector<double> one_to(int n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

CalibrationSample sample(std::vector<double> estimates, double truth) {
  return {{"p", "m", std::move(estimates)}, truth};
}

// Calibration set whose CQR scores come out exactly as `scores` for any
// alpha <= 0.5. s >= 0: band [0, 0], truth s. s < 0: band [s, -s], truth 0.
std::vector<CalibrationSample> with_scores(const std::vector<double>& scores) {
  std::vector<CalibrationSample> out;
  for (double s : scores) {
    if (s >= 0) {
      out.push_back(sample(std::vector<double>(8, 0.0), s));
    } else {
      out.push_back(sample({s, s, s, s, -s, -s, -s, -s}, 0.0));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("quantile level range") {
  CHECK_NOTHROW(QuantileLevel(0.0));
  CHECK_NOTHROW(QuantileLevel(1.0));
  CHECK_THROWS_AS(QuantileLevel(-1e-12), Error);
  CHECK_THROWS_AS(QuantileLevel(1.0 + 1e-12), Error);
  CHECK_THROWS_AS(QuantileLevel(std::nan("")), Error);
}

TEST_CASE("sample_quantile examples") {
  const std::vector<double> fives{5, 5, 5};
  CHECK(sample_quantile(fives, QuantileLevel(0.3)) == 5.0);
  const auto v = one_to(10);
  CHECK(sample_quantile(v, QuantileLevel(0.65)) == doctest::Approx(6.85).epsilon(1e-15));
  CHECK(sample_quantile(v, QuantileLevel(0.65)) == oracle::quantile(v, 0.65));
  CHECK(sample_quantile(v, QuantileLevel(0.0)) == 1.0);
  CHECK(sample_quantile(v, QuantileLevel(1.0)) == 10.0);
}

TEST_CASE("sample_quantile errors") {
  const std::vector<double> empty;
  try {
    sample_quantile(empty, QuantileLevel(0.5));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "empty sample");
  }
  const std::vector<double> bad{1.0, kInf};
  try {
    sample_quantile(bad, QuantileLevel(0.5));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "non-finite input");
  }
}

TEST_CASE("sample_quantiles agrees with sample_quantile") {
  gen::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto v = gen::values(rng, gen::size(rng, 1, 40));
    const std::vector<double> levels{0.0, 0.05, gen::uniform(rng, 0, 1), 0.5, 0.95, 1.0};
    const auto got = sample_quantiles(v, levels);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      CHECK(got[k] == sample_quantile(v, QuantileLevel(levels[k])));
    }
  }
}

TEST_CASE("property: quantile inside range, permutation invariant, monotone") {
  gen::Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    auto v = gen::values(rng, gen::size(rng, 1, 60));
    const double a = gen::uniform(rng, 0, 1), b = gen::uniform(rng, 0, 1);
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double qa = sample_quantile(v, QuantileLevel(lo));
    const double qb = sample_quantile(v, QuantileLevel(hi));
    CHECK(qa <= qb);
    CHECK(qa >= *std::min_element(v.begin(), v.end()));
    CHECK(qb <= *std::max_element(v.begin(), v.end()));
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(sample_quantile(v, QuantileLevel(lo)) == qa);
  }
}

TEST_CASE("property: adjacent levels stay ordered on near-equal neighbours") {
  // Values one ulp apart are where an unclamped a + f(b - a) can overshoot.
  gen::Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const double a = gen::uniform(rng, -1e3, 1e3);
    const double b = std::nextafter(a, kInf);
    const std::vector<double> v{a, b};
    double prev = -kInf;
    for (int k = 0; k <= 64; ++k) {
      const double q = sample_quantile(v, QuantileLevel(k / 64.0));
      CHECK(q >= prev);
      CHECK(q >= a);
      CHECK(q <= b);
      prev = q;
    }
  }
}

TEST_CASE("conformal_order_quantile examples") {
  std::vector<double> scores;
  for (int i = 1; i <= 20; ++i) scores.push_back(i / 10.0);
  const std::size_t k = conformal_rank(20, 0.1);
  CHECK(k == 19);
  CHECK(conformal_order_quantile(scores, k) == 1.9);
  CHECK(conformal_order_quantile(scores, k) == oracle::smallest_covering(scores, k));

  const std::vector<double> single{3.0};
  CHECK(conformal_order_quantile(single, 1) == 3.0);
  const std::vector<double> two{1.0, 2.0};
  CHECK(conformal_order_quantile(two, 3) == kInf);
  try {
    conformal_order_quantile(two, 0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "invalid rank");
  }
}

TEST_CASE("conformal_rank matches the exact ceiling") {
  // 20 * 0.9 and friends are integral in exact arithmetic but not in binary.
  CHECK(conformal_rank(19, 0.1) == 18);
  CHECK(conformal_rank(2, 0.1) == 3);
  CHECK(conformal_rank(9, 0.1) == 9);
  CHECK(conformal_rank(49, 0.1) == 45);
  CHECK(conformal_rank(9, 0.2) == 8);
  CHECK(conformal_rank(49, 0.05) == 48);
  gen::Rng rng(14);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = gen::size(rng, 1, 500);
    const double alpha = gen::size(rng, 1, 99) / 100.0;
    CHECK(conformal_rank(n, alpha) == oracle::rank(n, alpha));
  }
}

TEST_CASE("adjusted level") {
  CHECK(adjusted_level(19, 0.1) == doctest::Approx(18.0 / 19.0));
  CHECK(adjusted_level(19, 0.1) == doctest::Approx(0.9474).epsilon(1e-4));
}

TEST_CASE("cqr_score examples") {
  const auto v = one_to(10);
  CHECK(cqr_score(v, 10.0, 0.2) == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(cqr_score(v, 5.0, 0.2) == doctest::Approx(-3.1).epsilon(1e-14));
  const std::vector<double> c(7, 2.5);
  for (double a : {0.01, 0.1, 0.5, 0.9}) CHECK(cqr_score(c, 2.5, a) == 0.0);
}

TEST_CASE("calibrate_offset examples") {
  SUBCASE("n_p = 19 adjusted level") {
    std::vector<double> scores(19, 0.0);
    const auto r = calibrate_offset(with_scores(scores), 0.1);
    CHECK(r.n_p == 19);
    CHECK(r.adjusted_level == doctest::Approx(18.0 / 19.0));
    CHECK_FALSE(r.unbounded);
  }
  SUBCASE("n_p = 2 is unbounded") {
    const auto r = calibrate_offset(with_scores({0.1, 0.2}), 0.1);
    CHECK(r.unbounded);
    CHECK(r.q == kInf);
    CHECK(r.adjusted_level == doctest::Approx(1.5));
    CHECK(r.scores.size() == 2);
  }
  SUBCASE("twenty scores") {
    std::vector<double> scores;
    for (int i = 20; i >= 1; --i) scores.push_back(i / 10.0);
    const auto r = calibrate_offset(with_scores(scores), 0.1);
    CHECK(r.q == 1.9);
  }
  SUBCASE("errors") {
    const std::vector<CalibrationSample> none;
    try {
      calibrate_offset(none, 0.1);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(std::string(e.what()) == "no calibration data");
    }
    CHECK_THROWS_AS(calibrate_offset(with_scores({1.0}), 0.0), Error);
    CHECK_THROWS_AS(calibrate_offset(with_scores({1.0}), 1.0), Error);
  }
}

TEST_CASE("predict_interval examples") {
  CalibrationResult calib;
  calib.alpha = 0.2;
  calib.q = 0.5;
  calib.n_p = 10;
  const auto iv = predict_interval(one_to(10), calib);
  CHECK(iv.lb == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(iv.ub == doctest::Approx(9.6).epsilon(1e-14));
  CHECK(iv.bounded());

  calib.q = 0.0;
  const std::vector<double> c(5, 3.25);
  const auto flat = predict_interval(c, calib);
  CHECK(flat.lb == 3.25);
  CHECK(flat.ub == 3.25);

  calib.unbounded = true;
  calib.q = kInf;
  const auto open = predict_interval(c, calib);
  CHECK(open.lb == -kInf);
  CHECK(open.ub == kInf);
  CHECK_FALSE(open.bounded());
}

TEST_CASE("negative offset narrower than the band collapses to its midpoint") {
  CalibrationResult calib;
  calib.alpha = 0.2;
  calib.q = -10.0;
  calib.n_p = 5;
  const auto iv = predict_interval(one_to(10), calib);
  CHECK(iv.lb <= iv.ub);
  CHECK(iv.lb == doctest::Approx(5.5));
}

TEST_CASE("property: q is the smallest covering score") {
  gen::Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const auto scores = gen::values(rng, gen::size(rng, 1, 100));
    const double alpha = gen::uniform(rng, 0.01, 0.5);
    const auto r = calibrate_offset(with_scores(scores), alpha);
    const std::size_t k = oracle::rank(scores.size(), alpha);
    CHECK(r.q == oracle::smallest_covering(scores, k));
    CHECK(r.unbounded == (k > scores.size()));
    // self-coverage on the calibration set
    if (!r.unbounded) {
      const auto at_most = std::count_if(scores.begin(), scores.end(), [&](double s) { return s <= r.q; });
      CHECK(static_cast<std::size_t>(at_most) >= k);
    }
  }
}

TEST_CASE("property: calibration is permutation invariant") {
  gen::Rng rng(22);
  for (int i = 0; i < 200; ++i) {
    std::vector<CalibrationSample> cal;
    const std::size_t n = gen::size(rng, 1, 30);
    for (std::size_t p = 0; p < n; ++p) {
      cal.push_back(sample(gen::values(rng, gen::size(rng, 1, 12)), gen::uniform(rng, -5, 5)));
    }
    const auto a = calibrate_offset(cal, 0.1);
    std::shuffle(cal.begin(), cal.end(), rng);
    const auto b = calibrate_offset(cal, 0.1);
    CHECK(a.q == b.q);
    CHECK(a.scores == b.scores);
    CHECK(a.adjusted_level == b.adjusted_level);
  }
}

TEST_CASE("property: translation equivariance with integer-valued data") {
  // Integers and a power-of-two shift keep every step exact.
  gen::Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    std::vector<CalibrationSample> cal, moved;
    const double c = std::ldexp(1.0, static_cast<int>(gen::size(rng, 0, 10)));
    const std::size_t n = gen::size(rng, 5, 25);
    for (std::size_t p = 0; p < n; ++p) {
      std::vector<double> est(gen::size(rng, 2, 10));
      for (auto& e : est) e = static_cast<double>(gen::size(rng, 0, 40));
      const double truth = static_cast<double>(gen::size(rng, 0, 40));
      cal.push_back(sample(est, truth));
      for (auto& e : est) e += c;
      moved.push_back(sample(est, truth + c));
    }
    const double alpha = 0.5;
    const auto a = calibrate_offset(cal, alpha);
    const auto b = calibrate_offset(moved, alpha);
    CHECK(a.scores == b.scores);
    const auto ia = predict_interval(cal[0].estimates.values, a);
    const auto ib = predict_interval(moved[0].estimates.values, b);
    CHECK(ib.lb == ia.lb + c);
    CHECK(ib.ub == ia.ub + c);
  }
}

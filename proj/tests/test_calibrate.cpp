#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "funnel/calibrate.hpp"
#include "funnel/error.hpp"
#include "funnel/random.hpp"
#include "oracles.hpp"

using namespace funnel;

namespace {

void two_gaussians(std::uint64_t seed, std::size_t n, std::vector<double>& h, std::vector<int>& y) {
  Rng rng(seed);
  h.clear();
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0;
    y.push_back(label);
    h.push_back((label ? 1.0 : -1.0) + rng.normal());
  }
}

}  // namespace

TEST_CASE("fit_platt: separated clusters versus a grid oracle") {
  std::vector<double> h;
  std::vector<int> y;
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const int label = i < 250;
    y.push_back(label);
    h.push_back((label ? 1.0 : -1.0) + 0.2 * rng.normal());
  }
  const auto cal = fit_platt(h, y);
  const auto grid = oracle::platt_grid(h, y);
  const double fitted = oracle::platt_mean_nll(cal.alpha, cal.beta, h, y);
  CHECK(fitted <= grid.nll + 1e-3);
  CHECK(calibrate_score(cal, 1.0) > 0.9);
  CHECK(calibrate_score(cal, -1.0) < 0.1);
}

TEST_CASE("fit_platt: equal scores give the base rate") {
  std::vector<double> h(40, 0.7);
  std::vector<int> y(40, 0);
  for (int i = 0; i < 20; ++i) y[i] = 1;
  const auto cal = fit_platt(h, y);
  CHECK(std::fabs(calibrate_score(cal, 0.7) - 0.5) <= 1e-6);
}

TEST_CASE("fit_platt: one-class labels") {
  std::vector<double> h{0.1, -2.0, 3.0};
  std::vector<int> neg{0, 0, 0}, pos{1, 1, 1};
  const auto t = fit_platt(h, neg);
  CHECK(t.trivial);
  CHECK(calibrate_score(t, 5.0) == 0.0);
  const auto p = fit_platt(h, pos);
  CHECK(!p.trivial);
  CHECK(p.alpha == 0.0);
  CHECK(p.beta == -10.0);
  CHECK(calibrate_score(p, -3.0) > 0.9999);
}

TEST_CASE("fit_platt: rejects non-finite scores") {
  std::vector<double> h{0.1, std::numeric_limits<double>::quiet_NaN()};
  std::vector<int> y{0, 1};
  CHECK_THROWS(fit_platt(h, y));
}

TEST_CASE("fit_platt: properties on random data") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::vector<double> h;
    std::vector<int> y;
    two_gaussians(seed, 120, h, y);
    const auto cal = fit_platt(h, y);
    CHECK(cal.alpha <= 0.0);
    // never worse than the reference point (-1, 0)
    CHECK(platt_nll(cal, h, y) <= platt_nll({-1.0, 0.0, false}, h, y) + 1e-12);
    // reordering invariance
    std::vector<std::size_t> perm(h.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(seed + 100);
    rng.shuffle(perm);
    std::vector<double> h2;
    std::vector<int> y2;
    for (auto i : perm) {
      h2.push_back(h[i]);
      y2.push_back(y[i]);
    }
    const auto cal2 = fit_platt(h2, y2);
    CHECK(cal2.alpha == doctest::Approx(cal.alpha).epsilon(1e-6));
    CHECK(cal2.beta == doctest::Approx(cal.beta).epsilon(1e-6));
  }
}

TEST_CASE("fit_platt: reversed scores pin alpha at zero") {
  std::vector<double> h;
  std::vector<int> y;
  two_gaussians(5, 200, h, y);
  for (auto& v : h) v = -v;
  const auto cal = fit_platt(h, y);
  CHECK(cal.alpha == 0.0);
  // with alpha = 0 the best constant is the base rate
  CHECK(calibrate_score(cal, 0.0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("calibrate_score examples") {
  const PlattCalibrator c{-1.0, 0.0, false};
  CHECK(calibrate_score(c, 0.0) == 0.5);
  CHECK(calibrate_score(c, 800.0) == 1.0);
  CHECK(calibrate_score(c, -800.0) == 0.0);
  CHECK(calibrate_score(PlattCalibrator::make_trivial(), 5.0) == 0.0);
}

TEST_CASE("calibrate_score stays in [0,1] and is monotone") {
  Rng rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const PlattCalibrator c{-20.0 * rng.uniform(), 20.0 * rng.uniform() - 10.0, false};
    double prev = -1.0;
    for (double h = -50.0; h <= 50.0; h += 0.5) {
      const double p = calibrate_score(c, h);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p >= prev);
      prev = p;
    }
  }
}

TEST_CASE("posteriors_with_mode examples") {
  const PlattCalibrator c{-2.0, 0.5, false};
  CHECK(posteriors_with_mode(CalibrationMode::NoProb, c, 2.3) == 2.3);
  CHECK(posteriors_with_mode(CalibrationMode::NoCalib, c, 0.0) == 0.5);
  // printed reading (1, 0) decreases in h; the monotone switch flips it
  CHECK(posteriors_with_mode(CalibrationMode::NoCalib, c, 2.0) < 0.5);
  CHECK(posteriors_with_mode(CalibrationMode::NoCalib, c, 2.0, true) > 0.5);
  CHECK(posteriors_with_mode(CalibrationMode::Calib, c, 1.0) == calibrate_score(c, 1.0));
  for (auto mode : {CalibrationMode::Calib, CalibrationMode::NoCalib, CalibrationMode::NoProb}) {
    CHECK(posteriors_with_mode(mode, PlattCalibrator::make_trivial(), 3.0) == 0.0);
  }
}

TEST_CASE("calibration mode names") {
  for (auto mode : {CalibrationMode::Calib, CalibrationMode::NoCalib, CalibrationMode::NoProb}) {
    CHECK(calibration_mode_from_string(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(calibration_mode_from_string("isotonic"), ConfigError);
}

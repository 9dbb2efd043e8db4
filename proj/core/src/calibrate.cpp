#include "funnel/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "funnel/error.hpp"

namespace funnel {
namespace {

constexpr double kGradientTolerance = 1e-6;
constexpr int kMaxIterations = 200;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// p = 1 / (1 + e^z), computed without overflow.
double upper_tail(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

struct Sample {
  double h;
  int y;
};

// NLL = sum softplus(z) - (1 - y) z with z = alpha h + beta.
double nll(const std::vector<Sample>& data, double alpha, double beta) {
  double v = 0.0;
  for (const auto& s : data) {
    const double z = alpha * s.h + beta;
    v += softplus(z) - (s.y != 0 ? 0.0 : z);
  }
  return v;
}

// Damped Newton on (alpha, beta), or on beta alone when alpha is pinned.
std::pair<double, double> newton(const std::vector<Sample>& data, double alpha, double beta, bool pin_alpha) {
  double f = nll(data, alpha, beta);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (const auto& s : data) {
      const double p = upper_tail(alpha * s.h + beta);
      const double r = static_cast<double>(s.y) - p;  // d NLL / dz
      const double w = p * (1.0 - p);
      ga += r * s.h;
      gb += r;
      haa += w * s.h * s.h;
      hab += w * s.h;
      hbb += w;
    }
    if (pin_alpha) ga = 0.0;
    if (std::sqrt(ga * ga + gb * gb) <= kGradientTolerance) break;

    double da = 0.0, db = 0.0;
    const double ridge = 1e-12 * (1.0 + haa + hbb);
    if (pin_alpha) {
      db = -gb / (hbb + ridge);
    } else {
      const double a = haa + ridge, d = hbb + ridge;
      const double det = a * d - hab * hab;
      if (det > 1e-300) {
        da = -(d * ga - hab * gb) / det;
        db = -(a * gb - hab * ga) / det;
      }
      if (!(det > 1e-300) || !(da * ga + db * gb < 0.0)) {
        da = -ga;
        db = -gb;
      }
    }

    double step = 1.0;
    bool accepted = false;
    const double slope = da * ga + db * gb;
    for (int ls = 0; ls < 60; ++ls) {
      const double f_new = nll(data, alpha + step * da, beta + step * db);
      if (f_new <= f + 1e-4 * step * slope) {
        alpha += step * da;
        beta += step * db;
        f = f_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return {alpha, beta};
}

}  // namespace

std::string to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Calib:
      return "calib";
    case CalibrationMode::NoCalib:
      return "nocalib";
    case CalibrationMode::NoProb:
      return "noprob";
  }
  return "calib";
}

CalibrationMode calibration_mode_from_string(const std::string& s) {
  if (s == "calib") return CalibrationMode::Calib;
  if (s == "nocalib") return CalibrationMode::NoCalib;
  if (s == "noprob") return CalibrationMode::NoProb;
  throw ConfigError("unknown calibration mode '" + s + "' (expected calib, nocalib or noprob)");
}

PlattCalibrator fit_platt(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("fit_platt: scores and labels differ in length");
  if (scores.empty()) throw DataError("fit_platt: no samples");
  std::vector<Sample> data;
  data.reserve(scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("fit_platt: non-finite score");
    const int y = labels[i] != 0 ? 1 : 0;
    positives += static_cast<std::size_t>(y);
    data.push_back({scores[i], y});
  }
  if (positives == 0) return PlattCalibrator::make_trivial();
  if (positives == data.size()) return {0.0, -10.0, false};

  // Canonical order makes the fit independent of sample order bit for bit.
  std::sort(data.begin(), data.end(), [](const Sample& a, const Sample& b) {
    return a.h < b.h || (a.h == b.h && a.y < b.y);
  });

  const double n_pos = static_cast<double>(positives);
  const double n_neg = static_cast<double>(data.size() - positives);
  const double base_beta = std::log(n_neg / n_pos);

  auto [alpha, beta] = newton(data, 0.0, base_beta, false);
  if (alpha > 0.0) {
    // The objective is convex, so with the unconstrained optimum outside
    // alpha <= 0 the constrained one sits on alpha = 0, where the best beta
    // reproduces the base rate.
    alpha = 0.0;
    beta = newton(data, 0.0, base_beta, true).second;
  }
  return {alpha, beta, false};
}

double platt_nll(const PlattCalibrator& cal, std::span<const double> scores, std::span<const int> labels) {
  double v = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double z = cal.alpha * scores[i] + cal.beta;
    v += softplus(z) - (labels[i] != 0 ? 0.0 : z);
  }
  return v;
}

double calibrate_score(const PlattCalibrator& cal, double h) {
  if (cal.trivial) return 0.0;
  return upper_tail(cal.alpha * h + cal.beta);
}

double posteriors_with_mode(CalibrationMode mode, const PlattCalibrator& cal, double h, bool monotone_nocalib) {
  if (cal.trivial) return 0.0;
  switch (mode) {
    case CalibrationMode::Calib:
      return calibrate_score(cal, h);
    case CalibrationMode::NoCalib:
      return upper_tail(monotone_nocalib ? -h : h);
    case CalibrationMode::NoProb:
      return h;
  }
  return h;
}

}  // namespace funnel

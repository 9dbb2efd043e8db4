#pragma once

#include <span>
#include <string>

namespace funnel {

// Pr(c|d) = 1 / (1 + exp(alpha * h + beta)), alpha <= 0. A trivial calibrator
// maps every score to exactly 0.
struct PlattCalibrator {
  double alpha = 0.0;
  double beta = 0.0;
  bool trivial = false;

  static PlattCalibrator make_trivial() { return {0.0, 0.0, true}; }

  friend bool operator==(const PlattCalibrator&, const PlattCalibrator&) = default;
};

enum class CalibrationMode { Calib, NoCalib, NoProb };

std::string to_string(CalibrationMode mode);
CalibrationMode calibration_mode_from_string(const std::string& s);

// Maximum-likelihood (alpha, beta) under alpha <= 0. All-negative labels give
// a trivial calibrator; all-positive labels give alpha = 0, beta = -10.
PlattCalibrator fit_platt(std::span<const double> scores, std::span<const int> labels);

// Negative log-likelihood of 0/1 labels under the calibrator's mapping.
double platt_nll(const PlattCalibrator& cal, std::span<const double> scores, std::span<const int> labels);

double calibrate_score(const PlattCalibrator& cal, double h);

// Calib: fitted mapping. NoCalib: the logistic with (alpha, beta) fixed to
// (1, 0), or (-1, 0) when monotone_nocalib is set. NoProb: h itself.
// Trivial calibrators yield 0 in every mode.
double posteriors_with_mode(CalibrationMode mode, const PlattCalibrator& cal, double h,
                            bool monotone_nocalib = false);

}  // namespace funnel

#pragma once

// Independent reference implementations used as test oracles. None of these
// call into the library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

struct Counts {
  std::uint64_t tp, fp, fn, tn;
};

// F1 through precision and recall, spelled out branch by branch.
inline double f1(const Counts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return 1.0;
  if (c.tp == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2.0 * precision * recall / (precision + recall);
}

inline double k_measure(const Counts& c) {
  const bool no_pos = c.tp + c.fn == 0;
  const bool no_neg = c.tn + c.fp == 0;
  if (no_pos && no_neg) return 0.0;
  const double tpr = no_pos ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double tnr = no_neg ? 0.0 : static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  if (no_pos) return 2.0 * tnr - 1.0;
  if (no_neg) return 2.0 * tpr - 1.0;
  return tpr + tnr - 1.0;
}

// micro: pool then measure; macro: measure then average.
inline std::pair<double, double> aggregate(const std::vector<Counts>& cs, double (*m)(const Counts&)) {
  Counts pooled{0, 0, 0, 0};
  double sum = 0.0;
  for (const auto& c : cs) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    pooled.tn += c.tn;
    sum += m(c);
  }
  return {m(pooled), sum / static_cast<double>(cs.size())};
}

// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double student_log_norm(double df) {
  return std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * std::numbers::pi);
}

// Two-tailed p of Student's t: 1 - 2 * integral of the density over [0, |t|].
inline double t_two_tailed(double t, double df) {
  const double a = std::fabs(t);
  // substitute t = tan(u) so heavy tails stay cheap: dt = sec^2 u du
  const double ua = std::atan(a);
  const double lc = student_log_norm(df);
  auto density = [&](double u) {
    const double t = std::tan(u);
    return std::exp(lc - (df + 1) / 2 * std::log1p(t * t / df)) / (std::cos(u) * std::cos(u));
  };
  const double mass = simpson(density, 0.0, ua, 200000);
  return std::max(0.0, 1.0 - 2.0 * mass);
}

inline double paired_t_p(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double md = 0.0;
  for (std::size_t i = 0; i < n; ++i) md += a[i] - b[i];
  md /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - md) * (a[i] - b[i] - md);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return t_two_tailed(md / (sd / std::sqrt(static_cast<double>(n))), static_cast<double>(n - 1));
}

// Null density of the sample correlation r for n >= 4 draws:
// (1 - r^2)^((n-4)/2) / B(1/2, (n-2)/2). Two-tailed mass beyond |r|.
inline double pearson_p_from_r(double r, std::size_t n) {
  const double e = (static_cast<double>(n) - 4.0) / 2.0;
  const double lb = std::lgamma(0.5) + std::lgamma((n - 2.0) / 2) - std::lgamma((n - 1.0) / 2);
  const double a = std::fabs(r);
  const double mass = simpson([&](double x) { return std::exp(e * std::log1p(-x * x) - lb); }, a, 1.0, 200000);
  return std::min(1.0, 2.0 * mass);
}

inline double correlation(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Mean Platt NLL at (alpha, beta); Pr(1|h) = 1 / (1 + exp(alpha h + beta)).
inline double platt_mean_nll(double alpha, double beta, std::span<const double> h, std::span<const int> y) {
  double v = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double z = alpha * h[i] + beta;
    // -log p = log(1 + e^z) for positives, -log(1-p) = log(1 + e^-z) for negatives
    const double u = y[i] ? z : -z;
    v += u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  }
  return v / static_cast<double>(h.size());
}

struct GridBest {
  double nll = std::numeric_limits<double>::infinity();
  double alpha = 0.0, beta = 0.0;
};

// 400 x 400 grid over [-20, 0] x [-10, 10], endpoints included.
inline GridBest platt_grid(std::span<const double> h, std::span<const int> y) {
  GridBest best;
  for (int i = 0; i < 400; ++i) {
    const double a = -20.0 + 20.0 * i / 399.0;
    for (int j = 0; j < 400; ++j) {
      const double b = -10.0 + 20.0 * j / 399.0;
      const double v = platt_mean_nll(a, b, h, y);
      if (v < best.nll) best = {v, a, b};
    }
  }
  return best;
}

inline double rbf(std::span<const double> x, std::span<const double> y, double gamma) {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-gamma * d);
}

}  // namespace oracle

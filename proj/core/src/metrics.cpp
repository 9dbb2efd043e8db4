#include "funnel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/special_functions/beta.hpp>

#include "funnel/error.hpp"

namespace funnel {

std::vector<ConfusionCounts> confusion(std::span<const LabelSet> gold, std::span<const LabelSet> pred,
                                       std::size_t n_classes) {
  if (gold.size() != pred.size()) {
    throw DataError("confusion: " + std::to_string(gold.size()) + " gold label sets vs " +
                    std::to_string(pred.size()) + " predictions");
  }
  std::vector<ConfusionCounts> out(n_classes);
  std::vector<char> g(n_classes), p(n_classes);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::fill(g.begin(), g.end(), 0);
    std::fill(p.begin(), p.end(), 0);
    for (int c : gold[i]) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw DataError("gold label out of range");
      g[static_cast<std::size_t>(c)] = 1;
    }
    for (int c : pred[i]) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw DataError("predicted label out of range");
      p[static_cast<std::size_t>(c)] = 1;
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      auto& cc = out[c];
      if (g[c] && p[c]) {
        ++cc.tp;
      } else if (p[c]) {
        ++cc.fp;
      } else if (g[c]) {
        ++cc.fn;
      } else {
        ++cc.tn;
      }
    }
  }
  return out;
}

double f1(const ConfusionCounts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return 1.0;
  const double tp = static_cast<double>(c.tp);
  return 2.0 * tp / (2.0 * tp + static_cast<double>(c.fp) + static_cast<double>(c.fn));
}

double k_measure(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  const bool no_positives = c.tp + c.fn == 0;
  const bool no_negatives = c.tn + c.fp == 0;
  if (no_positives && no_negatives) return 0.0;
  if (no_positives) return 2.0 * tn / (tn + fp) - 1.0;
  if (no_negatives) return 2.0 * tp / (tp + fn) - 1.0;
  return tp / (tp + fn) + tn / (tn + fp) - 1.0;
}

MicroMacro micro_macro_aggregate(std::span<const ConfusionCounts> per_class, Measure measure) {
  if (per_class.empty()) throw DataError("micro/macro aggregation needs at least one class");
  const auto fn = measure == Measure::F1 ? f1 : k_measure;
  ConfusionCounts pooled;
  double sum = 0.0;
  for (const auto& c : per_class) {
    pooled += c;
    sum += fn(c);
  }
  return {fn(pooled), sum / static_cast<double>(per_class.size())};
}

EvalReport EvalReport::from_counts(std::vector<ConfusionCounts> per_class, RunInfo info) {
  EvalReport r;
  r.per_class = std::move(per_class);
  r.info = std::move(info);
  if (!r.per_class.empty()) {
    const auto f = micro_macro_aggregate(r.per_class, Measure::F1);
    const auto k = micro_macro_aggregate(r.per_class, Measure::K);
    r.f1_micro = f.micro;
    r.f1_macro = f.macro;
    r.k_micro = k.micro;
    r.k_macro = k.macro;
  }
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string eval_csv_header() {
  return "method,variant,mode,dataset,trial,language,f1_micro,f1_macro,k_micro,k_macro,train_seconds,test_seconds";
}

std::string eval_csv_row(const EvalReport& r) {
  const auto& i = r.info;
  return i.method + "," + i.variant + "," + i.mode + "," + i.dataset + "," + std::to_string(i.trial) + "," +
         i.language + "," + fmt(r.f1_micro) + "," + fmt(r.f1_macro) + "," + fmt(r.k_micro) + "," + fmt(r.k_macro) +
         "," + fmt(i.train_seconds) + "," + fmt(i.test_seconds);
}

nlohmann::json eval_to_json(const EvalReport& r) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& c : r.per_class) counts.push_back({{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}});
  const auto& i = r.info;
  return {{"method", i.method},         {"variant", i.variant},         {"mode", i.mode},
          {"dataset", i.dataset},       {"trial", i.trial},             {"language", i.language},
          {"f1_micro", r.f1_micro},     {"f1_macro", r.f1_macro},       {"k_micro", r.k_micro},
          {"k_macro", r.k_macro},       {"train_seconds", i.train_seconds}, {"test_seconds", i.test_seconds},
          {"per_class", std::move(counts)}};
}

EvalReport eval_from_json(const nlohmann::json& j) {
  std::vector<ConfusionCounts> counts;
  for (const auto& c : j.at("per_class")) {
    counts.push_back({c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                      c.at("fn").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>()});
  }
  RunInfo info;
  info.method = j.value("method", "");
  info.variant = j.value("variant", "");
  info.mode = j.value("mode", "");
  info.dataset = j.value("dataset", "");
  info.trial = j.value("trial", 0);
  info.language = j.value("language", "");
  info.train_seconds = j.value("train_seconds", 0.0);
  info.test_seconds = j.value("test_seconds", 0.0);
  return EvalReport::from_counts(std::move(counts), std::move(info));
}

double student_t_two_tailed(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  const double x = df / (df + t * t);
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired t-test: samples differ in length");
  if (a.size() < 2) throw DataError("paired t-test: need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double md = mean(d);
  const double sd = stddev(d);
  if (sd == 0.0) {
    if (md == 0.0) return {0.0, 1.0};
    return {md > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0.0};
  }
  const double n = static_cast<double>(d.size());
  const double t = md / (sd / std::sqrt(n));
  return {t, student_t_two_tailed(t, n - 1.0)};
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: samples differ in length");
  if (x.size() < 3) throw DataError("pearson: need at least three pairs");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: zero variance");
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::abs(rho) == 1.0) return {rho, 0.0};
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  return {rho, student_t_two_tailed(t, df)};
}

}  // namespace funnel

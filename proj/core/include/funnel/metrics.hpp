#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnel/corpus.hpp"

namespace funnel {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::uint64_t total() const { return tp + fp + fn + tn; }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Per-class counts over paired gold/predicted label sets.
std::vector<ConfusionCounts> confusion(std::span<const LabelSet> gold, std::span<const LabelSet> pred,
                                       std::size_t n_classes);

// 2TP / (2TP + FP + FN); 1 when TP = FP = FN = 0.
double f1(const ConfusionCounts& c);

// Sensitivity + specificity - 1, with the one-sided branches when either
// the positive or the negative column is empty; 0 when all counts are zero.
double k_measure(const ConfusionCounts& c);

enum class Measure { F1, K };

struct MicroMacro {
  double micro = 0.0;
  double macro = 0.0;
};

MicroMacro micro_macro_aggregate(std::span<const ConfusionCounts> per_class, Measure measure);

struct RunInfo {
  std::string method;
  std::string variant;
  std::string mode;
  std::string dataset;
  int trial = 0;
  std::string language;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

struct EvalReport {
  std::vector<ConfusionCounts> per_class;
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  double k_micro = 0.0;
  double k_macro = 0.0;
  RunInfo info;

  static EvalReport from_counts(std::vector<ConfusionCounts> per_class, RunInfo info = {});
};

// Column order: method, variant, mode, dataset, trial, language, f1_micro,
// f1_macro, k_micro, k_macro, train_seconds, test_seconds.
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& r);
nlohmann::json eval_to_json(const EvalReport& r);
// Recomputes the aggregates from the embedded counts.
EvalReport eval_from_json(const nlohmann::json& j);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

// Two-tailed paired t-test with n-1 degrees of freedom.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

struct CorrelationResult {
  double rho = 0.0;
  double p = 1.0;
};

CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// Two-tailed p-value of Student's t with df degrees of freedom.
double student_t_two_tailed(double t, double df);

double mean(std::span<const double> v);
// Sample standard deviation (n-1); 0 for fewer than two values.
double stddev(std::span<const double> v);

}  // namespace funnel

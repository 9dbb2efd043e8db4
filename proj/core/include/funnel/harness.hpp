#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnel/corpus.hpp"
#include "funnel/features.hpp"
#include "funnel/funnel.hpp"
#include "funnel/metrics.hpp"

namespace funnel {

enum class ExperimentMode { Mlclc, MonoBinary, Curves, Ablation, Calibration, Zeroshot };

std::string to_string(ExperimentMode m);
ExperimentMode experiment_mode_from_string(const std::string& s);

// Known method names: naive, fun_tat, fun_kfcv, upperbound, zeroshot.
bool is_known_method(const std::string& m);

struct ExperimentSpec {
  ExperimentMode mode = ExperimentMode::Mlclc;
  // Empty manifest: generate corpora from `synthetic`, reseeded per trial.
  std::filesystem::path manifest;
  SyntheticConfig synthetic{};
  // Empty: the mode's default method set.
  std::vector<std::string> methods;
  int trials = 10;
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint64_t seed = 1;
  // Languages playing the under-resourced role. mlclc and calibration
  // subsample all of them to target_fraction; curves and ablation loop over
  // them (empty means every language).
  std::vector<std::string> targets;
  // Unset: 0.1 for ablation, 1.0 otherwise.
  std::optional<double> target_fraction;
  // Pivot language of the upperbound method; empty picks the first language.
  std::string pivot;
  // Embedding tables for zero-shot runs over a manifest corpus.
  std::map<std::string, std::filesystem::path> embedding_files;
  FunnelConfig funnel{};
  // When false, timing columns are written as zero.
  bool record_timing = true;

  void validate() const;
  double effective_target_fraction() const;
};

struct SummaryRow {
  std::string dataset;
  std::string language;
  std::string method;
  std::string variant;
  std::string mode;
  std::size_t n = 0;
  // Indexed f1_micro, f1_macro, k_micro, k_macro.
  std::array<double, 4> mean{};
  std::array<double, 4> sd{};
  // Paired t-test against the best system of the group on each measure;
  // p = 1 for the best system itself.
  std::array<double, 4> p_vs_best{};
  std::array<bool, 4> best{};
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

// Improvement of a method over naive on macro-F1, paired by trial.
struct ImprovementRow {
  std::string dataset;
  std::string language;
  std::string method;
  std::string mode;
  std::size_t n = 0;
  double baseline_mean = 0.0;
  double method_mean = 0.0;
  double absolute = 0.0;
  // Mean of per-trial (method - naive) / naive; empty when naive scored 0
  // in some trial.
  std::optional<double> relative;
};

struct AblationReport {
  std::vector<std::string> languages;
  // improvement[s][t]: relative macro-F1 gain on t from adding s's training
  // data; the diagonal is empty.
  std::vector<std::vector<std::optional<double>>> improvement;
  std::vector<double> contribution;
  std::vector<double> benefit;
  std::vector<double> naive_f1_macro;
  std::optional<CorrelationResult> contribution_vs_naive;
  std::optional<CorrelationResult> benefit_vs_naive;
};

struct ExperimentReport {
  ExperimentMode mode = ExperimentMode::Mlclc;
  std::vector<EvalReport> runs;
  std::vector<SummaryRow> summary;
  std::vector<ImprovementRow> improvements;
  std::optional<AblationReport> ablation;
  // Mode-specific extras (zero-shot posterior summaries, meta row counts).
  nlohmann::json extra = nlohmann::json::object();
};

// Runs the protocol. When out_dir is non-empty, runs.csv is appended row by
// row as results come in, and the remaining files are written at the end.
ExperimentReport run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir = {});

void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

std::string summary_csv(const ExperimentReport& report);
std::string improvements_csv(const ExperimentReport& report);
std::string ablation_csv(const AblationReport& report);
nlohmann::json report_json(const ExperimentReport& report);

// Aggregation identities: contribution = row means, benefit = column means,
// both excluding the diagonal and empty cells.
void aggregate_ablation(AblationReport& report);

struct BenchRow {
  std::string method;
  std::size_t trials = 0;
  double train_mean = 0.0;
  double train_sd = 0.0;
  double test_mean = 0.0;
  double test_sd = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  unsigned threads = 0;
  unsigned hardware_threads = 0;
  std::size_t test_documents = 0;
};

BenchReport run_bench(const ExperimentSpec& spec);
std::string bench_csv(const BenchReport& report);

// Fitted model evaluated on the test split of every language it can handle;
// per-language per-class counts. Languages missing from the model are
// routed through the zero-shot branch when present, else skipped.
std::map<std::string, std::vector<ConfusionCounts>> evaluate_model(
    const FunnelModel& model, const MultilingualCorpus& corpus,
    const std::map<std::string, EmbeddingTable>* embeddings = nullptr);

// Trains one of the named methods.
FunnelModel train_method(const std::string& method, const MultilingualCorpus& corpus, const FunnelConfig& cfg,
                         const std::map<std::string, EmbeddingTable>* embeddings = nullptr);

}  // namespace funnel

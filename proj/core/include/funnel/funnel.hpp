#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "funnel/calibrate.hpp"
#include "funnel/corpus.hpp"
#include "funnel/features.hpp"
#include "funnel/learn.hpp"

namespace funnel {

enum class Variant { TAT, KFCV };
enum class MetaLearner { Rbf, Linear };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct FunnelConfig {
  Variant variant = Variant::TAT;
  CalibrationMode mode = CalibrationMode::Calib;
  // Folds used by the KFCV variant to produce meta-training vectors.
  int k = 10;
  // Internal folds producing the out-of-fold scores that the deployed
  // per-language calibrators are fitted on.
  int calibration_folds = 3;
  // Base classifiers keep C = 1; only the meta-classifier is grid-searched.
  TrainConfig base{};
  TrainConfig meta{};
  std::vector<double> meta_grid{kDefaultRegGrid.begin(), kDefaultRegGrid.end()};
  int meta_grid_folds = 5;
  // Grid for per-language classifiers of the naive baseline.
  std::vector<double> naive_grid{kDefaultRegGrid.begin(), kDefaultRegGrid.end()};
  MetaLearner meta_learner = MetaLearner::Rbf;
  int rff_dim = 300;
  // 0 selects 1 / |C| for the meta map and 1 / dim for the zero-shot map.
  double rff_gamma = 0.0;
  // Read NoCalib as (alpha, beta) = (-1, 0) instead of (1, 0).
  bool nocalib_monotone = false;
  // Languages with an empty training split get all-trivial tier-1 models
  // instead of raising an error (learning-curve experiments at fraction 0).
  bool allow_empty_languages = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Tier-1 model of one language.
struct LanguageModel {
  WeightingModel weighting;
  MultilabelClassifier classifier;
  std::vector<PlattCalibrator> calibrators;
};

struct MetaClassifier {
  std::optional<RandomFourierMap> feature_map;
  MultilabelClassifier classifier;
  double reg_strength = 1.0;

  std::vector<double> features(std::span<const double> posterior) const;
  std::vector<double> raw_scores(std::span<const double> posterior) const;
};

// Shared-space classifier over embedding averages, used for languages with no
// training data.
struct ZeroShotBranch {
  std::size_t embedding_dim = 0;
  // Per-dimension standardization fitted on the training averages.
  std::vector<double> center;
  std::vector<double> scale;
  RandomFourierMap feature_map;
  MultilabelClassifier classifier;
  std::vector<PlattCalibrator> calibrators;

  std::vector<double> features(std::span<const double> embedding_average) const;
};

struct FoldRecord {
  std::string language;
  int fold = 0;
  std::size_t train_size = 0;
  std::size_t held_out = 0;
  // Classes whose fold classifier was trained on all of Tr_i because the
  // other folds held no positives.
  std::vector<int> fallback_classes;
  std::vector<int> fold_assignment;
};

// Instrumentation captured at training time; not serialized.
struct TrainingTrace {
  // Meta-training inputs in canonical order (language, then doc id).
  DenseMatrix meta_inputs;
  std::vector<std::string> meta_row_languages;
  std::vector<FoldRecord> folds;
  std::size_t fold_calibrators = 0;
  std::size_t language_calibrators = 0;
  double tier1_seconds = 0.0;
  double calibration_seconds = 0.0;
  double tier2_seconds = 0.0;
};

enum class ModelKind { Funnel, Naive };

struct FunnelModel {
  ModelKind kind = ModelKind::Funnel;
  FunnelConfig config;
  std::vector<std::string> class_names;
  std::map<std::string, LanguageModel> tier1;
  std::optional<MetaClassifier> tier2;
  std::optional<ZeroShotBranch> zero_shot;
  TrainingTrace trace;

  std::size_t n_classes() const { return class_names.size(); }
};

struct Prediction {
  std::string doc_id;
  // Tier-1 output (posteriors, or raw scores under NoProb / naive models).
  std::vector<double> posterior;
  LabelSet decisions;
  // Number of language-specific / shared-space tier-1 classifiers consulted.
  int language_classifier_calls = 0;
  int shared_classifier_calls = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

FunnelModel train_funnel(const MultilingualCorpus& corpus, const FunnelConfig& cfg);

// Independent per-language classifiers with per-language regularization
// search; the model has no tier-2.
FunnelModel train_naive(const MultilingualCorpus& corpus, const FunnelConfig& cfg);

FunnelModel train_zeroshot(const MultilingualCorpus& corpus, const std::map<std::string, EmbeddingTable>& embeddings,
                           const FunnelConfig& cfg);

Prediction predict(const FunnelModel& model, const std::string& language, const SparseVector& raw_counts);

// Routes seen languages through predict(); other languages go through the
// shared-space classifier using the document's own embedding table.
Prediction predict_zeroshot(const FunnelModel& model, const std::string& language, const SparseVector& raw_counts,
                            const EmbeddingTable* doc_embeddings);

// Tier-1 posterior vector of a document under the model's calibration mode.
std::vector<double> tier1_posteriors(const FunnelModel& model, const std::string& language,
                                     const SparseVector& raw_counts);

// Versioned JSON serialization. load_model rejects other format versions.
inline constexpr int kModelFormatVersion = 1;
void save_model(const FunnelModel& model, const std::filesystem::path& path);
FunnelModel load_model(const std::filesystem::path& path);

}  // namespace funnel

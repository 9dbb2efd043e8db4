#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "funnel/corpus.hpp"
#include "funnel/sparse.hpp"

namespace funnel {

// Per-language inverse document frequencies, idf[f] = ln(|Tr| / df(f)),
// zero for features never seen in training.
struct WeightingModel {
  std::string language;
  std::vector<double> idf;
  std::size_t n_train_docs = 0;

  std::size_t dimension() const { return idf.size(); }

  // Model that weights every feature by 1; used for languages never seen in
  // training (zero-shot documents still need tf weighting and normalization).
  static WeightingModel uniform(std::string language, std::size_t dimension);

  friend bool operator==(const WeightingModel&, const WeightingModel&) = default;
};

WeightingModel fit_weighting(const LanguageDataset& train);

// ln(1 + count) * idf, then cosine normalization. All-zero vectors stay zero.
// Features beyond the model's dimension are dropped.
SparseVector transform(const WeightingModel& model, const SparseVector& raw_counts);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }

  void set(std::uint32_t feature, std::vector<double> vec);
  // nullptr when the feature has no embedding.
  const std::vector<double>* find(std::uint32_t feature) const;

  // Plain text: "<count> <dimension>" header, then "<feature> v1 ... vd".
  static EmbeddingTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<std::uint32_t, std::vector<double>> vectors_;
};

// Weighted mean of the embeddings of covered features; zero vector when no
// feature is covered.
std::vector<double> embed_average(const SparseVector& weighted_doc, const EmbeddingTable& table);

}  // namespace funnel

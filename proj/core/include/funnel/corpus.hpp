#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "funnel/sparse.hpp"

namespace funnel {

// Sorted, duplicate-free class indices.
using LabelSet = std::vector<int>;

struct Document {
  std::string id;
  SparseVector vector;
  LabelSet labels;

  friend bool operator==(const Document&, const Document&) = default;
};

struct LanguageDataset {
  std::string language;
  std::vector<Document> documents;
  std::size_t vocabulary_size = 0;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }

  // Feature indices below vocabulary_size, unique doc ids, valid vectors
  // and label indices below n_classes.
  void validate(std::size_t n_classes) const;

  friend bool operator==(const LanguageDataset&, const LanguageDataset&) = default;
};

// group id -> (language -> doc id)
using AlignmentTable = std::map<std::string, std::map<std::string, std::string>>;

struct MultilingualCorpus {
  std::vector<std::string> class_names;
  std::map<std::string, LanguageDataset> train;
  std::map<std::string, LanguageDataset> test;
  bool parallel = false;
  AlignmentTable alignment;

  std::size_t n_classes() const { return class_names.size(); }
  std::vector<std::string> languages() const;

  void validate() const;

  friend bool operator==(const MultilingualCorpus&, const MultilingualCorpus&) = default;
};

struct SyntheticConfig {
  std::size_t n_languages = 5;
  std::size_t n_classes = 20;
  // Small vocabularies, long documents and a strongly correlated label chain:
  // learnable from a few dozen documents, with class dependencies to exploit.
  std::size_t vocab_per_language = 300;
  std::size_t docs_per_language_train = 200;
  std::size_t docs_per_language_test = 200;
  std::size_t mean_doc_length = 80;
  double label_correlation = 0.95;
  std::pair<double, double> class_prevalence_range{0.05, 0.3};
  double signal_strength = 2.0;
  std::uint64_t seed = 1;
  // Render every latent document in every language and record the
  // alignment table.
  bool parallel = false;
  // Dimension of the aligned synthetic embeddings; 0 disables them.
  std::size_t embedding_dim = 32;
  double embedding_noise = 0.1;

  // Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

// Language codes used by the generator, alphabetical.
std::vector<std::string> synthetic_language_ids(std::size_t n);

MultilingualCorpus generate_synthetic(const SyntheticConfig& cfg);

// Parse one dataset line: "<labels> <feat>:<weight> ...", with "-" for an
// empty label field.
Document parse_document_line(const std::string& line, std::string id);
std::string format_document_line(const Document& doc);

struct LoadedCorpus {
  MultilingualCorpus corpus;
  // language -> embedding table path, when the manifest lists them.
  std::map<std::string, std::filesystem::path> embedding_files;
  // Present for generated corpora; lets experiments regenerate per trial.
  std::optional<SyntheticConfig> synthetic;
};

MultilingualCorpus load_corpus(const std::filesystem::path& manifest_path);
LoadedCorpus load_corpus_with_extras(const std::filesystem::path& manifest_path);

// Writes <dir>/manifest.json plus one data file per language and split.
std::filesystem::path save_corpus(const MultilingualCorpus& corpus, const std::filesystem::path& dir,
                                  const std::map<std::string, std::filesystem::path>& embedding_files = {},
                                  const std::optional<SyntheticConfig>& synthetic = std::nullopt);

// Keeps ceil(fraction * |Tr|) training documents of one language, chosen as
// a prefix of a seeded permutation so smaller fractions nest inside larger
// ones.
MultilingualCorpus subsample_training(const MultilingualCorpus& corpus, const std::string& language,
                                      double fraction, std::uint64_t seed);

// Monolingual corpus where every training document is replaced by its aligned
// pivot-language version; test split is the pivot's.
MultilingualCorpus make_upperbound_view(const MultilingualCorpus& corpus, const std::string& pivot_language);

// Corpus restricted to a subset of languages (both splits).
MultilingualCorpus restrict_languages(const MultilingualCorpus& corpus, const std::vector<std::string>& keep);

// Corpus with a single class, c, relabelled as class 0.
MultilingualCorpus restrict_to_class(const MultilingualCorpus& corpus, std::size_t c);

}  // namespace funnel

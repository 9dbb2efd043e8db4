#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "funnel/corpus.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("funnel-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline funnel::Document doc(std::string id, funnel::LabelSet labels,
                            std::vector<funnel::SparseEntry> entries) {
  return {std::move(id), funnel::make_sparse(std::move(entries)), std::move(labels)};
}

// Small synthetic config that trains in well under a second.
inline funnel::SyntheticConfig tiny_config(std::uint64_t seed = 1) {
  funnel::SyntheticConfig c;
  c.n_languages = 3;
  c.n_classes = 5;
  c.vocab_per_language = 120;
  c.docs_per_language_train = 60;
  c.docs_per_language_test = 40;
  c.mean_doc_length = 30;
  c.class_prevalence_range = {0.1, 0.4};
  c.embedding_dim = 8;
  c.seed = seed;
  return c;
}

}  // namespace testutil

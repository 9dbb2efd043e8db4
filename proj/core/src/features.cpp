#include "funnel/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "funnel/error.hpp"

namespace funnel {
namespace fs = std::filesystem;

WeightingModel WeightingModel::uniform(std::string language, std::size_t dimension) {
  WeightingModel m;
  m.language = std::move(language);
  m.idf.assign(dimension, 1.0);
  return m;
}

WeightingModel fit_weighting(const LanguageDataset& train) {
  if (train.empty()) throw DataError("cannot fit term weighting on an empty training set (" + train.language + ")");
  std::vector<std::size_t> df(train.vocabulary_size, 0);
  for (const auto& d : train.documents) {
    for (const auto& e : d.vector.entries) {
      if (e.index >= df.size()) throw DataError("feature index beyond vocabulary in " + train.language);
      if (e.weight > 0.0) ++df[e.index];
    }
  }
  WeightingModel m;
  m.language = train.language;
  m.n_train_docs = train.size();
  m.idf.resize(df.size(), 0.0);
  const double n = static_cast<double>(train.size());
  for (std::size_t f = 0; f < df.size(); ++f) {
    if (df[f] > 0) m.idf[f] = std::log(n / static_cast<double>(df[f]));
  }
  return m;
}

SparseVector transform(const WeightingModel& model, const SparseVector& raw_counts) {
  SparseVector out;
  out.entries.reserve(raw_counts.size());
  double norm2 = 0.0;
  for (const auto& e : raw_counts.entries) {
    if (e.weight < 0.0) throw DataError("negative term count at feature " + std::to_string(e.index));
    if (e.index >= model.idf.size()) continue;
    const double w = std::log1p(e.weight) * model.idf[e.index];
    if (w == 0.0) continue;
    out.entries.push_back({e.index, w});
    norm2 += w * w;
  }
  if (norm2 == 0.0) return {};
  const double norm = std::sqrt(norm2);
  for (auto& e : out.entries) e.weight /= norm;
  return out;
}

void EmbeddingTable::set(std::uint32_t feature, std::vector<double> vec) {
  if (vec.size() != dimension_) {
    throw DataError("embedding for feature " + std::to_string(feature) + " has dimension " +
                    std::to_string(vec.size()) + ", expected " + std::to_string(dimension_));
  }
  for (double v : vec) {
    if (!std::isfinite(v)) throw DataError("non-finite embedding value for feature " + std::to_string(feature));
  }
  vectors_[feature] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(std::uint32_t feature) const {
  const auto it = vectors_.find(feature);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable EmbeddingTable::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding table " + path.string());
  std::string line;
  std::size_t count = 0, dim = 0;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  {
    std::istringstream header(line);
    if (!(header >> count >> dim) || dim == 0) throw DataError(path.string() + ":1: malformed header");
  }
  EmbeddingTable table(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::uint32_t feature = 0;
    if (!(row >> feature)) throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad feature index");
    std::vector<double> vec;
    vec.reserve(dim);
    std::string tok;
    while (row >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
      vec.push_back(v);
    }
    try {
      table.set(feature, std::move(vec));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (table.size() != count) {
    throw DataError(path.string() + ": header declares " + std::to_string(count) + " vectors, found " +
                    std::to_string(table.size()));
  }
  return table;
}

void EmbeddingTable::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<std::uint32_t> keys;
  keys.reserve(vectors_.size());
  for (const auto& [k, _] : vectors_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  out << keys.size() << ' ' << dimension_ << '\n';
  char buf[64];
  for (auto k : keys) {
    out << k;
    for (double v : vectors_.at(k)) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<double> embed_average(const SparseVector& weighted_doc, const EmbeddingTable& table) {
  std::vector<double> acc(table.dimension(), 0.0);
  double total = 0.0;
  for (const auto& e : weighted_doc.entries) {
    const auto* vec = table.find(e.index);
    if (vec == nullptr || e.weight == 0.0) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += e.weight * (*vec)[i];
    total += e.weight;
  }
  if (total == 0.0) return acc;
  for (double& v : acc) v /= total;
  return acc;
}

}  // namespace funnel

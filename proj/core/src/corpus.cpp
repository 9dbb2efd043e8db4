#include "funnel/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/random.hpp"

namespace funnel {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

LabelSet parse_labels(std::string_view field, const std::vector<std::string>* class_names) {
  LabelSet labels;
  if (field == "-") return labels;
  std::size_t start = 0;
  while (start <= field.size()) {
    const std::size_t comma = field.find(',', start);
    const std::string_view tok = field.substr(start, comma == std::string_view::npos ? field.npos : comma - start);
    int idx = -1;
    if (!parse_number(tok, idx)) {
      if (class_names == nullptr) throw DataError("malformed label '" + std::string(tok) + "'");
      const auto it = std::find(class_names->begin(), class_names->end(), tok);
      if (it == class_names->end()) throw DataError("unknown class name '" + std::string(tok) + "'");
      idx = static_cast<int>(it - class_names->begin());
    }
    if (idx < 0) throw DataError("negative label index '" + std::string(tok) + "'");
    labels.push_back(idx);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw DataError("duplicate label in '" + std::string(field) + "'");
  }
  return labels;
}

Document parse_line_impl(std::string_view line, std::string id, const std::vector<std::string>* class_names) {
  const auto tokens = split_ws(trim(line));
  if (tokens.empty()) throw DataError("empty line");
  Document doc;
  doc.id = std::move(id);
  doc.labels = parse_labels(tokens[0], class_names);
  doc.vector.entries.reserve(tokens.size() - 1);
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto tok = tokens[t];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos) throw DataError("expected <feature>:<weight>, got '" + std::string(tok) + "'");
    std::uint32_t index = 0;
    double weight = 0.0;
    if (!parse_number(tok.substr(0, colon), index)) {
      throw DataError("bad feature index in '" + std::string(tok) + "'");
    }
    if (!parse_number(tok.substr(colon + 1), weight)) {
      throw DataError("bad weight in '" + std::string(tok) + "'");
    }
    doc.vector.entries.push_back({index, weight});
  }
  doc.vector.validate();
  return doc;
}

std::vector<Document> read_dataset_file(const fs::path& path, const std::vector<std::string>& class_names,
                                        std::size_t vocabulary_size, const std::vector<std::string>& ids,
                                        const std::string& default_prefix) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::size_t pos = docs.size();
    std::string id;
    if (!ids.empty()) {
      if (pos >= ids.size()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": more lines than doc ids");
      }
      id = ids[pos];
    } else {
      id = default_prefix + std::to_string(line_no);
    }
    try {
      Document doc = parse_line_impl(line, std::move(id), &class_names);
      for (int l : doc.labels) {
        if (static_cast<std::size_t>(l) >= class_names.size()) {
          throw DataError("unknown class index " + std::to_string(l));
        }
      }
      if (doc.vector.span_dimension() > vocabulary_size) {
        throw DataError("feature index " + std::to_string(doc.vector.entries.back().index) +
                        " >= vocabulary size " + std::to_string(vocabulary_size));
      }
      docs.push_back(std::move(doc));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!ids.empty() && ids.size() != docs.size()) {
    throw DataError(path.string() + ": " + std::to_string(ids.size()) + " doc ids for " +
                    std::to_string(docs.size()) + " lines");
  }
  return docs;
}

json synthetic_to_json(const SyntheticConfig& c) {
  return json{{"n_languages", c.n_languages},
              {"n_classes", c.n_classes},
              {"vocab_per_language", c.vocab_per_language},
              {"docs_per_language_train", c.docs_per_language_train},
              {"docs_per_language_test", c.docs_per_language_test},
              {"mean_doc_length", c.mean_doc_length},
              {"label_correlation", c.label_correlation},
              {"class_prevalence_range", {c.class_prevalence_range.first, c.class_prevalence_range.second}},
              {"signal_strength", c.signal_strength},
              {"seed", c.seed},
              {"parallel", c.parallel},
              {"embedding_dim", c.embedding_dim},
              {"embedding_noise", c.embedding_noise}};
}

}  // namespace

std::vector<std::string> MultilingualCorpus::languages() const {
  std::set<std::string> all;
  for (const auto& [lang, _] : train) all.insert(lang);
  for (const auto& [lang, _] : test) all.insert(lang);
  return {all.begin(), all.end()};
}

void LanguageDataset::validate(std::size_t n_classes) const {
  std::unordered_set<std::string> seen;
  for (const auto& d : documents) {
    if (!seen.insert(d.id).second) throw DataError("duplicate doc id '" + d.id + "' in language " + language);
    d.vector.validate();
    if (d.vector.span_dimension() > vocabulary_size) {
      throw DataError("document '" + d.id + "' references feature beyond vocabulary of " + language);
    }
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      if (d.labels[i] < 0 || static_cast<std::size_t>(d.labels[i]) >= n_classes) {
        throw DataError("document '" + d.id + "' has unknown class index " + std::to_string(d.labels[i]));
      }
      if (i > 0 && d.labels[i] <= d.labels[i - 1]) {
        throw DataError("document '" + d.id + "' labels not sorted/unique");
      }
    }
  }
}

void MultilingualCorpus::validate() const {
  if (class_names.empty()) throw DataError("corpus has no classes");
  for (const auto& [lang, ds] : train) {
    if (ds.language != lang) throw DataError("train dataset keyed '" + lang + "' names language " + ds.language);
    ds.validate(n_classes());
  }
  for (const auto& [lang, ds] : test) {
    if (ds.language != lang) throw DataError("test dataset keyed '" + lang + "' names language " + ds.language);
    ds.validate(n_classes());
    if (const auto it = train.find(lang); it != train.end() && it->second.vocabulary_size != ds.vocabulary_size) {
      throw DataError("vocabulary size differs between splits of " + lang);
    }
  }
}

Document parse_document_line(const std::string& line, std::string id) {
  return parse_line_impl(line, std::move(id), nullptr);
}

std::string format_document_line(const Document& doc) {
  std::string out;
  if (doc.labels.empty()) {
    out = "-";
  } else {
    for (std::size_t i = 0; i < doc.labels.size(); ++i) {
      if (i > 0) out += ',';
      out += std::to_string(doc.labels[i]);
    }
  }
  for (const auto& e : doc.vector.entries) {
    out += ' ';
    out += std::to_string(e.index);
    out += ':';
    out += format_double(e.weight);
  }
  return out;
}

LoadedCorpus load_corpus_with_extras(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();

  LoadedCorpus out;
  auto& corpus = out.corpus;
  try {
    if (m.contains("version") && m.at("version").get<int>() != kManifestVersion) {
      throw DataError("unsupported manifest version " + m.at("version").dump());
    }
    corpus.class_names = m.at("class_names").get<std::vector<std::string>>();
    corpus.parallel = m.value("parallel", false);
    for (const auto& [lang, entry] : m.at("languages").items()) {
      const auto vocab = entry.at("vocabulary_size").get<std::size_t>();
      for (const char* split : {"train", "test"}) {
        if (!entry.contains(split)) continue;
        const auto& s = entry.at(split);
        std::vector<std::string> ids;
        if (s.contains("doc_ids")) ids = s.at("doc_ids").get<std::vector<std::string>>();
        LanguageDataset ds;
        ds.language = lang;
        ds.vocabulary_size = vocab;
        ds.documents = read_dataset_file(base / s.at("path").get<std::string>(), corpus.class_names, vocab, ids,
                                         lang + ":" + split + ":");
        (std::string_view(split) == "train" ? corpus.train : corpus.test)[lang] = std::move(ds);
      }
    }
    if (m.contains("alignment")) corpus.alignment = m.at("alignment").get<AlignmentTable>();
    if (m.contains("embeddings")) {
      for (const auto& [lang, p] : m.at("embeddings").items()) out.embedding_files[lang] = base / p.get<std::string>();
    }
    if (m.contains("synthetic")) {
      const auto& s = m.at("synthetic");
      SyntheticConfig c;
      c.n_languages = s.at("n_languages");
      c.n_classes = s.at("n_classes");
      c.vocab_per_language = s.at("vocab_per_language");
      c.docs_per_language_train = s.at("docs_per_language_train");
      c.docs_per_language_test = s.at("docs_per_language_test");
      c.mean_doc_length = s.at("mean_doc_length");
      c.label_correlation = s.at("label_correlation");
      c.class_prevalence_range = {s.at("class_prevalence_range").at(0), s.at("class_prevalence_range").at(1)};
      c.signal_strength = s.at("signal_strength");
      c.seed = s.at("seed");
      c.parallel = s.value("parallel", false);
      c.embedding_dim = s.value("embedding_dim", std::size_t{0});
      c.embedding_noise = s.value("embedding_noise", 0.1);
      out.synthetic = c;
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + ": " + e.what());
  }

  if (corpus.parallel) {
    for (const auto& [group, members] : corpus.alignment) {
      if (members.empty()) throw DataError("alignment group '" + group + "' is empty");
    }
  }
  corpus.validate();
  return out;
}

MultilingualCorpus load_corpus(const fs::path& manifest_path) {
  return std::move(load_corpus_with_extras(manifest_path).corpus);
}

fs::path save_corpus(const MultilingualCorpus& corpus, const fs::path& dir,
                     const std::map<std::string, fs::path>& embedding_files,
                     const std::optional<SyntheticConfig>& synthetic) {
  corpus.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());

  json languages = json::object();
  for (const auto& lang : corpus.languages()) {
    json entry = json::object();
    std::size_t vocab = 0;
    for (const auto* splits : {&corpus.train, &corpus.test}) {
      const auto it = splits->find(lang);
      if (it == splits->end()) continue;
      const std::string split = splits == &corpus.train ? "train" : "test";
      const auto& ds = it->second;
      vocab = ds.vocabulary_size;
      const std::string file = lang + "." + split + ".txt";
      std::ofstream out(dir / file);
      if (!out) throw DataError("cannot write " + (dir / file).string());
      json ids = json::array();
      for (const auto& d : ds.documents) {
        out << format_document_line(d) << '\n';
        ids.push_back(d.id);
      }
      if (!out) throw DataError("write failed for " + (dir / file).string());
      entry[split] = json{{"path", file}, {"doc_ids", std::move(ids)}};
    }
    entry["vocabulary_size"] = vocab;
    languages[lang] = std::move(entry);
  }

  json m = {{"format", "funnel-corpus"},
            {"version", kManifestVersion},
            {"class_names", corpus.class_names},
            {"parallel", corpus.parallel},
            {"languages", std::move(languages)}};
  if (!corpus.alignment.empty()) m["alignment"] = corpus.alignment;
  if (!embedding_files.empty()) {
    json emb = json::object();
    for (const auto& [lang, p] : embedding_files) emb[lang] = p.lexically_relative(dir).generic_string();
    m["embeddings"] = std::move(emb);
  }
  if (synthetic) m["synthetic"] = synthetic_to_json(*synthetic);

  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  if (!out) throw DataError("cannot write " + manifest.string());
  out << m.dump(1) << '\n';
  if (!out) throw DataError("write failed for " + manifest.string());
  return manifest;
}

MultilingualCorpus subsample_training(const MultilingualCorpus& corpus, const std::string& language, double fraction,
                                      std::uint64_t seed) {
  const auto it = corpus.train.find(language);
  if (it == corpus.train.end()) throw DataError("unknown language '" + language + "'");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in [0,1]");

  const auto& docs = it->second.documents;
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(d.id);
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, stable_hash("subsample:" + language)));
  rng.shuffle(ids);

  const auto keep_count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(docs.size()) - 1e-9));
  const std::unordered_set<std::string> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep_count));

  MultilingualCorpus out = corpus;
  auto& kept = out.train.at(language).documents;
  kept.clear();
  for (const auto& d : docs) {
    if (keep.contains(d.id)) kept.push_back(d);
  }
  return out;
}

MultilingualCorpus make_upperbound_view(const MultilingualCorpus& corpus, const std::string& pivot) {
  if (!corpus.parallel) throw DataError("upper-bound view requires a parallel corpus");
  const auto pivot_train = corpus.train.find(pivot);
  if (pivot_train == corpus.train.end()) throw DataError("pivot language '" + pivot + "' has no training split");

  // (language, doc id) -> group
  std::map<std::pair<std::string, std::string>, const std::string*> group_of;
  for (const auto& [group, members] : corpus.alignment) {
    for (const auto& [lang, id] : members) group_of[{lang, id}] = &group;
  }
  std::unordered_map<std::string, const Document*> pivot_docs;
  for (const auto& d : pivot_train->second.documents) pivot_docs[d.id] = &d;

  LanguageDataset view;
  view.language = pivot;
  view.vocabulary_size = pivot_train->second.vocabulary_size;
  for (const auto& [lang, ds] : corpus.train) {
    for (const auto& d : ds.documents) {
      const auto g = group_of.find({lang, d.id});
      if (g == group_of.end()) throw DataError("document '" + d.id + "' of " + lang + " is not aligned");
      const auto& members = corpus.alignment.at(*g->second);
      const auto p = members.find(pivot);
      if (p == members.end()) throw DataError("alignment group '" + *g->second + "' lacks a " + pivot + " version");
      const auto doc = pivot_docs.find(p->second);
      if (doc == pivot_docs.end()) {
        throw DataError("pivot document '" + p->second + "' missing from the " + pivot + " training split");
      }
      Document replaced = *doc->second;
      if (lang != pivot) replaced.id += "#" + lang;
      view.documents.push_back(std::move(replaced));
    }
  }

  MultilingualCorpus out;
  out.class_names = corpus.class_names;
  out.train[pivot] = std::move(view);
  if (const auto t = corpus.test.find(pivot); t != corpus.test.end()) out.test[pivot] = t->second;
  return out;
}

MultilingualCorpus restrict_languages(const MultilingualCorpus& corpus, const std::vector<std::string>& keep) {
  MultilingualCorpus out;
  out.class_names = corpus.class_names;
  out.parallel = corpus.parallel;
  for (const auto& lang : keep) {
    if (const auto it = corpus.train.find(lang); it != corpus.train.end()) out.train[lang] = it->second;
    if (const auto it = corpus.test.find(lang); it != corpus.test.end()) out.test[lang] = it->second;
  }
  for (const auto& [group, members] : corpus.alignment) {
    std::map<std::string, std::string> kept;
    for (const auto& [lang, id] : members) {
      if (std::find(keep.begin(), keep.end(), lang) != keep.end()) kept[lang] = id;
    }
    if (!kept.empty()) out.alignment[group] = std::move(kept);
  }
  return out;
}

MultilingualCorpus restrict_to_class(const MultilingualCorpus& corpus, std::size_t c) {
  if (c >= corpus.n_classes()) throw DataError("class index out of range");
  MultilingualCorpus out = corpus;
  out.class_names = {corpus.class_names[c]};
  for (auto* splits : {&out.train, &out.test}) {
    for (auto& [_, ds] : *splits) {
      for (auto& d : ds.documents) {
        const bool positive = std::binary_search(d.labels.begin(), d.labels.end(), static_cast<int>(c));
        d.labels = positive ? LabelSet{0} : LabelSet{};
      }
    }
  }
  return out;
}

}  // namespace funnel

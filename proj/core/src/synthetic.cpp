#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "funnel/corpus.hpp"
#include "funnel/error.hpp"
#include "funnel/random.hpp"
#include "funnel/synthetic.hpp"

namespace funnel {
namespace {

// Streams carved out of the config seed.
constexpr std::uint64_t kLatentStream = 1;
constexpr std::uint64_t kEmbeddingStream = 2;
constexpr std::uint64_t kLabelStream = 3;

class Categorical {
 public:
  explicit Categorical(const std::vector<double>& weights) : cdf_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
  }
  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

// Everything shared by all languages: class prevalences, the label chain, and
// the concept-level topics.
struct Latent {
  std::vector<double> prevalence;
  std::vector<std::size_t> chain;  // classes ordered by ascending prevalence
  std::vector<double> background;  // over concepts
  std::vector<std::vector<std::pair<std::size_t, double>>> topics;  // per class, (concept, weight)
};

// Per-language rendering of the latent topics onto its own word indices.
struct LanguageLexicon {
  std::vector<std::uint32_t> word_of_concept;
  std::vector<Categorical> topic_words;  // per class, over topic entries
  Categorical background;
};

Latent make_latent(const SyntheticConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kLatentStream));
  Latent lat;
  const auto [lo, hi] = cfg.class_prevalence_range;
  lat.prevalence.resize(cfg.n_classes);
  for (auto& p : lat.prevalence) p = lo + (hi - lo) * rng.uniform();
  lat.chain.resize(cfg.n_classes);
  std::iota(lat.chain.begin(), lat.chain.end(), std::size_t{0});
  std::stable_sort(lat.chain.begin(), lat.chain.end(),
                   [&](std::size_t a, std::size_t b) { return lat.prevalence[a] < lat.prevalence[b]; });

  const std::size_t k = cfg.vocab_per_language;
  std::vector<std::size_t> rank(k);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  rng.shuffle(rank);
  lat.background.resize(k);
  for (std::size_t c = 0; c < k; ++c) lat.background[c] = 1.0 / static_cast<double>(rank[c] + 1);

  const std::size_t width = std::clamp<std::size_t>(k / std::max<std::size_t>(1, cfg.n_classes), 5, k);
  lat.topics.resize(cfg.n_classes);
  std::vector<std::size_t> concepts(k);
  for (auto& topic : lat.topics) {
    std::iota(concepts.begin(), concepts.end(), std::size_t{0});
    for (std::size_t i = 0; i < width; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(k - i));
      std::swap(concepts[i], concepts[j]);
      topic.emplace_back(concepts[i], rng.exponential() + 0.1);
    }
  }
  return lat;
}

LanguageLexicon make_lexicon(const SyntheticConfig& cfg, const Latent& lat, const std::string& language) {
  Rng rng(derive_seed(cfg.seed, stable_hash("lexicon:" + language)));
  std::vector<std::uint32_t> perm(cfg.vocab_per_language);
  std::iota(perm.begin(), perm.end(), std::uint32_t{0});
  rng.shuffle(perm);

  std::vector<Categorical> topic_words;
  topic_words.reserve(lat.topics.size());
  for (const auto& topic : lat.topics) {
    std::vector<double> w;
    w.reserve(topic.size());
    for (const auto& [concept_id, weight] : topic) w.push_back(weight * std::exp(0.5 * rng.normal()));
    topic_words.emplace_back(w);
  }
  return {std::move(perm), std::move(topic_words), Categorical(lat.background)};
}

LabelSet sample_labels(const SyntheticConfig& cfg, const Latent& lat, Rng& rng) {
  LabelSet labels;
  bool prev_on = false;
  double prev_p = 0.0;
  for (std::size_t pos = 0; pos < lat.chain.size(); ++pos) {
    const std::size_t c = lat.chain[pos];
    const double p = lat.prevalence[c];
    double q = p;
    if (pos > 0) {
      const double on_given_on = p + cfg.label_correlation * (1.0 - p);
      // keeps the marginal at p; prev_p <= p makes this non-negative
      const double on_given_off = (p - prev_p * on_given_on) / (1.0 - prev_p);
      q = prev_on ? on_given_on : on_given_off;
    }
    prev_on = rng.uniform() < q;
    prev_p = p;
    if (prev_on) labels.push_back(static_cast<int>(c));
  }
  std::sort(labels.begin(), labels.end());
  return labels;
}

SparseVector render(const SyntheticConfig& cfg, const Latent& lat, const LanguageLexicon& lex, const LabelSet& labels,
                    Rng& rng) {
  const auto length = std::max<std::uint64_t>(1, rng.poisson(static_cast<double>(cfg.mean_doc_length)));
  const double topical = cfg.signal_strength / (1.0 + cfg.signal_strength);
  std::vector<SparseEntry> tokens;
  tokens.reserve(length);
  for (std::uint64_t t = 0; t < length; ++t) {
    std::size_t concept_id;
    if (!labels.empty() && rng.uniform() < topical) {
      const auto c = static_cast<std::size_t>(labels[rng.below(labels.size())]);
      concept_id = lat.topics[c][lex.topic_words[c].sample(rng)].first;
    } else {
      concept_id = lex.background.sample(rng);
    }
    tokens.push_back({lex.word_of_concept[concept_id], 1.0});
  }
  return make_sparse(std::move(tokens));
}

std::string doc_id(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", i);
  return prefix + buf;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v < 1) throw ConfigError(std::string("synthetic config: field '") + field + "' must be >= 1");
  };
  positive(n_languages, "n_languages");
  positive(n_classes, "n_classes");
  positive(vocab_per_language, "vocab_per_language");
  positive(docs_per_language_train, "docs_per_language_train");
  positive(docs_per_language_test, "docs_per_language_test");
  positive(mean_doc_length, "mean_doc_length");
  if (!(label_correlation >= 0.0 && label_correlation <= 1.0)) {
    throw ConfigError("synthetic config: field 'label_correlation' must lie in [0,1]");
  }
  const auto [lo, hi] = class_prevalence_range;
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) {
    throw ConfigError("synthetic config: field 'class_prevalence_range' must satisfy 0 < low <= high < 1");
  }
  if (!(signal_strength > 0.0) || !std::isfinite(signal_strength)) {
    throw ConfigError("synthetic config: field 'signal_strength' must be > 0");
  }
  if (!(embedding_noise >= 0.0)) throw ConfigError("synthetic config: field 'embedding_noise' must be >= 0");
}

std::vector<std::string> synthetic_language_ids(std::size_t n) {
  static const std::vector<std::string> codes = {"da", "de", "en", "es", "fi", "fr",
                                                 "hu", "it", "nl", "pt", "sv"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < codes.size()) {
      out.push_back(codes[i]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "x%03zu", i);
      out.emplace_back(buf);
    }
  }
  return out;
}

MultilingualCorpus generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const Latent lat = make_latent(cfg);
  const double total_train = static_cast<double>(cfg.n_languages * cfg.docs_per_language_train);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    if (lat.prevalence[c] * total_train < 1.0) {
      throw DataError("infeasible prevalence for class c" + std::to_string(c) + ": expected " +
                      std::to_string(lat.prevalence[c] * total_train) + " positive training documents");
    }
  }

  MultilingualCorpus corpus;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%02zu", c);
    corpus.class_names.emplace_back(buf);
  }
  corpus.parallel = cfg.parallel;

  const auto languages = synthetic_language_ids(cfg.n_languages);
  std::vector<LanguageLexicon> lexicons;
  for (const auto& lang : languages) lexicons.push_back(make_lexicon(cfg, lat, lang));

  struct Split {
    const char* tag;
    std::size_t n;
    std::map<std::string, LanguageDataset>* out;
  };
  for (const Split split : {Split{"tr", cfg.docs_per_language_train, &corpus.train},
                            Split{"te", cfg.docs_per_language_test, &corpus.test}}) {
    std::vector<LabelSet> shared_labels;
    if (cfg.parallel) {
      Rng rng(derive_seed(cfg.seed, kLabelStream ^ stable_hash(split.tag)));
      for (std::size_t i = 0; i < split.n; ++i) shared_labels.push_back(sample_labels(cfg, lat, rng));
    }
    for (std::size_t l = 0; l < languages.size(); ++l) {
      const auto& lang = languages[l];
      Rng rng(derive_seed(cfg.seed, stable_hash(std::string("docs:") + split.tag + ":" + lang)));
      LanguageDataset ds;
      ds.language = lang;
      ds.vocabulary_size = cfg.vocab_per_language;
      ds.documents.reserve(split.n);
      for (std::size_t i = 0; i < split.n; ++i) {
        Document d;
        d.id = doc_id(lang + "-" + split.tag + "-", i);
        d.labels = cfg.parallel ? shared_labels[i] : sample_labels(cfg, lat, rng);
        d.vector = render(cfg, lat, lexicons[l], d.labels, rng);
        if (cfg.parallel) corpus.alignment[doc_id(std::string("g-") + split.tag + "-", i)][lang] = d.id;
        ds.documents.push_back(std::move(d));
      }
      (*split.out)[lang] = std::move(ds);
    }
  }

  // Every class needs at least one positive training example somewhere.
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    bool found = false;
    for (const auto& [_, ds] : corpus.train) {
      for (const auto& d : ds.documents) {
        if (std::binary_search(d.labels.begin(), d.labels.end(), static_cast<int>(c))) {
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found) {
      auto& labels = corpus.train.begin()->second.documents.front().labels;
      labels.insert(std::lower_bound(labels.begin(), labels.end(), static_cast<int>(c)), static_cast<int>(c));
    }
  }
  return corpus;
}

std::map<std::string, EmbeddingTable> generate_synthetic_embeddings(const SyntheticConfig& cfg) {
  cfg.validate();
  if (cfg.embedding_dim == 0) throw ConfigError("synthetic config: field 'embedding_dim' must be >= 1 for embeddings");
  const Latent lat = make_latent(cfg);

  Rng concept_rng(derive_seed(cfg.seed, kEmbeddingStream));
  std::vector<std::vector<double>> concept_vecs(cfg.vocab_per_language, std::vector<double>(cfg.embedding_dim));
  for (auto& v : concept_vecs) {
    for (auto& x : v) x = concept_rng.normal();
  }

  std::map<std::string, EmbeddingTable> tables;
  for (const auto& lang : synthetic_language_ids(cfg.n_languages)) {
    const LanguageLexicon lex = make_lexicon(cfg, lat, lang);
    Rng noise(derive_seed(cfg.seed, stable_hash("embedding-noise:" + lang)));
    EmbeddingTable table(cfg.embedding_dim);
    for (std::size_t c = 0; c < cfg.vocab_per_language; ++c) {
      std::vector<double> v = concept_vecs[c];
      for (auto& x : v) x += cfg.embedding_noise * noise.normal();
      table.set(lex.word_of_concept[c], std::move(v));
    }
    tables.emplace(lang, std::move(table));
  }
  return tables;
}

SyntheticConfig synthetic_config_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  SyntheticConfig c;
  auto count = [&](const char* field, std::size_t& out) {
    if (!j.contains(field)) return;
    const auto& v = j.at(field);
    if (!v.is_number_integer() || v.get<long long>() < 1) {
      throw ConfigError(std::string("synthetic config: field '") + field + "' must be a positive integer");
    }
    out = v.get<std::size_t>();
  };
  auto real = [&](const char* field, double& out) {
    if (!j.contains(field)) return;
    if (!j.at(field).is_number()) throw ConfigError(std::string("synthetic config: field '") + field + "' must be a number");
    out = j.at(field).get<double>();
  };
  count("n_languages", c.n_languages);
  count("n_classes", c.n_classes);
  count("vocab_per_language", c.vocab_per_language);
  count("docs_per_language_train", c.docs_per_language_train);
  count("docs_per_language_test", c.docs_per_language_test);
  count("mean_doc_length", c.mean_doc_length);
  real("label_correlation", c.label_correlation);
  real("signal_strength", c.signal_strength);
  real("embedding_noise", c.embedding_noise);
  if (j.contains("class_prevalence_range")) {
    const auto& r = j.at("class_prevalence_range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw ConfigError("synthetic config: field 'class_prevalence_range' must be a [low, high] pair");
    }
    c.class_prevalence_range = {r[0].get<double>(), r[1].get<double>()};
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer()) throw ConfigError("synthetic config: field 'seed' must be an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("parallel")) c.parallel = j.at("parallel").get<bool>();
  if (j.contains("embedding_dim")) {
    const auto& v = j.at("embedding_dim");
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("synthetic config: field 'embedding_dim' must be a non-negative integer");
    }
    c.embedding_dim = v.get<std::size_t>();
  }
  c.validate();
  return c;
}

}  // namespace funnel

#include "funnel/funnel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "funnel/error.hpp"
#include "funnel/parallel.hpp"
#include "funnel/random.hpp"

namespace funnel {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Training documents of one language in canonical (doc id) order, already
// weighted.
struct PreparedLanguage {
  std::string language;
  std::vector<std::string> doc_ids;
  std::vector<SparseVector> vectors;
  std::vector<LabelSet> labels;
  SparseMatrix design;
  WeightingModel weighting;
};

PreparedLanguage prepare(const LanguageDataset& ds) {
  PreparedLanguage p;
  p.language = ds.language;
  std::vector<const Document*> docs;
  docs.reserve(ds.size());
  for (const auto& d : ds.documents) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* b) { return a->id < b->id; });
  if (ds.empty()) {
    p.weighting.language = ds.language;
    p.weighting.idf.assign(ds.vocabulary_size, 0.0);
  } else {
    p.weighting = fit_weighting(ds);
  }
  for (const auto* d : docs) {
    p.doc_ids.push_back(d->id);
    p.vectors.push_back(transform(p.weighting, d->vector));
    p.labels.push_back(d->labels);
  }
  p.design = SparseMatrix(p.vectors, ds.vocabulary_size);
  return p;
}

std::uint64_t language_seed(std::uint64_t seed, const std::string& purpose, const std::string& language) {
  return derive_seed(seed, stable_hash(purpose + ":" + language));
}

std::vector<std::size_t> positives_per_class(std::span<const LabelSet> labels, std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (const auto& ls : labels) {
    for (int c : ls) ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

// Per-class split for the internal calibration folds: positives and
// negatives are dealt round-robin separately, so every fold's training part
// holds about the same share of positives. With unstratified folds on a few
// dozen documents the fold classifiers' biases drift with their positive
// counts, which anti-correlates pooled scores with labels.
std::vector<int> stratified_assignment(std::span<const int> y, int k, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] != 0 ? pos : neg).push_back(i);
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<int> fold(y.size(), 0);
  std::size_t next = 0;
  for (const auto* group : {&pos, &neg}) {
    for (auto i : *group) fold[i] = static_cast<int>(next++ % static_cast<std::size_t>(k));
  }
  return fold;
}

// Fits per-class calibrators on out-of-fold scores from an internal split of
// the training set; the deployed classifier itself saw all of it.
template <typename Design>
std::vector<PlattCalibrator> fit_calibrators_oof(const Design& x, std::span<const LabelSet> labels,
                                                 const MultilabelClassifier& deployed, const FunnelConfig& cfg,
                                                 std::uint64_t seed) {
  const std::size_t n = x.rows();
  const std::size_t n_classes = deployed.n_classes();
  std::vector<PlattCalibrator> out(n_classes);

  parallel_for(n_classes, [&](std::size_t c) {
    const auto& full = deployed.scorers[c];
    if (full.is_trivial_rejector()) {
      out[c] = PlattCalibrator::make_trivial();
      return;
    }
    const auto y = binary_labels(labels, c);
    auto score_with = [&](const BinaryScorer& s, std::size_t i) {
      if (s.kind == ScorerKind::ConstantPositive) return kConstantPositiveScore;
      if (s.kind == ScorerKind::TrivialRejector) return 0.0;
      return x.dot_row(i, s.weights) + s.bias;
    };
    std::vector<double> oof(n, 0.0);
    const int k = cfg.calibration_folds;
    if (n >= 2 && k >= 2) {
      const auto fold = stratified_assignment(y, k, derive_seed(seed, c));
      for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> held, kept;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held : kept).push_back(i);
        if (held.empty()) continue;
        std::vector<int> ky;
        for (auto i : kept) ky.push_back(y[i]);
        const auto npos = std::count(ky.begin(), ky.end(), 1);
        BinaryScorer s;
        if (npos == 0) {
          // same fold-depletion fallback as KFCV: the full-data scorer stands in
          s = full;
        } else if (npos == static_cast<std::ptrdiff_t>(ky.size())) {
          s = BinaryScorer::constant_positive(x.cols());
        } else {
          s = train_binary(x.select(kept), ky, cfg.base);
        }
        for (auto i : held) oof[i] = score_with(s, i);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) oof[i] = score_with(full, i);
    }
    out[c] = fit_platt(oof, y);
  });
  return out;
}

// Calibrators that only carry the trivial-rejector flag, for the modes that
// do not use fitted parameters.
std::vector<PlattCalibrator> placeholder_calibrators(const MultilabelClassifier& clf) {
  std::vector<PlattCalibrator> out(clf.n_classes(), PlattCalibrator{-1.0, 0.0, false});
  for (std::size_t c = 0; c < clf.n_classes(); ++c) {
    if (clf.scorers[c].is_trivial_rejector()) out[c] = PlattCalibrator::make_trivial();
  }
  return out;
}

double scorer_value(const BinaryScorer& s, const SparseMatrix& x, std::size_t row) {
  switch (s.kind) {
    case ScorerKind::TrivialRejector:
      return 0.0;
    case ScorerKind::ConstantPositive:
      return kConstantPositiveScore;
    case ScorerKind::Linear:
      break;
  }
  return x.dot_row(row, s.weights) + s.bias;
}

std::vector<double> posterior_row(const FunnelConfig& cfg, const MultilabelClassifier& clf,
                                  std::span<const PlattCalibrator> cals, const SparseMatrix& x, std::size_t row) {
  std::vector<double> out(clf.n_classes());
  for (std::size_t c = 0; c < clf.n_classes(); ++c) {
    out[c] = posteriors_with_mode(cfg.mode, cals[c], scorer_value(clf.scorers[c], x, row), cfg.nocalib_monotone);
  }
  return out;
}

struct Tier1Result {
  LanguageModel model;
  // Meta-training vectors for this language's documents, in doc id order.
  std::vector<std::vector<double>> meta_rows;
  std::vector<LabelSet> meta_labels;
  std::vector<FoldRecord> folds;
  double train_seconds = 0.0;
  double calibration_seconds = 0.0;
};

Tier1Result train_language(const LanguageDataset& ds, std::size_t n_classes, const FunnelConfig& cfg) {
  Tier1Result r;
  auto t0 = Clock::now();
  const PreparedLanguage prep = prepare(ds);
  auto& lm = r.model;
  lm.weighting = prep.weighting;
  lm.classifier = train_multilabel(prep.design, prep.labels, n_classes, cfg.base);
  r.train_seconds += seconds_since(t0);

  t0 = Clock::now();
  if (cfg.mode == CalibrationMode::Calib) {
    lm.calibrators = fit_calibrators_oof(prep.design, prep.labels, lm.classifier, cfg,
                                         language_seed(cfg.seed, "calibration", ds.language));
  } else {
    lm.calibrators = placeholder_calibrators(lm.classifier);
  }
  r.calibration_seconds += seconds_since(t0);

  const std::size_t n = prep.vectors.size();
  r.meta_labels = prep.labels;
  r.meta_rows.resize(n);

  if (cfg.variant == Variant::TAT || n == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      r.meta_rows[i] = posterior_row(cfg, lm.classifier, lm.calibrators, prep.design, i);
    }
    return r;
  }

  t0 = Clock::now();
  const auto total_pos = positives_per_class(prep.labels, n_classes);
  const FoldPlan plan = kfold_split(n, cfg.k, language_seed(cfg.seed, "kfcv", ds.language));
  for (int f = 0; f < plan.k; ++f) {
    const auto held = plan.members(f);
    if (held.empty()) continue;
    const auto kept = plan.complement(f);
    std::vector<LabelSet> kept_labels;
    kept_labels.reserve(kept.size());
    for (auto i : kept) kept_labels.push_back(prep.labels[i]);

    FoldRecord rec;
    rec.language = ds.language;
    rec.fold = f;
    rec.train_size = kept.size();
    rec.held_out = held.size();
    rec.fold_assignment = plan.assignment;

    MultilabelClassifier fold_clf = train_multilabel(prep.design.select(kept), kept_labels, n_classes, cfg.base);
    const auto kept_pos = positives_per_class(kept_labels, n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (kept_pos[c] == 0 && total_pos[c] > 0) {
        // All positives sit in the held-out fold: fall back to the scorer
        // trained on the whole language training set.
        fold_clf.scorers[c] = lm.classifier.scorers[c];
        rec.fallback_classes.push_back(static_cast<int>(c));
      }
    }

    std::vector<PlattCalibrator> fold_cals;
    if (cfg.mode == CalibrationMode::Calib) {
      fold_cals.resize(n_classes);
      std::vector<LabelSet> held_labels;
      for (auto i : held) held_labels.push_back(prep.labels[i]);
      for (std::size_t c = 0; c < n_classes; ++c) {
        if (fold_clf.scorers[c].is_trivial_rejector()) {
          fold_cals[c] = PlattCalibrator::make_trivial();
          continue;
        }
        std::vector<double> scores;
        scores.reserve(held.size());
        for (auto i : held) scores.push_back(scorer_value(fold_clf.scorers[c], prep.design, i));
        fold_cals[c] = fit_platt(scores, binary_labels(held_labels, c));
      }
    } else {
      fold_cals = placeholder_calibrators(fold_clf);
    }
    for (auto i : held) r.meta_rows[i] = posterior_row(cfg, fold_clf, fold_cals, prep.design, i);
    r.folds.push_back(std::move(rec));
  }
  r.train_seconds += seconds_since(t0);
  return r;
}

MetaClassifier train_meta(const DenseMatrix& inputs, std::span<const LabelSet> labels, std::size_t n_classes,
                          const FunnelConfig& cfg) {
  MetaClassifier meta;
  DenseMatrix design;
  if (cfg.meta_learner == MetaLearner::Rbf) {
    const double gamma = cfg.rff_gamma > 0.0 ? cfg.rff_gamma : 1.0 / static_cast<double>(n_classes);
    meta.feature_map = RandomFourierMap(n_classes, static_cast<std::size_t>(cfg.rff_dim), gamma,
                                        derive_seed(cfg.seed, stable_hash("meta-rff")));
    design = meta.feature_map->apply(inputs);
  } else {
    design = inputs;
  }
  TrainConfig tc = cfg.meta;
  tc.seed = derive_seed(cfg.seed, stable_hash("meta-grid"));
  meta.reg_strength = grid_search_reg(design, labels, n_classes, cfg.meta_grid, cfg.meta_grid_folds, tc);
  tc.reg_strength = meta.reg_strength;
  meta.classifier = train_multilabel(design, labels, n_classes, tc);
  return meta;
}

void check_training_sets(const MultilingualCorpus& corpus, const FunnelConfig& cfg) {
  if (corpus.train.empty()) throw DataError("corpus has no training languages");
  bool any = false;
  for (const auto& [lang, ds] : corpus.train) {
    if (ds.empty() && !cfg.allow_empty_languages) throw DataError("empty training set for language " + lang);
    any = any || !ds.empty();
  }
  if (!any) throw DataError("every training set is empty");
}

struct Tier1Bundle {
  std::vector<std::string> languages;
  std::vector<Tier1Result> results;
};

Tier1Bundle train_all_languages(const MultilingualCorpus& corpus, const FunnelConfig& cfg) {
  Tier1Bundle b;
  for (const auto& [lang, _] : corpus.train) b.languages.push_back(lang);
  b.results.resize(b.languages.size());
  parallel_for(b.languages.size(), [&](std::size_t i) {
    b.results[i] = train_language(corpus.train.at(b.languages[i]), corpus.n_classes(), cfg);
  });
  return b;
}

void collect_meta_rows(const Tier1Bundle& b, DenseMatrix& inputs, std::vector<LabelSet>& labels,
                       std::vector<std::string>& row_languages, std::size_t n_classes) {
  for (std::size_t i = 0; i < b.languages.size(); ++i) {
    const auto& r = b.results[i];
    for (std::size_t d = 0; d < r.meta_rows.size(); ++d) {
      if (r.meta_rows[d].size() != n_classes) throw DataError("internal: meta row has wrong width");
      inputs.append_row(r.meta_rows[d]);
      labels.push_back(r.meta_labels[d]);
      row_languages.push_back(b.languages[i]);
    }
  }
}

FunnelModel assemble_tier1(const MultilingualCorpus& corpus, const FunnelConfig& cfg, Tier1Bundle& b) {
  FunnelModel model;
  model.kind = ModelKind::Funnel;
  model.config = cfg;
  model.class_names = corpus.class_names;
  for (std::size_t i = 0; i < b.languages.size(); ++i) {
    auto& r = b.results[i];
    model.trace.tier1_seconds += r.train_seconds;
    model.trace.calibration_seconds += r.calibration_seconds;
    if (cfg.mode == CalibrationMode::Calib) ++model.trace.language_calibrators;
    for (auto& f : r.folds) {
      if (cfg.mode == CalibrationMode::Calib) ++model.trace.fold_calibrators;
      model.trace.folds.push_back(std::move(f));
    }
    model.tier1.emplace(b.languages[i], std::move(r.model));
  }
  return model;
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::TAT ? "tat" : "kfcv"; }

Variant variant_from_string(const std::string& s) {
  if (s == "tat") return Variant::TAT;
  if (s == "kfcv") return Variant::KFCV;
  throw ConfigError("unknown variant '" + s + "' (expected tat or kfcv)");
}

void FunnelConfig::validate() const {
  if (variant == Variant::KFCV && k < 2) throw ConfigError("KFCV needs k >= 2, got " + std::to_string(k));
  if (calibration_folds < 2) throw ConfigError("calibration_folds must be >= 2");
  if (meta_grid.empty() || naive_grid.empty()) throw ConfigError("regularization grids must be non-empty");
  if (meta_grid_folds < 2) throw ConfigError("meta_grid_folds must be >= 2");
  if (rff_dim < 1) throw ConfigError("rff_dim must be >= 1");
  if (rff_gamma < 0.0) throw ConfigError("rff_gamma must be >= 0");
  base.validate();
  meta.validate();
}

std::vector<double> MetaClassifier::features(std::span<const double> posterior) const {
  if (feature_map) return feature_map->apply(posterior);
  return {posterior.begin(), posterior.end()};
}

std::vector<double> MetaClassifier::raw_scores(std::span<const double> posterior) const {
  return classifier.scores(features(posterior));
}

std::vector<double> ZeroShotBranch::features(std::span<const double> embedding_average) const {
  std::vector<double> z(embedding_average.begin(), embedding_average.end());
  if (z.size() != embedding_dim) throw DataError("embedding average has the wrong dimension");
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - center[i]) / scale[i];
  return feature_map.apply(z);
}

FunnelModel train_funnel(const MultilingualCorpus& corpus, const FunnelConfig& cfg) {
  cfg.validate();
  check_training_sets(corpus, cfg);
  Tier1Bundle b = train_all_languages(corpus, cfg);

  DenseMatrix inputs;
  std::vector<LabelSet> labels;
  std::vector<std::string> row_languages;
  collect_meta_rows(b, inputs, labels, row_languages, corpus.n_classes());

  FunnelModel model = assemble_tier1(corpus, cfg, b);
  const auto t0 = Clock::now();
  model.tier2 = train_meta(inputs, labels, corpus.n_classes(), cfg);
  model.trace.tier2_seconds = seconds_since(t0);
  model.trace.meta_inputs = std::move(inputs);
  model.trace.meta_row_languages = std::move(row_languages);
  return model;
}

FunnelModel train_naive(const MultilingualCorpus& corpus, const FunnelConfig& cfg) {
  cfg.validate();
  check_training_sets(corpus, cfg);
  std::vector<std::string> languages;
  for (const auto& [lang, _] : corpus.train) languages.push_back(lang);
  std::vector<LanguageModel> models(languages.size());
  const auto t0 = Clock::now();
  parallel_for(languages.size(), [&](std::size_t i) {
    const auto& ds = corpus.train.at(languages[i]);
    const PreparedLanguage prep = prepare(ds);
    TrainConfig tc = cfg.base;
    tc.seed = language_seed(cfg.seed, "naive-grid", ds.language);
    tc.reg_strength = grid_search_reg(prep.design, prep.labels, corpus.n_classes(), cfg.naive_grid,
                                      cfg.meta_grid_folds, tc);
    models[i].weighting = prep.weighting;
    models[i].classifier = train_multilabel(prep.design, prep.labels, corpus.n_classes(), tc);
  });

  FunnelModel model;
  model.kind = ModelKind::Naive;
  model.config = cfg;
  model.class_names = corpus.class_names;
  for (std::size_t i = 0; i < languages.size(); ++i) model.tier1.emplace(languages[i], std::move(models[i]));
  model.trace.tier1_seconds = seconds_since(t0);
  return model;
}

FunnelModel train_zeroshot(const MultilingualCorpus& corpus, const std::map<std::string, EmbeddingTable>& embeddings,
                           const FunnelConfig& cfg) {
  cfg.validate();
  check_training_sets(corpus, cfg);
  std::size_t dim = 0;
  for (const auto& [lang, _] : corpus.train) {
    const auto it = embeddings.find(lang);
    if (it == embeddings.end()) throw DataError("no embedding table for language " + lang);
    if (dim == 0) dim = it->second.dimension();
    if (it->second.dimension() != dim || dim == 0) throw DataError("embedding dimension mismatch for language " + lang);
  }

  Tier1Bundle b = train_all_languages(corpus, cfg);
  DenseMatrix inputs;
  std::vector<LabelSet> labels;
  std::vector<std::string> row_languages;
  collect_meta_rows(b, inputs, labels, row_languages, corpus.n_classes());
  FunnelModel model = assemble_tier1(corpus, cfg, b);

  auto t0 = Clock::now();
  // Shared-space rows: tf-idf weighted embedding averages, pooled across
  // languages in the same canonical order as the language rows.
  DenseMatrix averages;
  std::vector<LabelSet> shared_labels;
  for (const auto& [lang, ds] : corpus.train) {
    std::vector<const Document*> docs;
    for (const auto& d : ds.documents) docs.push_back(&d);
    std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* c) { return a->id < c->id; });
    const auto& weighting = model.tier1.at(lang).weighting;
    for (const auto* d : docs) {
      averages.append_row(embed_average(transform(weighting, d->vector), embeddings.at(lang)));
      shared_labels.push_back(d->labels);
    }
  }

  ZeroShotBranch zs;
  zs.embedding_dim = dim;
  zs.center.assign(dim, 0.0);
  zs.scale.assign(dim, 1.0);
  const double n = static_cast<double>(averages.rows());
  for (std::size_t j = 0; j < dim; ++j) {
    double m = 0.0;
    for (std::size_t r = 0; r < averages.rows(); ++r) m += averages(r, j);
    m /= n;
    double v = 0.0;
    for (std::size_t r = 0; r < averages.rows(); ++r) v += (averages(r, j) - m) * (averages(r, j) - m);
    v /= n;
    zs.center[j] = m;
    zs.scale[j] = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  const double gamma = cfg.rff_gamma > 0.0 ? cfg.rff_gamma : 1.0 / static_cast<double>(dim);
  zs.feature_map = RandomFourierMap(dim, static_cast<std::size_t>(cfg.rff_dim), gamma,
                                    derive_seed(cfg.seed, stable_hash("zero-shot-rff")));
  DenseMatrix shared(averages.rows(), static_cast<std::size_t>(cfg.rff_dim));
  for (std::size_t r = 0; r < averages.rows(); ++r) {
    const auto z = zs.features(averages.row(r));
    std::copy(z.begin(), z.end(), shared.row(r).begin());
  }
  zs.classifier = train_multilabel(shared, shared_labels, corpus.n_classes(), cfg.base);
  model.trace.tier1_seconds += seconds_since(t0);

  t0 = Clock::now();
  if (cfg.mode == CalibrationMode::Calib) {
    zs.calibrators = fit_calibrators_oof(shared, shared_labels, zs.classifier, cfg,
                                         derive_seed(cfg.seed, stable_hash("zero-shot-calibration")));
  } else {
    zs.calibrators = placeholder_calibrators(zs.classifier);
  }
  model.trace.calibration_seconds += seconds_since(t0);

  for (std::size_t r = 0; r < shared.rows(); ++r) {
    const auto scores = zs.classifier.scores(shared.row(r));
    std::vector<double> post(scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) {
      post[c] = posteriors_with_mode(cfg.mode, zs.calibrators[c], scores[c], cfg.nocalib_monotone);
    }
    inputs.append_row(post);
    labels.push_back(shared_labels[r]);
    row_languages.push_back("*");
  }

  t0 = Clock::now();
  model.tier2 = train_meta(inputs, labels, corpus.n_classes(), cfg);
  model.trace.tier2_seconds = seconds_since(t0);
  model.trace.meta_inputs = std::move(inputs);
  model.trace.meta_row_languages = std::move(row_languages);
  model.zero_shot = std::move(zs);
  return model;
}

std::vector<double> tier1_posteriors(const FunnelModel& model, const std::string& language,
                                     const SparseVector& raw_counts) {
  const auto it = model.tier1.find(language);
  if (it == model.tier1.end()) throw DataError("model has no classifier for language '" + language + "'");
  const auto& lm = it->second;
  const SparseVector x = transform(lm.weighting, raw_counts);
  const auto scores = lm.classifier.scores(x);
  if (model.kind == ModelKind::Naive) return scores;
  std::vector<double> post(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) {
    post[c] = posteriors_with_mode(model.config.mode, lm.calibrators[c], scores[c], model.config.nocalib_monotone);
  }
  return post;
}

Prediction predict(const FunnelModel& model, const std::string& language, const SparseVector& raw_counts) {
  const auto it = model.tier1.find(language);
  if (it == model.tier1.end()) throw DataError("model has no classifier for language '" + language + "'");
  const auto& lm = it->second;

  Prediction p;
  p.language_classifier_calls = 1;
  p.posterior = tier1_posteriors(model, language, raw_counts);
  if (model.kind == ModelKind::Naive || !model.tier2) {
    for (std::size_t c = 0; c < p.posterior.size(); ++c) {
      if (!lm.classifier.scorers[c].is_trivial_rejector() && p.posterior[c] >= 0.0) {
        p.decisions.push_back(static_cast<int>(c));
      }
    }
    return p;
  }
  const auto meta_scores = model.tier2->raw_scores(p.posterior);
  for (std::size_t c = 0; c < meta_scores.size(); ++c) {
    // A tier-1 trivial rejector makes the whole two-tier system a rejector
    // for that (language, class) pair.
    if (lm.classifier.scorers[c].is_trivial_rejector()) continue;
    if (model.tier2->classifier.scorers[c].is_trivial_rejector()) continue;
    if (meta_scores[c] >= 0.0) p.decisions.push_back(static_cast<int>(c));
  }
  return p;
}

Prediction predict_zeroshot(const FunnelModel& model, const std::string& language, const SparseVector& raw_counts,
                            const EmbeddingTable* doc_embeddings) {
  if (model.tier1.contains(language)) return predict(model, language, raw_counts);
  if (!model.zero_shot || !model.tier2) {
    throw DataError("language '" + language + "' is not covered by the model and it has no zero-shot branch");
  }
  if (doc_embeddings == nullptr) throw DataError("no embedding table for unseen language '" + language + "'");
  const auto& zs = *model.zero_shot;
  if (doc_embeddings->dimension() != zs.embedding_dim) {
    throw DataError("embedding table for '" + language + "' has dimension " +
                    std::to_string(doc_embeddings->dimension()) + ", model expects " +
                    std::to_string(zs.embedding_dim));
  }

  const auto weighting = WeightingModel::uniform(language, raw_counts.span_dimension());
  const auto avg = embed_average(transform(weighting, raw_counts), *doc_embeddings);
  const auto scores = zs.classifier.scores(zs.features(avg));

  Prediction p;
  p.shared_classifier_calls = 1;
  p.posterior.resize(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) {
    p.posterior[c] = posteriors_with_mode(model.config.mode, zs.calibrators[c], scores[c], model.config.nocalib_monotone);
  }
  const auto meta_scores = model.tier2->raw_scores(p.posterior);
  for (std::size_t c = 0; c < meta_scores.size(); ++c) {
    if (model.tier2->classifier.scorers[c].is_trivial_rejector()) continue;
    if (meta_scores[c] >= 0.0) p.decisions.push_back(static_cast<int>(c));
  }
  return p;
}

}  // namespace funnel

#include "funnel/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "funnel/error.hpp"
#include "funnel/parallel.hpp"
#include "funnel/synthetic.hpp"

namespace funnel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string fraction_label(double f) { return fmt("%g", f); }

json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

struct Trial {
  MultilingualCorpus corpus;
  std::map<std::string, EmbeddingTable> embeddings;
};

// Produces the corpus of trial t: regenerated with seed base + t when the
// source is synthetic, otherwise the loaded corpus itself.
class TrialSource {
 public:
  TrialSource(const ExperimentSpec& spec, bool need_embeddings) : spec_(spec), need_embeddings_(need_embeddings) {
    if (spec.manifest.empty()) {
      synthetic_ = spec.synthetic;
      dataset_ = "synthetic";
    } else {
      loaded_ = load_corpus_with_extras(spec.manifest);
      synthetic_ = loaded_->synthetic;
      dataset_ = spec.manifest.parent_path().filename().string();
      if (dataset_.empty()) dataset_ = spec.manifest.stem().string();
      if (!synthetic_ && need_embeddings) {
        auto files = loaded_->embedding_files;
        for (const auto& [lang, p] : spec.embedding_files) files[lang] = p;
        for (const auto& [lang, p] : files) embeddings_.emplace(lang, EmbeddingTable::load(p));
      }
    }
  }

  const std::string& dataset() const { return dataset_; }

  Trial trial(int t) const {
    Trial out;
    if (synthetic_) {
      SyntheticConfig cfg = *synthetic_;
      cfg.seed = spec_.seed + static_cast<std::uint64_t>(t);
      out.corpus = generate_synthetic(cfg);
      if (need_embeddings_) {
        if (cfg.embedding_dim == 0) throw ConfigError("zero-shot runs need synthetic.embedding_dim > 0");
        out.embeddings = generate_synthetic_embeddings(cfg);
      }
    } else {
      out.corpus = loaded_->corpus;
      out.embeddings = embeddings_;
    }
    return out;
  }

 private:
  const ExperimentSpec& spec_;
  bool need_embeddings_;
  std::optional<LoadedCorpus> loaded_;
  std::optional<SyntheticConfig> synthetic_;
  std::map<std::string, EmbeddingTable> embeddings_;
  std::string dataset_;
};

std::uint64_t trial_seed(const ExperimentSpec& spec, int t) { return spec.seed + static_cast<std::uint64_t>(t); }

FunnelConfig trial_config(const ExperimentSpec& spec, int t) {
  FunnelConfig cfg = spec.funnel;
  cfg.seed = trial_seed(spec, t);
  return cfg;
}

bool is_funnel_method(const std::string& m) { return m == "fun_tat" || m == "fun_kfcv" || m == "zeroshot"; }

std::vector<std::string> default_methods(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::Mlclc:
      return {"naive", "fun_tat", "fun_kfcv"};
    case ExperimentMode::MonoBinary:
    case ExperimentMode::Curves:
      return {"naive", "fun_tat"};
    case ExperimentMode::Ablation:
    case ExperimentMode::Calibration:
      return {"fun_tat"};
    case ExperimentMode::Zeroshot:
      return {"zeroshot"};
  }
  return {};
}

std::vector<std::string> methods_of(const ExperimentSpec& spec) {
  return spec.methods.empty() ? default_methods(spec.mode) : spec.methods;
}

RunInfo run_info(const std::string& method, const FunnelConfig& cfg, const std::string& dataset, int trial,
                 const std::string& language) {
  RunInfo info;
  info.method = method;
  info.variant = method == "fun_kfcv" ? "kfcv" : is_funnel_method(method) ? "tat" : "-";
  info.mode = is_funnel_method(method) ? to_string(cfg.mode) : "-";
  info.dataset = dataset;
  info.trial = trial;
  info.language = language;
  return info;
}

std::vector<ConfusionCounts> pooled(const std::map<std::string, std::vector<ConfusionCounts>>& by_lang,
                                    std::size_t n_classes) {
  std::vector<ConfusionCounts> out(n_classes);
  for (const auto& [_, counts] : by_lang) {
    for (std::size_t c = 0; c < n_classes; ++c) out[c] += counts[c];
  }
  return out;
}

MultilingualCorpus apply_targets(const MultilingualCorpus& corpus, const std::vector<std::string>& targets,
                                 double fraction, std::uint64_t seed) {
  if (fraction >= 1.0) return corpus;
  MultilingualCorpus out = corpus;
  for (const auto& t : targets) out = subsample_training(out, t, fraction, seed);
  return out;
}

std::vector<std::string> train_languages(const MultilingualCorpus& c) {
  std::vector<std::string> out;
  for (const auto& [lang, _] : c.train) out.push_back(lang);
  return out;
}

// Streams runs to runs.csv as they are produced so a failing experiment
// leaves its partial results on disk.
class RunSink {
 public:
  RunSink(ExperimentReport& report, const fs::path& out_dir, bool record_timing)
      : report_(report), record_timing_(record_timing) {
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      out_.open(out_dir / "runs.csv", std::ios::binary | std::ios::trunc);
      if (!out_) throw DataError("cannot write " + (out_dir / "runs.csv").string());
      out_ << eval_csv_header() << '\n';
      out_.flush();
    }
  }

  void add(std::vector<ConfusionCounts> counts, RunInfo info) {
    if (!record_timing_) {
      info.train_seconds = 0.0;
      info.test_seconds = 0.0;
    }
    report_.runs.push_back(EvalReport::from_counts(std::move(counts), std::move(info)));
    if (out_.is_open()) {
      out_ << eval_csv_row(report_.runs.back()) << '\n';
      out_.flush();
    }
  }

  // Per-language rows plus the pooled "all" row.
  void add_all(const std::map<std::string, std::vector<ConfusionCounts>>& by_lang, std::size_t n_classes,
               const RunInfo& base) {
    for (const auto& [lang, counts] : by_lang) {
      RunInfo info = base;
      info.language = lang;
      add(counts, info);
    }
    if (by_lang.size() > 1) {
      RunInfo info = base;
      info.language = "all";
      add(pooled(by_lang, n_classes), info);
    }
  }

 private:
  ExperimentReport& report_;
  bool record_timing_;
  std::ofstream out_;
};

struct Timed {
  FunnelModel model;
  double train_seconds = 0.0;
};

Timed timed_train(const std::string& method, const MultilingualCorpus& corpus, const FunnelConfig& cfg,
                  const std::map<std::string, EmbeddingTable>* embeddings) {
  const auto t0 = Clock::now();
  Timed out{train_method(method, corpus, cfg, embeddings), 0.0};
  out.train_seconds = seconds_since(t0);
  return out;
}

struct Evaluated {
  std::map<std::string, std::vector<ConfusionCounts>> counts;
  double test_seconds = 0.0;
};

Evaluated timed_evaluate(const FunnelModel& model, const MultilingualCorpus& corpus,
                         const std::map<std::string, EmbeddingTable>* embeddings) {
  const auto t0 = Clock::now();
  Evaluated out{evaluate_model(model, corpus, embeddings), 0.0};
  out.test_seconds = seconds_since(t0);
  return out;
}

std::string pivot_of(const ExperimentSpec& spec, const MultilingualCorpus& corpus) {
  if (!spec.pivot.empty()) return spec.pivot;
  if (corpus.train.empty()) throw DataError("corpus has no languages");
  return corpus.train.begin()->first;
}

double f1_macro_of(const std::vector<ConfusionCounts>& counts) {
  return micro_macro_aggregate(counts, Measure::F1).macro;
}

// --- modes ---------------------------------------------------------------

void run_mlclc(const ExperimentSpec& spec, const TrialSource& src, RunSink& sink) {
  const auto methods = methods_of(spec);
  const bool need_emb = std::find(methods.begin(), methods.end(), "zeroshot") != methods.end();
  for (int t = 0; t < spec.trials; ++t) {
    Trial trial = src.trial(t);
    const auto corpus = apply_targets(trial.corpus, spec.targets, spec.effective_target_fraction(), trial_seed(spec, t));
    const FunnelConfig cfg = trial_config(spec, t);
    for (const auto& m : methods) {
      const MultilingualCorpus* data = &corpus;
      MultilingualCorpus view;
      if (m == "upperbound") {
        view = make_upperbound_view(corpus, pivot_of(spec, corpus));
        data = &view;
      }
      const auto trained = timed_train(m, *data, cfg, need_emb ? &trial.embeddings : nullptr);
      const auto ev = timed_evaluate(trained.model, *data, need_emb ? &trial.embeddings : nullptr);
      RunInfo info = run_info(m, cfg, src.dataset(), t, "");
      info.train_seconds = trained.train_seconds;
      info.test_seconds = ev.test_seconds;
      sink.add_all(ev.counts, corpus.n_classes(), info);
    }
  }
}

void run_mono_binary(const ExperimentSpec& spec, const TrialSource& src, RunSink& sink) {
  const auto methods = methods_of(spec);
  for (int t = 0; t < spec.trials; ++t) {
    const Trial trial = src.trial(t);
    const auto corpus = apply_targets(trial.corpus, spec.targets, spec.effective_target_fraction(), trial_seed(spec, t));
    const FunnelConfig cfg = trial_config(spec, t);
    for (const auto& m : methods) {
      if (m == "upperbound" || m == "zeroshot") throw ConfigError("method " + m + " is not available in mono_binary");

      // One language at a time: a single first-tier classifier.
      std::map<std::string, std::vector<ConfusionCounts>> mono;
      double train_s = 0.0, test_s = 0.0;
      for (const auto& lang : train_languages(corpus)) {
        const auto sub = restrict_languages(corpus, {lang});
        const auto trained = timed_train(m, sub, cfg, nullptr);
        const auto ev = timed_evaluate(trained.model, sub, nullptr);
        train_s += trained.train_seconds;
        test_s += ev.test_seconds;
        for (const auto& [l, counts] : ev.counts) mono[l] = counts;
      }
      RunInfo info = run_info(m, cfg, src.dataset() + ":monolingual", t, "");
      info.train_seconds = train_s;
      info.test_seconds = test_s;
      sink.add_all(mono, corpus.n_classes(), info);

      // One class at a time: one-dimensional posterior vectors.
      std::map<std::string, std::vector<ConfusionCounts>> binary;
      train_s = test_s = 0.0;
      for (std::size_t c = 0; c < corpus.n_classes(); ++c) {
        const auto sub = restrict_to_class(corpus, c);
        const auto trained = timed_train(m, sub, cfg, nullptr);
        const auto ev = timed_evaluate(trained.model, sub, nullptr);
        train_s += trained.train_seconds;
        test_s += ev.test_seconds;
        for (const auto& [l, counts] : ev.counts) {
          auto& row = binary[l];
          row.resize(corpus.n_classes());
          row[c] = counts[0];
        }
      }
      info = run_info(m, cfg, src.dataset() + ":binary", t, "");
      info.train_seconds = train_s;
      info.test_seconds = test_s;
      sink.add_all(binary, corpus.n_classes(), info);
    }
  }
}

void run_curves(const ExperimentSpec& spec, const TrialSource& src, RunSink& sink) {
  const auto methods = methods_of(spec);
  for (int t = 0; t < spec.trials; ++t) {
    const Trial trial = src.trial(t);
    const auto& corpus = trial.corpus;
    FunnelConfig cfg = trial_config(spec, t);
    cfg.allow_empty_languages = true;
    const auto targets = spec.targets.empty() ? train_languages(corpus) : spec.targets;

    // Full-data runs are shared by every target.
    std::map<std::string, std::pair<Evaluated, double>> full;
    for (double f : spec.fractions) {
      for (const auto& target : targets) {
        for (const auto& m : methods) {
          Evaluated ev;
          double train_s = 0.0;
          if (f >= 1.0) {
            auto it = full.find(m);
            if (it == full.end()) {
              const auto trained = timed_train(m, corpus, cfg, nullptr);
              it = full.emplace(m, std::make_pair(timed_evaluate(trained.model, corpus, nullptr), trained.train_seconds))
                       .first;
            }
            ev = it->second.first;
            train_s = it->second.second;
          } else {
            const auto sub = subsample_training(corpus, target, f, trial_seed(spec, t));
            const auto trained = timed_train(m, sub, cfg, nullptr);
            ev = timed_evaluate(trained.model, restrict_languages(sub, {target}), nullptr);
            train_s = trained.train_seconds;
          }
          RunInfo info = run_info(m, cfg, src.dataset() + ":fraction=" + fraction_label(f), t, target);
          info.train_seconds = train_s;
          info.test_seconds = ev.test_seconds;
          sink.add(ev.counts.at(target), info);
        }
      }
    }
  }
}

void run_calibration(const ExperimentSpec& spec, const TrialSource& src, RunSink& sink) {
  const auto methods = methods_of(spec);
  for (int t = 0; t < spec.trials; ++t) {
    const Trial trial = src.trial(t);
    const auto corpus = apply_targets(trial.corpus, spec.targets, spec.effective_target_fraction(), trial_seed(spec, t));
    for (const auto& m : methods) {
      if (!is_funnel_method(m) || m == "zeroshot") throw ConfigError("calibration mode runs fun_tat or fun_kfcv only");
      for (auto mode : {CalibrationMode::Calib, CalibrationMode::NoCalib, CalibrationMode::NoProb}) {
        FunnelConfig cfg = trial_config(spec, t);
        cfg.mode = mode;
        const auto trained = timed_train(m, corpus, cfg, nullptr);
        const auto ev = timed_evaluate(trained.model, corpus, nullptr);
        RunInfo info = run_info(m, cfg, src.dataset(), t, "");
        info.train_seconds = trained.train_seconds;
        info.test_seconds = ev.test_seconds;
        sink.add_all(ev.counts, corpus.n_classes(), info);
      }
    }
  }
}

void run_ablation(const ExperimentSpec& spec, const TrialSource& src, RunSink& sink, ExperimentReport& report) {
  const auto methods = methods_of(spec);
  if (methods.size() != 1 || (methods[0] != "fun_tat" && methods[0] != "fun_kfcv")) {
    throw ConfigError("ablation mode takes a single funnelling method");
  }
  const std::string method = methods[0];
  const double fraction = spec.effective_target_fraction();

  AblationReport ab;
  std::vector<std::vector<std::vector<double>>> per_trial;
  std::vector<std::vector<double>> naive_per_trial;

  for (int t = 0; t < spec.trials; ++t) {
    const Trial trial = src.trial(t);
    const auto& corpus = trial.corpus;
    const FunnelConfig cfg = trial_config(spec, t);
    const auto langs = train_languages(corpus);
    if (t == 0) {
      ab.languages = langs;
      per_trial.assign(langs.size(), std::vector<std::vector<double>>(langs.size()));
      naive_per_trial.assign(langs.size(), {});
    } else if (langs != ab.languages) {
      throw DataError("trial corpora disagree on the language set");
    }
    const auto targets = spec.targets.empty() ? langs : spec.targets;

    // Naive accuracy of each language on its own full training data.
    const auto naive = timed_train("naive", corpus, cfg, nullptr);
    const auto naive_ev = timed_evaluate(naive.model, corpus, nullptr);
    for (std::size_t i = 0; i < langs.size(); ++i) {
      const auto counts = naive_ev.counts.at(langs[i]);
      naive_per_trial[i].push_back(f1_macro_of(counts));
      RunInfo info = run_info("naive", cfg, src.dataset() + ":naive", t, langs[i]);
      info.train_seconds = naive.train_seconds;
      info.test_seconds = naive_ev.test_seconds;
      sink.add(counts, info);
    }

    for (const auto& target : targets) {
      const auto ti = static_cast<std::size_t>(std::find(langs.begin(), langs.end(), target) - langs.begin());
      if (ti == langs.size()) throw DataError("unknown target language '" + target + "'");
      const auto sub = subsample_training(corpus, target, fraction, trial_seed(spec, t));

      const auto with = timed_train(method, sub, cfg, nullptr);
      const auto with_ev = timed_evaluate(with.model, restrict_languages(sub, {target}), nullptr);
      const double b = f1_macro_of(with_ev.counts.at(target));
      RunInfo info = run_info(method, cfg, src.dataset() + ":target=" + target + ":without=-", t, target);
      info.train_seconds = with.train_seconds;
      info.test_seconds = with_ev.test_seconds;
      sink.add(with_ev.counts.at(target), info);

      for (std::size_t si = 0; si < langs.size(); ++si) {
        if (si == ti) continue;
        std::vector<std::string> keep;
        for (const auto& l : langs) {
          if (l != langs[si]) keep.push_back(l);
        }
        const auto reduced = restrict_languages(sub, keep);
        const auto without = timed_train(method, reduced, cfg, nullptr);
        const auto without_ev = timed_evaluate(without.model, restrict_languages(reduced, {target}), nullptr);
        const double a = f1_macro_of(without_ev.counts.at(target));
        info = run_info(method, cfg, src.dataset() + ":target=" + target + ":without=" + langs[si], t, target);
        info.train_seconds = without.train_seconds;
        info.test_seconds = without_ev.test_seconds;
        sink.add(without_ev.counts.at(target), info);
        if (a > 0.0) per_trial[si][ti].push_back((b - a) / a);
      }
    }
  }

  const std::size_t n = ab.languages.size();
  ab.improvement.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      if (s != t && !per_trial[s][t].empty()) ab.improvement[s][t] = mean(per_trial[s][t]);
    }
  }
  for (const auto& v : naive_per_trial) ab.naive_f1_macro.push_back(mean(v));
  aggregate_ablation(ab);
  report.ablation = std::move(ab);
}

void run_zeroshot(const ExperimentSpec& spec, const TrialSource& src, RunSink& sink, ExperimentReport& report) {
  const auto methods = methods_of(spec);
  json steps = json::array();
  for (int t = 0; t < spec.trials; ++t) {
    const Trial trial = src.trial(t);
    const auto& corpus = trial.corpus;
    const FunnelConfig cfg = trial_config(spec, t);
    const auto langs = train_languages(corpus);  // alphabetical
    for (std::size_t k = 1; k <= langs.size(); ++k) {
      MultilingualCorpus prefix = corpus;
      for (std::size_t i = k; i < langs.size(); ++i) prefix.train.erase(langs[i]);
      for (const auto& m : methods) {
        if (m != "zeroshot" && m != "fun_tat" && m != "fun_kfcv") {
          throw ConfigError("zeroshot mode runs zeroshot, fun_tat or fun_kfcv");
        }
        const auto trained = timed_train(m, prefix, cfg, &trial.embeddings);
        const auto ev = timed_evaluate(trained.model, prefix, &trial.embeddings);
        RunInfo info = run_info(m, cfg, src.dataset() + ":languages=" + std::to_string(k), t, "");
        info.train_seconds = trained.train_seconds;
        info.test_seconds = ev.test_seconds;
        sink.add_all(ev.counts, corpus.n_classes(), info);

        // Distribution of the two posterior sources feeding the meta-classifier.
        const auto& tr = trained.model.trace;
        std::map<std::string, std::vector<double>> values;
        for (std::size_t r = 0; r < tr.meta_inputs.rows(); ++r) {
          auto& v = values[tr.meta_row_languages[r] == "*" ? "shared" : "language"];
          for (double x : tr.meta_inputs.row(r)) v.push_back(x);
        }
        json summary = json::object();
        for (const auto& [source, v] : values) summary[source] = {{"mean", mean(v)}, {"sd", stddev(v)}};
        steps.push_back({{"trial", t},
                         {"method", m},
                         {"languages", k},
                         {"meta_rows", tr.meta_inputs.rows()},
                         {"posteriors", summary}});
      }
    }
  }
  report.extra["zeroshot_steps"] = std::move(steps);
}

// --- aggregation ---------------------------------------------------------

std::array<double, 4> measures(const EvalReport& r) { return {r.f1_micro, r.f1_macro, r.k_micro, r.k_macro}; }

using GroupKey = std::pair<std::string, std::string>;                      // dataset, language
using SystemKey = std::tuple<std::string, std::string, std::string>;     // method, variant, mode

void build_summary(ExperimentReport& report) {
  std::map<GroupKey, std::map<SystemKey, std::vector<const EvalReport*>>> groups;
  for (const auto& r : report.runs) {
    groups[{r.info.dataset, r.info.language}][{r.info.method, r.info.variant, r.info.mode}].push_back(&r);
  }
  for (auto& [gk, systems] : groups) {
    std::vector<SummaryRow> rows;
    std::vector<std::vector<std::array<double, 4>>> values;
    for (auto& [sk, runs] : systems) {
      std::sort(runs.begin(), runs.end(), [](auto* a, auto* b) { return a->info.trial < b->info.trial; });
      SummaryRow row;
      row.dataset = gk.first;
      row.language = gk.second;
      std::tie(row.method, row.variant, row.mode) = sk;
      row.n = runs.size();
      std::vector<std::array<double, 4>> v;
      std::vector<double> tr, te;
      for (const auto* r : runs) {
        v.push_back(measures(*r));
        tr.push_back(r->info.train_seconds);
        te.push_back(r->info.test_seconds);
      }
      for (int m = 0; m < 4; ++m) {
        std::vector<double> col;
        for (const auto& a : v) col.push_back(a[m]);
        row.mean[m] = mean(col);
        row.sd[m] = stddev(col);
      }
      row.train_seconds = mean(tr);
      row.test_seconds = mean(te);
      rows.push_back(std::move(row));
      values.push_back(std::move(v));
    }
    for (int m = 0; m < 4; ++m) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].mean[m] > rows[best].mean[m]) best = i;
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].best[m] = i == best;
        if (i == best) {
          rows[i].p_vs_best[m] = 1.0;
          continue;
        }
        std::vector<double> a, b;
        for (std::size_t k = 0; k < std::min(values[i].size(), values[best].size()); ++k) {
          a.push_back(values[best][k][m]);
          b.push_back(values[i][k][m]);
        }
        rows[i].p_vs_best[m] = a.size() >= 2 ? paired_ttest(a, b).p : std::numeric_limits<double>::quiet_NaN();
      }
    }
    for (auto& r : rows) report.summary.push_back(std::move(r));
  }
}

void build_improvements(ExperimentReport& report) {
  // (dataset, language) -> (method, mode) -> trial -> f1 macro
  std::map<GroupKey, std::map<std::pair<std::string, std::string>, std::map<int, double>>> groups;
  for (const auto& r : report.runs) {
    groups[{r.info.dataset, r.info.language}][{r.info.method, r.info.mode}][r.info.trial] = r.f1_macro;
  }
  for (const auto& [gk, systems] : groups) {
    const auto base = systems.find({"naive", "-"});
    if (base == systems.end()) continue;
    for (const auto& [sk, trials] : systems) {
      if (sk.first == "naive") continue;
      ImprovementRow row;
      row.dataset = gk.first;
      row.language = gk.second;
      row.method = sk.first;
      row.mode = sk.second;
      std::vector<double> bv, mv, diff, rel;
      bool rel_ok = true;
      for (const auto& [t, v] : trials) {
        const auto b = base->second.find(t);
        if (b == base->second.end()) continue;
        bv.push_back(b->second);
        mv.push_back(v);
        diff.push_back(v - b->second);
        if (b->second > 0.0) {
          rel.push_back((v - b->second) / b->second);
        } else {
          rel_ok = false;
        }
      }
      if (bv.empty()) continue;
      row.n = bv.size();
      row.baseline_mean = mean(bv);
      row.method_mean = mean(mv);
      row.absolute = mean(diff);
      if (rel_ok) row.relative = mean(rel);
      report.improvements.push_back(std::move(row));
    }
  }
}

const char* kMeasureNames[4] = {"f1_micro", "f1_macro", "k_micro", "k_macro"};

}  // namespace

// --- public --------------------------------------------------------------

std::string to_string(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::Mlclc:
      return "mlclc";
    case ExperimentMode::MonoBinary:
      return "mono_binary";
    case ExperimentMode::Curves:
      return "curves";
    case ExperimentMode::Ablation:
      return "ablation";
    case ExperimentMode::Calibration:
      return "calibration";
    case ExperimentMode::Zeroshot:
      return "zeroshot";
  }
  return "mlclc";
}

ExperimentMode experiment_mode_from_string(const std::string& s) {
  for (auto m : {ExperimentMode::Mlclc, ExperimentMode::MonoBinary, ExperimentMode::Curves, ExperimentMode::Ablation,
                 ExperimentMode::Calibration, ExperimentMode::Zeroshot}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown experiment mode '" + s + "'");
}

bool is_known_method(const std::string& m) {
  return m == "naive" || m == "fun_tat" || m == "fun_kfcv" || m == "upperbound" || m == "zeroshot";
}

double ExperimentSpec::effective_target_fraction() const {
  if (target_fraction) return *target_fraction;
  return mode == ExperimentMode::Ablation ? 0.1 : 1.0;
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in [0,1], got " + fmt("%g", f));
  }
  if (mode == ExperimentMode::Curves && fractions.empty()) throw ConfigError("curves mode needs fractions");
  const double tf = effective_target_fraction();
  if (!(tf >= 0.0 && tf <= 1.0)) throw ConfigError("target_fraction must lie in [0,1]");
  for (const auto& m : methods) {
    if (!is_known_method(m)) throw ConfigError("unknown method '" + m + "'");
  }
  if (manifest.empty()) synthetic.validate();
  funnel.validate();
}

FunnelModel train_method(const std::string& method, const MultilingualCorpus& corpus, const FunnelConfig& cfg,
                         const std::map<std::string, EmbeddingTable>* embeddings) {
  if (method == "naive" || method == "upperbound") return train_naive(corpus, cfg);
  FunnelConfig local = cfg;
  if (method == "fun_tat") {
    local.variant = Variant::TAT;
    return train_funnel(corpus, local);
  }
  if (method == "fun_kfcv") {
    local.variant = Variant::KFCV;
    return train_funnel(corpus, local);
  }
  if (method == "zeroshot") {
    if (embeddings == nullptr) throw DataError("zero-shot training needs embedding tables");
    local.variant = Variant::TAT;
    return train_zeroshot(corpus, *embeddings, local);
  }
  throw ConfigError("unknown method '" + method + "'");
}

std::map<std::string, std::vector<ConfusionCounts>> evaluate_model(
    const FunnelModel& model, const MultilingualCorpus& corpus,
    const std::map<std::string, EmbeddingTable>* embeddings) {
  std::map<std::string, std::vector<ConfusionCounts>> out;
  for (const auto& [lang, ds] : corpus.test) {
    const bool seen = model.tier1.contains(lang);
    const EmbeddingTable* table = nullptr;
    if (!seen) {
      if (!model.zero_shot || embeddings == nullptr) continue;
      const auto it = embeddings->find(lang);
      if (it == embeddings->end()) continue;
      table = &it->second;
    }
    std::vector<LabelSet> gold(ds.size()), pred(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
      const auto& d = ds.documents[i];
      gold[i] = d.labels;
      pred[i] = seen ? predict(model, lang, d.vector).decisions
                     : predict_zeroshot(model, lang, d.vector, table).decisions;
    });
    out[lang] = confusion(gold, pred, model.n_classes());
  }
  return out;
}

void aggregate_ablation(AblationReport& ab) {
  const std::size_t n = ab.languages.size();
  ab.contribution.assign(n, 0.0);
  ab.benefit.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row, col;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (ab.improvement[i][j]) row.push_back(*ab.improvement[i][j]);
      if (ab.improvement[j][i]) col.push_back(*ab.improvement[j][i]);
    }
    ab.contribution[i] = row.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(row);
    ab.benefit[i] = col.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(col);
  }
  auto corr = [&](const std::vector<double>& x) -> std::optional<CorrelationResult> {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < x.size() && i < ab.naive_f1_macro.size(); ++i) {
      if (std::isfinite(x[i])) {
        a.push_back(x[i]);
        b.push_back(ab.naive_f1_macro[i]);
      }
    }
    if (a.size() < 3) return std::nullopt;
    try {
      return pearson(a, b);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  ab.contribution_vs_naive = corr(ab.contribution);
  ab.benefit_vs_naive = corr(ab.benefit);
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const auto methods = methods_of(spec);
  const bool need_embeddings = spec.mode == ExperimentMode::Zeroshot ||
                               std::find(methods.begin(), methods.end(), "zeroshot") != methods.end();
  const TrialSource src(spec, need_embeddings);

  ExperimentReport report;
  report.mode = spec.mode;
  RunSink sink(report, out_dir, spec.record_timing);
  switch (spec.mode) {
    case ExperimentMode::Mlclc:
      run_mlclc(spec, src, sink);
      break;
    case ExperimentMode::MonoBinary:
      run_mono_binary(spec, src, sink);
      break;
    case ExperimentMode::Curves:
      run_curves(spec, src, sink);
      break;
    case ExperimentMode::Ablation:
      run_ablation(spec, src, sink, report);
      break;
    case ExperimentMode::Calibration:
      run_calibration(spec, src, sink);
      break;
    case ExperimentMode::Zeroshot:
      run_zeroshot(spec, src, sink, report);
      break;
  }
  build_summary(report);
  build_improvements(report);
  if (!out_dir.empty()) write_report(report, out_dir);
  return report;
}

std::string summary_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "dataset,language,method,variant,mode,n";
  for (const auto* m : kMeasureNames) out << ',' << m << "_mean," << m << "_sd," << m << "_p," << m << "_best";
  out << ",train_seconds,test_seconds\n";
  for (const auto& r : report.summary) {
    out << r.dataset << ',' << r.language << ',' << r.method << ',' << r.variant << ',' << r.mode << ',' << r.n;
    for (int m = 0; m < 4; ++m) {
      out << ',' << fmt("%.6f", r.mean[m]) << ',' << fmt("%.6f", r.sd[m]) << ','
          << (std::isfinite(r.p_vs_best[m]) ? fmt("%.6g", r.p_vs_best[m]) : "") << ',' << (r.best[m] ? 1 : 0);
    }
    out << ',' << fmt("%.6f", r.train_seconds) << ',' << fmt("%.6f", r.test_seconds) << '\n';
  }
  return out.str();
}

std::string improvements_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "dataset,language,method,mode,n,naive_f1_macro,method_f1_macro,absolute,relative\n";
  for (const auto& r : report.improvements) {
    out << r.dataset << ',' << r.language << ',' << r.method << ',' << r.mode << ',' << r.n << ','
        << fmt("%.6f", r.baseline_mean) << ',' << fmt("%.6f", r.method_mean) << ',' << fmt("%.6f", r.absolute) << ','
        << (r.relative ? fmt("%.6f", *r.relative) : "") << '\n';
  }
  return out.str();
}

std::string ablation_csv(const AblationReport& ab) {
  std::ostringstream out;
  out << "source";
  for (const auto& l : ab.languages) out << ',' << l;
  out << ",contribution,naive_f1_macro\n";
  for (std::size_t s = 0; s < ab.languages.size(); ++s) {
    out << ab.languages[s];
    for (std::size_t t = 0; t < ab.languages.size(); ++t) {
      out << ',' << (ab.improvement[s][t] ? fmt("%.6f", *ab.improvement[s][t]) : "");
    }
    out << ',' << (std::isfinite(ab.contribution[s]) ? fmt("%.6f", ab.contribution[s]) : "") << ','
        << fmt("%.6f", ab.naive_f1_macro[s]) << '\n';
  }
  out << "benefit";
  for (double b : ab.benefit) out << ',' << (std::isfinite(b) ? fmt("%.6f", b) : "");
  out << ",,\n";
  return out.str();
}

json report_json(const ExperimentReport& report) {
  json j;
  j["mode"] = to_string(report.mode);
  j["runs"] = json::array();
  for (const auto& r : report.runs) j["runs"].push_back(eval_to_json(r));
  j["summary"] = json::array();
  for (const auto& r : report.summary) {
    json row{{"dataset", r.dataset}, {"language", r.language}, {"method", r.method},
             {"variant", r.variant}, {"mode", r.mode},         {"n", r.n},
             {"train_seconds", r.train_seconds}, {"test_seconds", r.test_seconds}};
    for (int m = 0; m < 4; ++m) {
      row[kMeasureNames[m]] = {{"mean", r.mean[m]},
                               {"sd", r.sd[m]},
                               {"p_vs_best", finite_or_null(r.p_vs_best[m])},
                               {"best", r.best[m]}};
    }
    j["summary"].push_back(std::move(row));
  }
  j["improvements"] = json::array();
  for (const auto& r : report.improvements) {
    j["improvements"].push_back({{"dataset", r.dataset},
                                 {"language", r.language},
                                 {"method", r.method},
                                 {"mode", r.mode},
                                 {"n", r.n},
                                 {"naive_f1_macro", r.baseline_mean},
                                 {"method_f1_macro", r.method_mean},
                                 {"absolute", r.absolute},
                                 {"relative", optional_number(r.relative)}});
  }
  if (report.ablation) {
    const auto& ab = *report.ablation;
    json m = json::array();
    for (const auto& row : ab.improvement) {
      json jr = json::array();
      for (const auto& v : row) jr.push_back(optional_number(v));
      m.push_back(std::move(jr));
    }
    auto corr = [](const std::optional<CorrelationResult>& c) -> json {
      if (!c) return nullptr;
      return {{"rho", c->rho}, {"p", c->p}};
    };
    json contribution = json::array(), benefit = json::array();
    for (double v : ab.contribution) contribution.push_back(finite_or_null(v));
    for (double v : ab.benefit) benefit.push_back(finite_or_null(v));
    j["ablation"] = {{"languages", ab.languages},
                     {"improvement", std::move(m)},
                     {"contribution", std::move(contribution)},
                     {"benefit", std::move(benefit)},
                     {"naive_f1_macro", ab.naive_f1_macro},
                     {"contribution_vs_naive", corr(ab.contribution_vs_naive)},
                     {"benefit_vs_naive", corr(ab.benefit_vs_naive)}};
  }
  j["extra"] = report.extra;
  return j;
}

void write_report(const ExperimentReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (out_dir / name).string());
    out << text;
  };
  std::string runs = eval_csv_header() + "\n";
  for (const auto& r : report.runs) runs += eval_csv_row(r) + "\n";
  write("runs.csv", runs);
  write("summary.csv", summary_csv(report));
  write("improvements.csv", improvements_csv(report));
  if (report.ablation) write("ablation.csv", ablation_csv(*report.ablation));
  write("report.json", report_json(report).dump(1) + "\n");
}

BenchReport run_bench(const ExperimentSpec& spec) {
  spec.validate();
  auto methods = spec.methods.empty() ? std::vector<std::string>{"naive", "fun_tat", "fun_kfcv"} : spec.methods;
  const bool need_embeddings = std::find(methods.begin(), methods.end(), "zeroshot") != methods.end();
  const TrialSource src(spec, need_embeddings);

  BenchReport report;
  report.threads = thread_count();
  report.hardware_threads = std::thread::hardware_concurrency();
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> times;
  for (int t = 0; t < spec.trials; ++t) {
    const Trial trial = src.trial(t);
    const FunnelConfig cfg = trial_config(spec, t);
    if (t == 0) {
      for (const auto& [_, ds] : trial.corpus.test) report.test_documents += ds.size();
    }
    for (const auto& m : methods) {
      MultilingualCorpus view;
      const MultilingualCorpus* data = &trial.corpus;
      if (m == "upperbound") {
        view = make_upperbound_view(trial.corpus, pivot_of(spec, trial.corpus));
        data = &view;
      }
      const auto trained = timed_train(m, *data, cfg, need_embeddings ? &trial.embeddings : nullptr);
      const auto ev = timed_evaluate(trained.model, *data, need_embeddings ? &trial.embeddings : nullptr);
      times[m].first.push_back(trained.train_seconds);
      times[m].second.push_back(ev.test_seconds);
    }
  }
  for (const auto& m : methods) {
    const auto& [tr, te] = times.at(m);
    report.rows.push_back({m, tr.size(), mean(tr), stddev(tr), mean(te), stddev(te)});
  }
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "method,trials,train_mean,train_sd,test_mean,test_sd,threads,hardware_threads,test_documents\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.trials << ',' << fmt("%.6f", r.train_mean) << ',' << fmt("%.6f", r.train_sd) << ','
        << fmt("%.6f", r.test_mean) << ',' << fmt("%.6f", r.test_sd) << ',' << report.threads << ','
        << report.hardware_threads << ',' << report.test_documents << '\n';
  }
  return out.str();
}

}  // namespace funnel

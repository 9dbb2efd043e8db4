// funnelling: generate corpora, train/predict/evaluate models, and run the
// experiment protocols.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "funnel/corpus.hpp"
#include "funnel/error.hpp"
#include "funnel/funnel.hpp"
#include "funnel/harness.hpp"
#include "funnel/metrics.hpp"
#include "funnel/parallel.hpp"
#include "funnel/synthetic.hpp"

namespace fs = std::filesystem;
using namespace funnel;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

// "lang=path" pairs.
std::map<std::string, fs::path> parse_embedding_args(const std::vector<std::string>& args) {
  std::map<std::string, fs::path> out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--embeddings expects lang=path, got '" + a + "'");
    out[a.substr(0, eq)] = a.substr(eq + 1);
  }
  return out;
}

std::map<std::string, EmbeddingTable> load_embeddings(const LoadedCorpus& lc, const std::vector<std::string>& args,
                                                      bool required) {
  auto files = lc.embedding_files;
  for (const auto& [l, p] : parse_embedding_args(args)) files[l] = p;
  std::map<std::string, EmbeddingTable> out;
  if (files.empty() && lc.synthetic && lc.synthetic->embedding_dim > 0 && required) {
    return generate_synthetic_embeddings(*lc.synthetic);
  }
  for (const auto& [l, p] : files) out.emplace(l, EmbeddingTable::load(p));
  return out;
}

const std::map<std::string, LanguageDataset>& split_of(const MultilingualCorpus& c, const std::string& split) {
  if (split == "test") return c.test;
  if (split == "train") return c.train;
  throw ConfigError("--split must be train or test");
}

struct Common {
  int threads = 0;
};

struct GenerateArgs {
  std::string config;
  std::string out = "corpus";
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a) {
  SyntheticConfig cfg;
  if (!a.config.empty()) cfg = synthetic_config_from_json_text(read_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const auto corpus = generate_synthetic(cfg);
  std::map<std::string, fs::path> emb_files;
  if (cfg.embedding_dim > 0) {
    const fs::path dir = fs::path(a.out) / "embeddings";
    fs::create_directories(dir);
    for (const auto& [lang, table] : generate_synthetic_embeddings(cfg)) {
      const fs::path p = dir / (lang + ".emb");
      table.save(p);
      emb_files[lang] = fs::path("embeddings") / (lang + ".emb");
    }
  }
  const auto manifest = save_corpus(corpus, a.out, emb_files, cfg);
  std::cout << manifest.string() << '\n';

  std::size_t train = 0, test = 0;
  std::vector<std::size_t> positives(corpus.n_classes(), 0);
  for (const auto& [_, ds] : corpus.train) {
    train += ds.size();
    for (const auto& d : ds.documents) {
      for (int c : d.labels) ++positives[static_cast<std::size_t>(c)];
    }
  }
  for (const auto& [_, ds] : corpus.test) test += ds.size();
  std::cout << "languages " << corpus.train.size() << ", classes " << corpus.n_classes() << ", train docs " << train
            << ", test docs " << test << '\n';
  std::cout << "train prevalence:";
  for (std::size_t c = 0; c < positives.size(); ++c) {
    std::printf(" %s=%.3f", corpus.class_names[c].c_str(),
                train ? static_cast<double>(positives[c]) / static_cast<double>(train) : 0.0);
  }
  std::cout << std::endl;
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string method = "fun_tat";
  std::string variant;
  std::string calibration = "calib";
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> embeddings;
  std::string out = "model.json";
};

int cmd_train(const TrainArgs& a) {
  if (!is_known_method(a.method)) throw ConfigError("unknown method '" + a.method + "'");
  FunnelConfig cfg;
  cfg.mode = calibration_mode_from_string(a.calibration);
  cfg.k = a.k;
  cfg.seed = a.seed;
  std::string method = a.method;
  if (!a.variant.empty()) {
    const Variant v = variant_from_string(a.variant);
    if (method == "fun_tat" || method == "fun_kfcv") {
      method = v == Variant::TAT ? "fun_tat" : "fun_kfcv";
    } else {
      throw ConfigError("--variant applies to funnelling methods only");
    }
  }
  cfg.variant = method == "fun_kfcv" ? Variant::KFCV : Variant::TAT;

  const auto lc = load_corpus_with_extras(a.manifest);
  MultilingualCorpus corpus = lc.corpus;
  if (method == "upperbound") corpus = make_upperbound_view(corpus, corpus.train.begin()->first);
  std::map<std::string, EmbeddingTable> emb;
  if (method == "zeroshot") emb = load_embeddings(lc, a.embeddings, true);

  const auto model = train_method(method, corpus, cfg, method == "zeroshot" ? &emb : nullptr);
  save_model(model, a.out);
  std::fprintf(stderr, "tier-1 %.3fs, calibration %.3fs, tier-2 %.3fs\n", model.trace.tier1_seconds,
               model.trace.calibration_seconds, model.trace.tier2_seconds);
  std::cout << a.out << '\n';
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string manifest;
  std::string split = "test";
  std::vector<std::string> embeddings;
  std::string out = "predictions.tsv";
};

std::string join_labels(const LabelSet& ls) {
  if (ls.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(ls[i]);
  }
  return s;
}

int cmd_predict(const PredictArgs& a) {
  const auto model = load_model(a.model);
  const auto lc = load_corpus_with_extras(a.manifest);
  const auto& split = split_of(lc.corpus, a.split);
  std::map<std::string, EmbeddingTable> emb;
  if (model.zero_shot) emb = load_embeddings(lc, a.embeddings, true);

  std::ostringstream out;
  for (const auto& [lang, ds] : split) {
    const bool seen = model.tier1.contains(lang);
    if (!seen && !model.zero_shot) throw DataError("model has no classifier for language '" + lang + "'");
    const EmbeddingTable* table = nullptr;
    if (!seen) {
      const auto it = emb.find(lang);
      if (it == emb.end()) throw DataError("no embedding table for unseen language '" + lang + "'");
      table = &it->second;
    }
    std::vector<Prediction> preds(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
      const auto& d = ds.documents[i];
      preds[i] = seen ? predict(model, lang, d.vector) : predict_zeroshot(model, lang, d.vector, table);
    });
    for (std::size_t i = 0; i < ds.size(); ++i) {
      out << ds.documents[i].id << '\t' << lang << '\t';
      const auto& post = preds[i].posterior;
      for (std::size_t c = 0; c < post.size(); ++c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", post[c]);
        out << (c ? "," : "") << buf;
      }
      out << '\t' << join_labels(preds[i].decisions) << '\n';
    }
  }
  write_file(a.out, out.str());
  return 0;
}

struct EvaluateArgs {
  std::string predictions;
  std::string manifest;
  std::string split = "test";
  std::string out = "eval";
  std::string method = "unknown";
};

LabelSet parse_label_field(const std::string& f, const std::string& where) {
  LabelSet out;
  if (f == "-") return out;
  std::stringstream ss(f);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw DataError(where + ": bad label '" + tok + "'");
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_evaluate(const EvaluateArgs& a) {
  const auto corpus = load_corpus(a.manifest);
  const auto& split = split_of(corpus, a.split);

  std::ifstream in(a.predictions);
  if (!in) throw DataError("cannot open " + a.predictions);
  std::map<std::pair<std::string, std::string>, LabelSet> predicted;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = a.predictions + ":" + std::to_string(lineno);
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) throw DataError(where + ": expected 4 tab-separated columns");
    if (!predicted.emplace(std::make_pair(cols[1], cols[0]), parse_label_field(cols[3], where)).second) {
      throw DataError(where + ": duplicate prediction for '" + cols[0] + "'");
    }
  }

  std::map<std::string, std::vector<ConfusionCounts>> by_lang;
  std::size_t matched = 0;
  for (const auto& [lang, ds] : split) {
    std::vector<LabelSet> gold, pred;
    for (const auto& d : ds.documents) {
      const auto it = predicted.find({lang, d.id});
      if (it == predicted.end()) throw DataError("no prediction for document '" + d.id + "' (" + lang + ")");
      for (int c : it->second) {
        if (c >= static_cast<int>(corpus.n_classes())) throw DataError("predicted label out of range for " + d.id);
      }
      gold.push_back(d.labels);
      pred.push_back(it->second);
      ++matched;
    }
    by_lang[lang] = confusion(gold, pred, corpus.n_classes());
  }
  if (matched != predicted.size()) throw DataError("predictions file lists documents absent from the gold split");

  std::vector<EvalReport> reports;
  std::vector<ConfusionCounts> all(corpus.n_classes());
  for (const auto& [lang, counts] : by_lang) {
    RunInfo info;
    info.method = a.method;
    info.dataset = fs::path(a.manifest).parent_path().filename().string();
    info.language = lang;
    reports.push_back(EvalReport::from_counts(counts, info));
    for (std::size_t c = 0; c < counts.size(); ++c) all[c] += counts[c];
  }
  RunInfo info;
  info.method = a.method;
  info.dataset = fs::path(a.manifest).parent_path().filename().string();
  info.language = "all";
  reports.push_back(EvalReport::from_counts(all, info));

  std::string csv = eval_csv_header() + "\n";
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) {
    csv += eval_csv_row(r) + "\n";
    j.push_back(eval_to_json(r));
  }
  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "eval.csv", csv);
  write_file(fs::path(a.out) / "eval.json", j.dump(1) + "\n");
  std::cout << csv;
  return 0;
}

struct ExperimentArgs {
  std::string mode = "mlclc";
  std::string manifest;
  std::string config;
  std::vector<std::string> methods;
  int trials = 10;
  std::vector<double> fractions;
  std::uint64_t seed = 1;
  std::vector<std::string> targets;
  std::optional<double> target_fraction;
  std::string calibration = "calib";
  int k = 10;
  std::vector<std::string> embeddings;
  std::string out = "report";
  bool no_timing = false;
};

ExperimentSpec make_spec(const ExperimentArgs& a) {
  ExperimentSpec spec;
  spec.mode = experiment_mode_from_string(a.mode);
  spec.manifest = a.manifest;
  if (!a.config.empty()) spec.synthetic = synthetic_config_from_json_text(read_file(a.config));
  spec.methods = a.methods;
  spec.trials = a.trials;
  if (!a.fractions.empty()) spec.fractions = a.fractions;
  spec.seed = a.seed;
  spec.targets = a.targets;
  spec.target_fraction = a.target_fraction;
  spec.embedding_files = parse_embedding_args(a.embeddings);
  spec.funnel.mode = calibration_mode_from_string(a.calibration);
  spec.funnel.k = a.k;
  spec.record_timing = !a.no_timing;
  return spec;
}

int cmd_experiment(const ExperimentArgs& a) {
  const auto spec = make_spec(a);
  const auto report = run_experiment(spec, a.out);
  std::cout << summary_csv(report);
  std::cerr << "report written to " << a.out << '\n';
  return 0;
}

int cmd_bench(const ExperimentArgs& a) {
  const auto spec = make_spec(a);
  const auto report = run_bench(spec);
  const auto csv = bench_csv(report);
  if (!a.out.empty() && a.out != "-") write_file(a.out, csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier funnelling for multilingual multilabel classification"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (default: FUNNEL_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic corpus");
  g->add_option("--config", gen.config, "SyntheticConfig JSON file");
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--seed", gen.seed, "Override the config seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--manifest", tr.manifest)->required();
  t->add_option("--method", tr.method, "naive, fun_tat, fun_kfcv, upperbound, zeroshot");
  t->add_option("--variant", tr.variant)->check(CLI::IsMember({"tat", "kfcv"}));
  t->add_option("--calibration", tr.calibration)->check(CLI::IsMember({"calib", "nocalib", "noprob"}));
  t->add_option("--k", tr.k);
  t->add_option("--seed", tr.seed);
  t->add_option("--embeddings", tr.embeddings, "lang=path");
  t->add_option("--out", tr.out);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Classify a split");
  p->add_option("--model", pr.model)->required();
  p->add_option("--manifest", pr.manifest)->required();
  p->add_option("--split", pr.split)->check(CLI::IsMember({"train", "test"}));
  p->add_option("--embeddings", pr.embeddings, "lang=path");
  p->add_option("--out", pr.out);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a predictions file");
  e->add_option("--predictions", ev.predictions)->required();
  e->add_option("--manifest", ev.manifest)->required();
  e->add_option("--split", ev.split)->check(CLI::IsMember({"train", "test"}));
  e->add_option("--method", ev.method, "Label written into the report");
  e->add_option("--out", ev.out, "Output directory");

  ExperimentArgs ex;
  ExperimentArgs be;
  be.trials = 3;
  be.out = "-";
  auto add_experiment_flags = [](CLI::App* sub, ExperimentArgs& a) {
    sub->add_option("--manifest", a.manifest, "Corpus manifest (default: synthetic)");
    sub->add_option("--config", a.config, "SyntheticConfig JSON used when no manifest is given");
    sub->add_option("--methods,--method", a.methods)->delimiter(',');
    sub->add_option("--trials", a.trials)->check(CLI::PositiveNumber);
    sub->add_option("--seed", a.seed);
    sub->add_option("--calibration", a.calibration)->check(CLI::IsMember({"calib", "nocalib", "noprob"}));
    sub->add_option("--k", a.k);
    sub->add_option("--embeddings", a.embeddings, "lang=path");
    sub->add_option("--out", a.out);
  };
  auto* x = app.add_subcommand("experiment", "Run an experiment protocol");
  add_experiment_flags(x, ex);
  x->add_option("--mode", ex.mode)
      ->check(CLI::IsMember({"mlclc", "mono_binary", "curves", "ablation", "calibration", "zeroshot"}));
  x->add_option("--fractions", ex.fractions)->delimiter(',');
  x->add_option("--targets", ex.targets)->delimiter(',');
  x->add_option("--target-fraction", ex.target_fraction);
  x->add_flag("--no-timing", ex.no_timing, "Write zero into timing columns");

  auto* b = app.add_subcommand("bench", "Time training and testing");
  add_experiment_flags(b, be);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (common.threads > 0) set_thread_count(static_cast<std::size_t>(common.threads));
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*p) return cmd_predict(pr);
    if (*e) return cmd_evaluate(ev);
    if (*x) return cmd_experiment(ex);
    if (*b) return cmd_bench(be);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsageError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "funnel/funnel.hpp"
#include "funnel/metrics.hpp"
#include "funnel/synthetic.hpp"
#include "test_util.hpp"

#ifndef FUNNELLING_BIN
#error "FUNNELLING_BIN must point at the command-line tool"
#endif

using namespace funnel;
using testutil::TempDir;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(FUNNELLING_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

const char* kTinyConfig = R"({"n_languages": 2, "n_classes": 3, "vocab_per_language": 60,
  "docs_per_language_train": 30, "docs_per_language_test": 12, "mean_doc_length": 20,
  "class_prevalence_range": [0.2, 0.4], "embedding_dim": 4, "seed": 5})";

}  // namespace

TEST_CASE("cli: generate, train, predict, evaluate") {
  TempDir dir;
  testutil::write_file(dir / "cfg.json", kTinyConfig);
  const auto corpus = (dir / "corpus").string();
  REQUIRE(run("generate --config " + (dir / "cfg.json").string() + " --out " + corpus) == 0);
  const auto manifest = corpus + "/manifest.json";
  REQUIRE(std::filesystem::exists(manifest));

  // same config twice: identical files
  REQUIRE(run("generate --config " + (dir / "cfg.json").string() + " --out " + (dir / "again").string()) == 0);
  for (const auto& e : std::filesystem::directory_iterator(corpus)) {
    if (e.is_regular_file()) {
      CHECK(testutil::read_file(e.path()) == testutil::read_file(dir / "again" / e.path().filename().string()));
    }
  }

  const auto tat = (dir / "tat.json").string();
  REQUIRE(run("train --manifest " + manifest + " --method fun_tat --out " + tat) == 0);
  CHECK(load_model(tat).config.variant == Variant::TAT);

  const auto kfcv = (dir / "kfcv.json").string();
  REQUIRE(run("train --manifest " + manifest + " --method fun_kfcv --k 10 --out " + kfcv) == 0);
  const auto km = load_model(kfcv);
  CHECK(km.config.variant == Variant::KFCV);
  CHECK(km.config.k == 10);

  const auto naive = (dir / "naive.json").string();
  REQUIRE(run("train --manifest " + manifest + " --method naive --out " + naive) == 0);
  CHECK(!load_model(naive).tier2.has_value());

  const auto preds = (dir / "p.tsv").string();
  REQUIRE(run("predict --model " + tat + " --manifest " + manifest + " --out " + preds) == 0);
  CHECK(count_lines(preds) == 24);

  const auto eval = (dir / "eval").string();
  REQUIRE(run("evaluate --predictions " + preds + " --manifest " + manifest + " --out " + eval) == 0);
  CHECK(std::filesystem::exists(eval + "/eval.csv"));
  CHECK(std::filesystem::exists(eval + "/eval.json"));
  CHECK(count_lines(eval + "/eval.csv") == 4);
}

TEST_CASE("cli: perfect and empty predictions") {
  TempDir dir;
  testutil::write_file(dir / "cfg.json", kTinyConfig);
  REQUIRE(run("generate --config " + (dir / "cfg.json").string() + " --out " + (dir / "c").string()) == 0);
  const auto manifest = (dir / "c" / "manifest.json").string();
  const auto corpus = load_corpus(manifest);

  std::string perfect, empty;
  for (const auto& [lang, ds] : corpus.test) {
    for (const auto& d : ds.documents) {
      std::string labels;
      for (int c : d.labels) labels += (labels.empty() ? "" : ",") + std::to_string(c);
      perfect += d.id + "\t" + lang + "\t0\t" + (labels.empty() ? "-" : labels) + "\n";
      empty += d.id + "\t" + lang + "\t0\t-\n";
    }
  }
  testutil::write_file(dir / "perfect.tsv", perfect);
  testutil::write_file(dir / "empty.tsv", empty);
  REQUIRE(run("evaluate --predictions " + (dir / "perfect.tsv").string() + " --manifest " + manifest + " --out " +
              (dir / "e1").string()) == 0);
  const auto j1 = nlohmann::json::parse(testutil::read_file(dir / "e1" / "eval.json"));
  for (const auto& r : j1) {
    CHECK(r.at("f1_micro").get<double>() == 1.0);
    CHECK(r.at("f1_macro").get<double>() == 1.0);
    CHECK(r.at("k_micro").get<double>() == 1.0);
    CHECK(r.at("k_macro").get<double>() == 1.0);
  }
  REQUIRE(run("evaluate --predictions " + (dir / "empty.tsv").string() + " --manifest " + manifest + " --out " +
              (dir / "e2").string()) == 0);
  const auto j2 = nlohmann::json::parse(testutil::read_file(dir / "e2" / "eval.json"));
  CHECK(j2.back().at("f1_micro").get<double>() == 0.0);
  // reports recompute from their embedded counts
  for (const auto& r : j2) CHECK(eval_from_json(r).f1_macro == r.at("f1_macro").get<double>());

  // a prediction for a document that is not in the gold split
  testutil::write_file(dir / "bad.tsv", empty + "ghost\tda\t0\t-\n");
  CHECK(run("evaluate --predictions " + (dir / "bad.tsv").string() + " --manifest " + manifest + " --out " +
            (dir / "e3").string()) == 2);
}

TEST_CASE("cli: routing and empty splits") {
  TempDir dir;
  SyntheticConfig cfg = synthetic_config_from_json_text(kTinyConfig);
  const auto c = generate_synthetic(cfg);
  const auto seen = restrict_languages(c, {"da"});
  const auto m1 = save_corpus(seen, dir / "seen").string();
  const auto m2 = save_corpus(c, dir / "both").string();
  auto no_test = c;
  for (auto& [_, ds] : no_test.test) ds.documents.clear();
  const auto m3 = save_corpus(no_test, dir / "notest").string();

  const auto model = (dir / "m.json").string();
  REQUIRE(run("train --manifest " + m1 + " --method fun_tat --out " + model) == 0);
  CHECK(run("predict --model " + model + " --manifest " + m2 + " --out " + (dir / "p.tsv").string()) == 2);

  auto model_all = (dir / "all.json").string();
  REQUIRE(run("train --manifest " + m2 + " --method naive --out " + model_all) == 0);
  REQUIRE(run("predict --model " + model_all + " --manifest " + m3 + " --out " + (dir / "e.tsv").string()) == 0);
  CHECK(std::filesystem::exists(dir / "e.tsv"));
  CHECK(count_lines(dir / "e.tsv") == 0);
}

TEST_CASE("cli: exit codes") {
  TempDir dir;
  CHECK(run("") != 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train") == 1);
  testutil::write_file(dir / "neg.json", R"({"vocab_per_language": -4})");
  CHECK(run("generate --config " + (dir / "neg.json").string() + " --out " + (dir / "x").string()) == 1);
  CHECK(run("train --manifest " + (dir / "missing.json").string() + " --out " + (dir / "m.json").string()) == 2);
  testutil::write_file(dir / "cfg.json", kTinyConfig);
  REQUIRE(run("generate --config " + (dir / "cfg.json").string() + " --out " + (dir / "c").string()) == 0);
  CHECK(run("train --manifest " + (dir / "c" / "manifest.json").string() + " --variant loo") == 1);
}

TEST_CASE("cli: bench writes a timing table") {
  TempDir dir;
  testutil::write_file(dir / "cfg.json", kTinyConfig);
  const auto out = (dir / "bench.csv").string();
  REQUIRE(run("bench --config " + (dir / "cfg.json").string() + " --methods naive,fun_tat --trials 3 --out " + out) ==
          0);
  CHECK(count_lines(out) == 3);
  CHECK(testutil::read_file(out).find("hardware_threads") != std::string::npos);
}

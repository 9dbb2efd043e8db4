#include <doctest.h>

#include <algorithm>
#include <set>

#include "funnel/corpus.hpp"
#include "funnel/error.hpp"
#include "funnel/synthetic.hpp"
#include "test_util.hpp"

using namespace funnel;
using testutil::TempDir;

namespace {

MultilingualCorpus two_language_corpus() {
  MultilingualCorpus c;
  c.class_names = {"econ", "sport", "tech"};
  for (const std::string lang : {"en", "it"}) {
    LanguageDataset tr{lang, {}, 10};
    for (int i = 0; i < 4; ++i) {
      tr.documents.push_back(testutil::doc(lang + "-" + std::to_string(i), {i % 3},
                                           {{static_cast<std::uint32_t>(i), 0.1 + i}, {9, 1.0 / 3.0}}));
    }
    c.train[lang] = tr;
    c.test[lang] = LanguageDataset{lang, {testutil::doc(lang + "-t", {0, 2}, {{1, 2.0}})}, 10};
  }
  return c;
}

std::set<std::string> ids(const LanguageDataset& ds) {
  std::set<std::string> out;
  for (const auto& d : ds.documents) out.insert(d.id);
  return out;
}

}  // namespace

TEST_CASE("parse_document_line examples") {
  const auto d = parse_document_line("1,2 0:0.5 7:0.25", "x");
  CHECK(d.labels == LabelSet{1, 2});
  REQUIRE(d.vector.size() == 2);
  CHECK(d.vector.entries[0] == SparseEntry{0, 0.5});
  CHECK(d.vector.entries[1] == SparseEntry{7, 0.25});
  CHECK_THROWS_AS(parse_document_line("0 5:0.1 3:0.2", "y"), DataError);
  CHECK(parse_document_line("- 3:1", "z").labels.empty());
  CHECK_THROWS_AS(parse_document_line("0 3", "w"), DataError);
}

TEST_CASE("format and parse are inverse, bit-exact") {
  const auto d = testutil::doc("a", {0, 4}, {{2, 0.1}, {5, 1.0 / 3.0}, {8, 6.02214076e23}});
  const auto back = parse_document_line(format_document_line(d), "a");
  CHECK(back == d);
}

TEST_CASE("corpus round-trip through disk") {
  TempDir dir;
  auto c = two_language_corpus();
  SUBCASE("plain") {
    const auto manifest = save_corpus(c, dir.path());
    CHECK(load_corpus(manifest) == c);
  }
  SUBCASE("empty test split stays empty") {
    c.test["it"].documents.clear();
    const auto manifest = save_corpus(c, dir.path());
    const auto back = load_corpus(manifest);
    CHECK(back.test.at("it").empty());
    CHECK(back == c);
  }
  SUBCASE("alignment survives") {
    c.parallel = true;
    for (int i = 0; i < 4; ++i) {
      c.alignment["g" + std::to_string(i)] = {{"en", "en-" + std::to_string(i)}, {"it", "it-" + std::to_string(i)}};
    }
    const auto back = load_corpus(save_corpus(c, dir.path()));
    CHECK(back.parallel);
    CHECK(back.alignment == c.alignment);
  }
}

TEST_CASE("load_corpus reports the failing line") {
  TempDir dir;
  const auto manifest = save_corpus(two_language_corpus(), dir.path());
  // corrupt the second line of one data file
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    if (e.path().filename().string().find("en") != std::string::npos &&
        e.path().filename().string().find("train") != std::string::npos) {
      auto text = testutil::read_file(e.path());
      const auto first = text.find('\n');
      text.insert(first + 1, "0 5:0.1 3:0.2\n");
      testutil::write_file(e.path(), text);
    }
  }
  try {
    load_corpus(manifest);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_corpus(dir / "missing.json"), DataError);
}

TEST_CASE("feature index beyond vocabulary is rejected") {
  TempDir dir;
  auto c = two_language_corpus();
  c.train["en"].documents[0].vector = make_sparse({{12, 1.0}});
  CHECK_THROWS_AS(c.validate(), DataError);
}

TEST_CASE("generate_synthetic is deterministic and seed-sensitive") {
  const auto cfg = testutil::tiny_config(1);
  CHECK(generate_synthetic(cfg) == generate_synthetic(cfg));
  auto other = cfg;
  other.seed = 2;
  CHECK(!(generate_synthetic(cfg) == generate_synthetic(other)));

  TempDir a, b;
  save_corpus(generate_synthetic(cfg), a.path());
  save_corpus(generate_synthetic(cfg), b.path());
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    CHECK(testutil::read_file(e.path()) == testutil::read_file(b / e.path().filename().string()));
  }
}

TEST_CASE("generate_synthetic: default prevalences land in (0.01, 0.5)") {
  SyntheticConfig cfg;
  cfg.n_classes = 20;
  cfg.class_prevalence_range = {0.05, 0.3};
  const auto c = generate_synthetic(cfg);
  std::vector<double> count(20, 0.0);
  double n = 0;
  for (const auto& [_, ds] : c.train) {
    for (const auto& d : ds.documents) {
      for (int l : d.labels) count[l] += 1;
      n += 1;
    }
  }
  for (double k : count) {
    CHECK(k / n > 0.01);
    CHECK(k / n < 0.5);
  }
}

TEST_CASE("generate_synthetic structure") {
  const auto cfg = testutil::tiny_config(4);
  const auto c = generate_synthetic(cfg);
  CHECK(c.languages().size() == 3);
  for (const auto& [lang, ds] : c.train) {
    CHECK(ds.vocabulary_size == cfg.vocab_per_language);
    CHECK(ds.size() == cfg.docs_per_language_train);
    for (const auto& d : ds.documents) {
      if (!d.vector.empty()) CHECK(d.vector.entries.back().index < cfg.vocab_per_language);
    }
  }
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    bool any = false;
    for (const auto& [_, ds] : c.train) {
      for (const auto& d : ds.documents) any |= std::binary_search(d.labels.begin(), d.labels.end(), (int)k);
    }
    CHECK(any);
  }
}

TEST_CASE("label correlation raises co-occurrence") {
  auto cfg = testutil::tiny_config(3);
  cfg.docs_per_language_train = 400;
  auto cooc = [](const MultilingualCorpus& c) {
    // mean number of labels per labelled document
    double labels = 0, docs = 0;
    for (const auto& [_, ds] : c.train) {
      for (const auto& d : ds.documents) {
        if (d.labels.empty()) continue;
        labels += static_cast<double>(d.labels.size());
        docs += 1;
      }
    }
    return labels / docs;
  };
  cfg.label_correlation = 0.0;
  const double lo = cooc(generate_synthetic(cfg));
  cfg.label_correlation = 0.9;
  const double hi = cooc(generate_synthetic(cfg));
  CHECK(hi > lo);
}

TEST_CASE("synthetic config validation names the field") {
  SyntheticConfig cfg;
  cfg.vocab_per_language = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("vocab_per_language") != std::string::npos);
  }
  CHECK_THROWS_AS(synthetic_config_from_json_text(R"({"vocab_per_language": -3})"), ConfigError);
  CHECK(synthetic_config_from_json_text(R"({"n_classes": 7})").n_classes == 7);
}

TEST_CASE("infeasible prevalence is reported with the class") {
  SyntheticConfig cfg;
  cfg.n_languages = 1;
  cfg.docs_per_language_train = 5;
  cfg.class_prevalence_range = {0.01, 0.02};
  try {
    generate_synthetic(cfg);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("class c") != std::string::npos);
  }
}

TEST_CASE("subsample_training examples") {
  const auto c = generate_synthetic(testutil::tiny_config(2));
  CHECK(subsample_training(c, "da", 1.0, 5) == c);
  CHECK(subsample_training(c, "da", 0.0, 5).train.at("da").empty());
  const auto s10 = subsample_training(c, "da", 0.1, 5);
  const auto s50 = subsample_training(c, "da", 0.5, 5);
  CHECK(s10.train.at("da").size() == 6);
  CHECK(s50.train.at("da").size() == 30);
  const auto a = ids(s10.train.at("da")), b = ids(s50.train.at("da"));
  CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  // other languages untouched
  CHECK(s10.train.at("de") == c.train.at("de"));
  CHECK_THROWS_AS(subsample_training(c, "xx", 0.5, 5), DataError);
}

TEST_CASE("subsample nesting holds for every fraction pair") {
  const auto c = generate_synthetic(testutil::tiny_config(6));
  for (int p = 0; p <= 10; ++p) {
    for (int q = p; q <= 10; ++q) {
      const auto a = ids(subsample_training(c, "de", p / 10.0, 9).train.at("de"));
      const auto b = ids(subsample_training(c, "de", q / 10.0, 9).train.at("de"));
      CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
  }
}

TEST_CASE("upper-bound view") {
  auto cfg = testutil::tiny_config(5);
  cfg.parallel = true;
  cfg.docs_per_language_train = 100;
  cfg.docs_per_language_test = 50;
  const auto c = generate_synthetic(cfg);
  const auto v = make_upperbound_view(c, "de");
  CHECK(v.train.size() == 1);
  CHECK(v.train.at("de").size() == 300);
  CHECK(v.test.at("de") == c.test.at("de"));
  CHECK(v.test.size() == 1);
  CHECK_THROWS_AS(make_upperbound_view(generate_synthetic(testutil::tiny_config(5)), "de"), DataError);
}

TEST_CASE("restrict helpers") {
  const auto c = generate_synthetic(testutil::tiny_config(8));
  const auto r = restrict_languages(c, {"en"});
  CHECK(r.languages() == std::vector<std::string>{"en"});
  const auto one = restrict_to_class(c, 2);
  CHECK(one.n_classes() == 1);
  for (std::size_t i = 0; i < c.train.at("de").size(); ++i) {
    const auto& orig = c.train.at("de").documents[i].labels;
    const bool pos = std::binary_search(orig.begin(), orig.end(), 2);
    CHECK(one.train.at("de").documents[i].labels == (pos ? LabelSet{0} : LabelSet{}));
  }
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "funnel/error.hpp"
#include "funnel/metrics.hpp"
#include "funnel/random.hpp"
#include "oracles.hpp"

using namespace funnel;

namespace {

ConfusionCounts cc(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) { return {tp, fp, fn, tn}; }

oracle::Counts oc(const ConfusionCounts& c) { return {c.tp, c.fp, c.fn, c.tn}; }

}  // namespace

TEST_CASE("confusion: gold equal to predictions has no errors") {
  std::vector<LabelSet> gold{{0, 2}, {}, {1}, {0, 1, 2}};
  const auto counts = confusion(gold, gold, 3);
  REQUIRE(counts.size() == 3);
  for (const auto& c : counts) {
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.total() == gold.size());
  }
}

TEST_CASE("confusion: empty predictions leave only false negatives") {
  std::vector<LabelSet> gold{{0, 2}, {}, {2}, {0, 2}};
  std::vector<LabelSet> pred(gold.size());
  const auto counts = confusion(gold, pred, 3);
  CHECK(counts[0] == cc(0, 0, 2, 2));
  CHECK(counts[1] == cc(0, 0, 0, 4));
  CHECK(counts[2] == cc(0, 0, 3, 1));
}

TEST_CASE("confusion: three documents against a hand count") {
  // doc  gold   pred
  //  a   {0}    {0,1}
  //  b   {1}    {}
  //  c   {0,1}  {1}
  std::vector<LabelSet> gold{{0}, {1}, {0, 1}};
  std::vector<LabelSet> pred{{0, 1}, {}, {1}};
  const auto counts = confusion(gold, pred, 2);
  CHECK(counts[0] == cc(1, 0, 1, 1));
  CHECK(counts[1] == cc(1, 1, 1, 0));
}

TEST_CASE("confusion: brute-force enumeration on random label sets") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng.below(20), k = 1 + rng.below(6);
    std::vector<LabelSet> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        if (rng.uniform() < 0.4) gold[i].push_back(static_cast<int>(c));
        if (rng.uniform() < 0.4) pred[i].push_back(static_cast<int>(c));
      }
    }
    const auto counts = confusion(gold, pred, k);
    for (std::size_t c = 0; c < k; ++c) {
      ConfusionCounts want;
      for (std::size_t i = 0; i < n; ++i) {
        bool g = false, p = false;
        for (int x : gold[i]) g |= x == static_cast<int>(c);
        for (int x : pred[i]) p |= x == static_cast<int>(c);
        (g ? (p ? want.tp : want.fn) : (p ? want.fp : want.tn)) += 1;
      }
      CHECK(counts[c] == want);
    }
  }
}

TEST_CASE("confusion: length mismatch throws") {
  std::vector<LabelSet> gold(3), pred(2);
  CHECK_THROWS_AS(confusion(gold, pred, 2), DataError);
}

TEST_CASE("f1 examples") {
  CHECK(f1(cc(0, 0, 0, 50)) == 1.0);
  CHECK(f1(cc(10, 5, 5, 0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(f1(cc(0, 3, 2, 10)) == 0.0);
}

TEST_CASE("k_measure examples") {
  CHECK(k_measure(cc(5, 0, 0, 7)) == 1.0);
  CHECK(k_measure(cc(1, 1, 1, 1)) == 0.0);
  CHECK(k_measure(cc(0, 2, 0, 8)) == doctest::Approx(0.6).epsilon(1e-12));
  // positive column empty
  CHECK(k_measure(cc(3, 0, 1, 0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k_measure(cc(0, 0, 0, 0)) == 0.0);
}

TEST_CASE("micro/macro aggregation examples") {
  const std::vector<ConfusionCounts> one{cc(3, 1, 2, 9)};
  const auto a = micro_macro_aggregate(one, Measure::F1);
  CHECK(a.micro == a.macro);
  CHECK(a.micro == f1(one[0]));

  const std::vector<ConfusionCounts> two{cc(10, 0, 0, 0), cc(0, 0, 0, 10)};
  const auto b = micro_macro_aggregate(two, Measure::F1);
  CHECK(b.micro == 1.0);
  CHECK(b.macro == 1.0);
}

TEST_CASE("metrics agree with the brute-force oracle on random tables") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 1 + gen() % 8;
    std::vector<ConfusionCounts> cs;
    std::vector<oracle::Counts> os;
    for (std::size_t c = 0; c < k; ++c) {
      // zero columns often enough to reach every branch
      auto draw = [&] { return gen() % 3 == 0 ? 0 : gen() % 10001; };
      cs.push_back(cc(draw(), draw(), draw(), draw()));
      os.push_back(oc(cs.back()));
    }
    for (std::size_t c = 0; c < k; ++c) {
      CHECK(std::fabs(f1(cs[c]) - oracle::f1(os[c])) <= 1e-12);
      CHECK(std::fabs(k_measure(cs[c]) - oracle::k_measure(os[c])) <= 1e-12);
      CHECK(f1(cs[c]) >= 0.0);
      CHECK(f1(cs[c]) <= 1.0);
      CHECK(k_measure(cs[c]) >= -1.0);
      CHECK(k_measure(cs[c]) <= 1.0);
    }
    const auto f = micro_macro_aggregate(cs, Measure::F1);
    const auto kk = micro_macro_aggregate(cs, Measure::K);
    const auto of = oracle::aggregate(os, oracle::f1);
    const auto ok = oracle::aggregate(os, oracle::k_measure);
    CHECK(std::fabs(f.micro - of.first) <= 1e-12);
    CHECK(std::fabs(f.macro - of.second) <= 1e-12);
    CHECK(std::fabs(kk.micro - ok.first) <= 1e-12);
    CHECK(std::fabs(kk.macro - ok.second) <= 1e-12);
  }
}

TEST_CASE("paired t-test degenerate rules") {
  // dyadic values so the shifted differences are exactly constant
  std::vector<double> a{0.125, 0.5, 0.25, 0.875, 0.375, 0.625, 0.75, 0.0625, 0.8125, 0.5625};
  CHECK(paired_ttest(a, a).p == 1.0);
  auto b = a;
  for (auto& x : b) x += 1.0;
  CHECK(paired_ttest(a, b).p == 0.0);
  std::vector<double> shorter(a.begin(), a.begin() + 3);
  CHECK_THROWS_AS(paired_ttest(a, shorter), DataError);
}

TEST_CASE("paired t-test matches quadrature and is symmetric") {
  const std::vector<double> a{0.61, 0.58, 0.66, 0.52, 0.60, 0.63, 0.57, 0.64, 0.59, 0.62};
  const std::vector<double> b{0.55, 0.57, 0.60, 0.50, 0.61, 0.58, 0.52, 0.60, 0.54, 0.59};
  const auto r = paired_ttest(a, b);
  CHECK(std::fabs(r.p - oracle::paired_t_p(a, b)) <= 1e-6);
  const auto s = paired_ttest(b, a);
  CHECK(s.t == doctest::Approx(-r.t).epsilon(1e-12));
  CHECK(s.p == doctest::Approx(r.p).epsilon(1e-12));
}

TEST_CASE("student t tail against quadrature") {
  for (double df : {1.0, 2.0, 4.0, 9.0, 30.0}) {
    for (double t : {0.0, 0.3, 1.0, 2.2, 5.0}) {
      CHECK(std::fabs(student_t_two_tailed(t, df) - oracle::t_two_tailed(t, df)) <= 1e-6);
    }
  }
}

TEST_CASE("pearson examples and invariances") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> y, z, w;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  CHECK(pearson(x, y).rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, z).rho == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> flat(6, 3.0);
  CHECK_THROWS_AS(pearson(x, flat), DataError);

  const std::vector<double> u{0.3, -1.2, 0.8, 2.0, 0.1, -0.4, 1.1};
  const std::vector<double> v{0.1, -0.7, 0.2, 1.4, 0.6, 0.0, 0.3};
  for (double s : u) w.push_back(3.5 * s - 2.0);
  const auto base = pearson(u, v);
  const auto moved = pearson(w, v);
  CHECK(moved.rho == doctest::Approx(base.rho).epsilon(1e-12));
  CHECK(moved.p == doctest::Approx(base.p).epsilon(1e-10));
  CHECK(std::fabs(base.p - oracle::pearson_p_from_r(oracle::correlation(u, v), u.size())) <= 1e-6);
}

TEST_CASE("mean and stddev") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(stddev(v) == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-12));
  const std::vector<double> one{3.0};
  CHECK(stddev(one) == 0.0);
}

TEST_CASE("eval report round-trips through json and csv") {
  std::vector<ConfusionCounts> counts{cc(4, 1, 2, 13), cc(0, 0, 0, 20), cc(1, 3, 0, 16)};
  RunInfo info{"fun_tat", "tat", "calib", "synthetic", 3, "de", 1.5, 0.25};
  const auto r = EvalReport::from_counts(counts, info);
  const auto back = eval_from_json(eval_to_json(r));
  CHECK(back.per_class == r.per_class);
  CHECK(back.f1_micro == r.f1_micro);
  CHECK(back.k_macro == r.k_macro);
  CHECK(back.info.language == "de");
  CHECK(eval_csv_header() ==
        "method,variant,mode,dataset,trial,language,f1_micro,f1_macro,k_micro,k_macro,train_seconds,test_seconds");
  const auto row = eval_csv_row(r);
  CHECK(row.rfind("fun_tat,tat,calib,synthetic,3,de,", 0) == 0);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "funnel/error.hpp"
#include "funnel/learn.hpp"
#include "funnel/random.hpp"
#include "oracles.hpp"

using namespace funnel;

namespace {

DenseMatrix random_dense(Rng& rng, std::size_t n, std::size_t d) {
  DenseMatrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  return x;
}

std::vector<SparseVector> random_sparse_rows(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<SparseVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<SparseEntry> e;
    for (int k = 0; k < 4; ++k) e.push_back({static_cast<std::uint32_t>(rng.below(d)), rng.uniform()});
    rows.push_back(make_sparse(e));
  }
  return rows;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = rng.uniform() < 0.4;
  y[0] = 1;
  y[1] = 0;
  return y;
}

// Central differences over every coordinate; max relative error.
template <typename Design>
double gradient_error(const Design& x, std::span<const int> y, double c, std::vector<double> p) {
  std::vector<double> g(p.size()), scratch(p.size());
  logistic_objective(x, y, c, p, g);
  double worst = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::fabs(p[j]));
    const double keep = p[j];
    p[j] = keep + h;
    const double up = logistic_objective(x, y, c, p, scratch);
    p[j] = keep - h;
    const double down = logistic_objective(x, y, c, p, scratch);
    p[j] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::fabs(fd - g[j]) / std::max(1.0, std::fabs(g[j])));
  }
  return worst;
}

}  // namespace

TEST_CASE("logistic gradient matches central differences") {
  Rng rng(21);
  const auto xd = random_dense(rng, 30, 5);
  const auto rows = random_sparse_rows(rng, 30, 12);
  const SparseMatrix xs(rows, 12);
  const auto y = random_labels(rng, 30);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> pd(6), ps(13);
    for (auto& v : pd) v = 2 * rng.normal();
    for (auto& v : ps) v = 2 * rng.normal();
    const double c = std::pow(10.0, rng.uniform() * 4 - 1);
    CHECK(gradient_error(xd, y, c, pd) <= 1e-5);
    CHECK(gradient_error(xs, y, c, ps) <= 1e-5);
  }
}

TEST_CASE("train_binary: separable toy set") {
  DenseMatrix x(2, 1);
  x(0, 0) = 1.0;
  x(1, 0) = -1.0;
  const std::vector<int> y{1, 0};
  const auto s = train_binary(x, y, TrainConfig{});
  CHECK(raw_score(s, x.row(0)) > 0.0);
  CHECK(raw_score(s, x.row(1)) < 0.0);
}

TEST_CASE("train_binary: heavy regularization shrinks weights") {
  Rng rng(2);
  const auto x = random_dense(rng, 40, 3);
  const auto y = random_labels(rng, 40);
  TrainConfig cfg;
  cfg.reg_strength = 1e-8;
  const auto s = train_binary(x, y, cfg);
  for (double w : s.weights) CHECK(std::fabs(w) < 1e-6);
  CHECK(raw_score(s, x.row(3)) == doctest::Approx(s.bias).epsilon(1e-6));
}

TEST_CASE("train_binary: objective never worse than zero start, gradient small") {
  Rng rng(5);
  const auto x = random_dense(rng, 60, 4);
  const auto y = random_labels(rng, 60);
  TrainConfig cfg;
  const auto s = train_binary(x, y, cfg);
  std::vector<double> p(s.weights);
  p.push_back(s.bias);
  std::vector<double> g(p.size()), zero(p.size(), 0.0), g0(p.size());
  const double f = logistic_objective(x, y, cfg.reg_strength, p, g);
  CHECK(f <= logistic_objective(x, y, cfg.reg_strength, zero, g0));
  double gn = 0;
  for (double v : g) gn += v * v;
  CHECK(std::sqrt(gn) <= 1e-5);
}

TEST_CASE("train_binary: errors") {
  DenseMatrix x(3, 1);
  const std::vector<int> same{1, 1, 1};
  CHECK_THROWS_AS(train_binary(x, same, TrainConfig{}), DataError);
  x(1, 0) = std::nan("");
  const std::vector<int> mixed{1, 0, 1};
  CHECK_THROWS_AS(train_binary(x, mixed, TrainConfig{}), DataError);
}

TEST_CASE("train_binary is bit-reproducible") {
  Rng rng(8);
  const auto rows = random_sparse_rows(rng, 50, 20);
  const SparseMatrix x(rows, 20);
  const auto y = random_labels(rng, 50);
  const auto a = train_binary(x, y, TrainConfig{});
  const auto b = train_binary(x, y, TrainConfig{});
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

TEST_CASE("raw_score examples") {
  const auto t = BinaryScorer::trivial_rejector(3);
  const std::vector<double> x{1.0, -2.0, 4.0};
  CHECK(raw_score(t, x) == 0.0);
  BinaryScorer z;
  z.weights.assign(3, 0.0);
  z.bias = 1.7;
  CHECK(raw_score(z, x) == 1.7);
  BinaryScorer w;
  w.weights = {0.5, 0.25, -1.0};
  w.bias = -0.3;
  CHECK(raw_score(w, std::vector<double>(3, 0.0)) == -0.3);
  CHECK(raw_score(BinaryScorer::constant_positive(3), x) == kConstantPositiveScore);
}

TEST_CASE("train_multilabel: trivial rejectors and constant positives") {
  Rng rng(4);
  const auto x = random_dense(rng, 12, 3);
  std::vector<LabelSet> labels;
  for (int i = 0; i < 12; ++i) labels.push_back(i % 2 ? LabelSet{0, 1} : LabelSet{1});
  const auto m = train_multilabel(x, labels, 3, TrainConfig{});
  REQUIRE(m.n_classes() == 3);
  CHECK(!m.scorers[0].is_trivial_rejector());
  CHECK(m.scorers[1].kind == ScorerKind::ConstantPositive);
  CHECK(m.scorers[2].is_trivial_rejector());
  for (std::size_t i = 0; i < 12; ++i) {
    const auto d = m.decide(x.row(i));
    CHECK(std::find(d.begin(), d.end(), 2) == d.end());
    CHECK(std::find(d.begin(), d.end(), 1) != d.end());
  }

  std::vector<LabelSet> full;
  for (int i = 0; i < 12; ++i) full.push_back(i % 3 == 0 ? LabelSet{0} : i % 3 == 1 ? LabelSet{1} : LabelSet{2});
  const auto all = train_multilabel(x, full, 3, TrainConfig{});
  for (const auto& s : all.scorers) CHECK(s.kind == ScorerKind::Linear);
}

TEST_CASE("kfold_split examples") {
  const auto ten = kfold_split(10, 10, 1);
  for (int f = 0; f < 10; ++f) CHECK(ten.members(f).size() == 1);

  const auto p = kfold_split(25, 10, 1);
  std::vector<std::size_t> sizes;
  for (int f = 0; f < 10; ++f) sizes.push_back(p.members(f).size());
  CHECK(std::count(sizes.begin(), sizes.end(), 3) == 5);
  CHECK(std::count(sizes.begin(), sizes.end(), 2) == 5);

  CHECK(kfold_split(25, 10, 7).assignment == kfold_split(25, 10, 7).assignment);
  CHECK_THROWS_AS(kfold_split(5, 1, 0), ConfigError);

  const auto small = kfold_split(3, 10, 2);
  CHECK(small.effective_folds == 3);
}

TEST_CASE("kfold_split invariants") {
  for (std::size_t n = 1; n < 60; n += 7) {
    for (int k : {2, 3, 5, 10}) {
      const auto p = kfold_split(n, k, n * 31 + k);
      std::set<std::size_t> seen;
      std::size_t lo = n, hi = 0;
      for (int f = 0; f < k; ++f) {
        const auto m = p.members(f);
        const auto c = p.complement(f);
        CHECK(m.size() + c.size() == n);
        for (auto i : m) CHECK(seen.insert(i).second);
        if (static_cast<int>(n) >= k || !m.empty()) {
          lo = std::min(lo, m.size());
          hi = std::max(hi, m.size());
        }
      }
      CHECK(seen.size() == n);
      if (static_cast<int>(n) >= k) CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("grid_search_reg examples") {
  Rng rng(6);
  const auto x = random_dense(rng, 40, 3);
  std::vector<LabelSet> labels;
  for (std::size_t i = 0; i < 40; ++i) labels.push_back(x(i, 0) > 0 ? LabelSet{0} : LabelSet{});
  const std::vector<double> one{3.0};
  CHECK(grid_search_reg(x, labels, 1, one, 5, TrainConfig{}) == 3.0);
  // a class nobody has: every candidate scores the same, smallest wins
  std::vector<LabelSet> none(40);
  const std::vector<double> two{10.0, 0.5};
  CHECK(grid_search_reg(x, none, 1, two, 5, TrainConfig{}) == 0.5);
  CHECK(kDefaultRegGrid == std::array<double, 6>{0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0});
}

TEST_CASE("random Fourier map approximates the RBF kernel") {
  Rng rng(13);
  std::vector<double> x(6);
  for (auto& v : x) v = rng.normal();
  const RandomFourierMap big(6, 2000, 0.5, 42);
  const auto z = big.apply(x);
  double self = 0;
  for (double v : z) self += v * v;
  CHECK(std::fabs(self - 1.0) <= 0.05);
  CHECK(RandomFourierMap(6, 2000, 0.5, 42).apply(x) == z);

  auto mean_error = [&](std::size_t d) {
    const RandomFourierMap m(6, d, 0.5, 99);
    Rng pr(77);
    double err = 0;
    for (int i = 0; i < 100; ++i) {
      std::vector<double> a(6), b(6);
      for (auto& v : a) v = 0.5 * pr.normal();
      for (auto& v : b) v = 0.5 * pr.normal();
      const auto za = m.apply(a), zb = m.apply(b);
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += za[k] * zb[k];
      err += std::fabs(dot - oracle::rbf(a, b, 0.5));
    }
    return err / 100;
  };
  CHECK(mean_error(2000) < mean_error(100));
  CHECK_THROWS_AS(RandomFourierMap(6, 10, 0.0, 1), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.tolerance = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

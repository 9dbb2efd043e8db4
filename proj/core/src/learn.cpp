#include "funnel/learn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>

#include "funnel/error.hpp"
#include "funnel/metrics.hpp"
#include "funnel/parallel.hpp"
#include "funnel/random.hpp"

namespace funnel {
namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename Design>
double objective_impl(const Design& x, std::span<const int> y, double reg_strength, std::span<const double> params,
                      std::span<double> grad) {
  const std::size_t d = x.cols();
  const auto w = params.first(d);
  const double b = params[d];
  std::fill(grad.begin(), grad.end(), 0.0);
  auto gw = grad.first(d);
  double value = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double margin = x.dot_row(i, w) + b;
    const double sign = y[i] != 0 ? 1.0 : -1.0;
    const double z = -sign * margin;
    value += softplus(z);
    const double coef = -sign * sigmoid(z);
    x.add_row(i, coef, gw);
    grad[d] += coef;
  }
  const double inv_c = 1.0 / reg_strength;
  value += 0.5 * inv_c * dot(w, w);
  for (std::size_t j = 0; j < d; ++j) gw[j] += inv_c * w[j];
  return value;
}

// Limited-memory BFGS with Armijo backtracking, started from the zero
// vector. Every accepted step decreases the objective.
template <typename Design>
BinaryScorer fit_logistic(const Design& x, std::span<const int> y, const TrainConfig& cfg,
                          const BinaryScorer* start = nullptr) {
  constexpr std::size_t kMemory = 10;
  constexpr double kArmijo = 1e-4;

  const std::size_t n = x.cols() + 1;
  std::vector<double> p(n, 0.0), g(n), p_new(n), g_new(n), dir(n);
  if (start != nullptr && start->kind == ScorerKind::Linear && start->weights.size() + 1 == n) {
    std::copy(start->weights.begin(), start->weights.end(), p.begin());
    p.back() = start->bias;
  }
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  double f = objective_impl(x, y, cfg.reg_strength, p, g);
  BinaryScorer out;
  out.converged = false;
  int iter = 0;
  int stalled = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    const double gnorm = std::sqrt(dot(g, g));
    if (gnorm <= cfg.tolerance) {
      out.converged = true;
      break;
    }

    // Two-loop recursion for dir = -H g.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    std::vector<double> alpha(s_hist.size());
    for (std::size_t m = s_hist.size(); m-- > 0;) {
      alpha[m] = rho_hist[m] * dot(s_hist[m], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[m] * y_hist[m][i];
    }
    if (!s_hist.empty()) {
      const auto& sl = s_hist.back();
      const auto& yl = y_hist.back();
      const double scale = dot(sl, yl) / dot(yl, yl);
      for (double& v : dir) v *= scale;
    }
    for (std::size_t m = 0; m < s_hist.size(); ++m) {
      const double beta = rho_hist[m] * dot(y_hist[m], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[m] - beta) * s_hist[m][i];
    }

    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = -gnorm * gnorm;
    }

    // Near the optimum the decrease can fall below the rounding noise of f;
    // there a step is taken when it shrinks the gradient instead.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    double step = s_hist.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < n; ++i) p_new[i] = p[i] + step * dir[i];
      f_new = objective_impl(x, y, cfg.reg_strength, p_new, g_new);
      if (std::isfinite(f_new)) {
        if (f_new <= f + kArmijo * step * slope) {
          accepted = true;
          break;
        }
        if (f_new - f <= noise && dot(g_new, g_new) < gnorm * gnorm) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    stalled = f - f_new <= noise ? stalled + 1 : 0;

    std::vector<double> s(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = p_new[i] - p[i];
      yv[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(yv, yv))) {
      if (s_hist.size() == kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }
    p.swap(p_new);
    g.swap(g_new);
    f = f_new;
    if (stalled >= 20) break;
  }
  if (!out.converged && std::sqrt(dot(g, g)) <= cfg.tolerance) out.converged = true;

  out.kind = ScorerKind::Linear;
  out.bias = p.back();
  p.pop_back();
  out.weights = std::move(p);
  out.iterations = iter;
  return out;
}

template <typename Design>
BinaryScorer train_binary_impl(const Design& x, std::span<const int> y, const TrainConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.size()) throw DataError("train_binary: design and label counts differ");
  if (y.empty()) throw DataError("train_binary: empty training set");
  std::size_t positives = 0;
  for (int v : y) positives += v != 0 ? 1 : 0;
  if (positives == 0 || positives == y.size()) {
    throw DataError("train_binary: labels contain a single class; use a trivial or constant scorer");
  }
  return fit_logistic(x, y, cfg);
}

void check_finite(const DenseMatrix& x) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("train_binary: non-finite feature value");
  }
}

template <typename Design>
MultilabelClassifier train_multilabel_impl(const Design& x, std::span<const LabelSet> labels, std::size_t n_classes,
                                           const TrainConfig& cfg, const MultilabelClassifier* start = nullptr) {
  cfg.validate();
  if (x.rows() != labels.size()) throw DataError("train_multilabel: design and label counts differ");
  MultilabelClassifier out;
  out.dimension = x.cols();
  out.scorers.resize(n_classes);
  parallel_for(n_classes, [&](std::size_t c) {
    const auto y = binary_labels(labels, c);
    const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (positives == 0) {
      out.scorers[c] = BinaryScorer::trivial_rejector(x.cols());
    } else if (positives == y.size()) {
      out.scorers[c] = BinaryScorer::constant_positive(x.cols());
    } else {
      out.scorers[c] = fit_logistic(x, y, cfg, start != nullptr ? &start->scorers[c] : nullptr);
    }
  });
  return out;
}

template <typename Design>
double grid_search_impl(const Design& x, std::span<const LabelSet> labels, std::size_t n_classes,
                        std::span<const double> grid, int folds, const TrainConfig& cfg) {
  if (grid.empty()) throw ConfigError("grid search needs at least one candidate");
  if (grid.size() == 1 || x.rows() < 2) return grid.front();
  const FoldPlan plan = kfold_split(x.rows(), folds, cfg.seed);

  std::vector<double> candidates(grid.begin(), grid.end());
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> total(candidates.size(), 0.0);
  int used = 0;
  for (int f = 0; f < plan.k; ++f) {
    const auto held = plan.members(f);
    if (held.empty()) continue;
    ++used;
    const auto kept = plan.complement(f);
    std::vector<LabelSet> kept_labels;
    kept_labels.reserve(kept.size());
    for (auto i : kept) kept_labels.push_back(labels[i]);
    const Design kept_x = x.select(kept);
    const Design held_x = x.select(held);
    std::vector<LabelSet> gold;
    for (auto i : held) gold.push_back(labels[i]);

    // Candidates in ascending order, each started from the previous solution.
    std::optional<MultilabelClassifier> previous;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      TrainConfig local = cfg;
      local.reg_strength = candidates[ci];
      auto model = train_multilabel_impl(kept_x, kept_labels, n_classes, local, previous ? &*previous : nullptr);

      std::vector<LabelSet> pred;
      for (std::size_t r = 0; r < held.size(); ++r) {
        LabelSet decided;
        for (std::size_t k = 0; k < n_classes; ++k) {
          const auto& s = model.scorers[k];
          double score = 0.0;
          if (s.kind == ScorerKind::ConstantPositive) {
            score = kConstantPositiveScore;
          } else if (s.kind == ScorerKind::Linear) {
            score = held_x.dot_row(r, s.weights) + s.bias;
          } else {
            continue;
          }
          if (score >= 0.0) decided.push_back(static_cast<int>(k));
        }
        pred.push_back(std::move(decided));
      }
      const auto counts = confusion(gold, pred, n_classes);
      total[ci] += micro_macro_aggregate(counts, Measure::F1).micro;
      previous = std::move(model);
    }
  }

  double best_value = candidates.front();
  double best_score = -1.0;
  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    const double score = used > 0 ? total[ci] / used : 0.0;
    if (score > best_score) {
      best_score = score;
      best_value = candidates[ci];
    }
  }
  return best_value;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(reg_strength > 0.0) || !std::isfinite(reg_strength)) throw ConfigError("reg_strength must be > 0");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

BinaryScorer BinaryScorer::trivial_rejector(std::size_t dimension) {
  BinaryScorer s;
  s.kind = ScorerKind::TrivialRejector;
  s.weights.assign(dimension, 0.0);
  return s;
}

BinaryScorer BinaryScorer::constant_positive(std::size_t dimension) {
  BinaryScorer s;
  s.kind = ScorerKind::ConstantPositive;
  s.weights.assign(dimension, 0.0);
  s.bias = kConstantPositiveScore;
  return s;
}

double raw_score(const BinaryScorer& s, const SparseVector& x) {
  switch (s.kind) {
    case ScorerKind::TrivialRejector:
      return 0.0;
    case ScorerKind::ConstantPositive:
      return kConstantPositiveScore;
    case ScorerKind::Linear:
      break;
  }
  return x.dot(s.weights) + s.bias;
}

double raw_score(const BinaryScorer& s, std::span<const double> x) {
  switch (s.kind) {
    case ScorerKind::TrivialRejector:
      return 0.0;
    case ScorerKind::ConstantPositive:
      return kConstantPositiveScore;
    case ScorerKind::Linear:
      break;
  }
  const std::size_t d = std::min(x.size(), s.weights.size());
  return dot(x.first(d), std::span<const double>(s.weights).first(d)) + s.bias;
}

double logistic_objective(const SparseMatrix& x, std::span<const int> y, double reg_strength,
                          std::span<const double> params, std::span<double> grad) {
  return objective_impl(x, y, reg_strength, params, grad);
}

double logistic_objective(const DenseMatrix& x, std::span<const int> y, double reg_strength,
                          std::span<const double> params, std::span<double> grad) {
  return objective_impl(x, y, reg_strength, params, grad);
}

BinaryScorer train_binary(const SparseMatrix& x, std::span<const int> y, const TrainConfig& cfg) {
  return train_binary_impl(x, y, cfg);
}

BinaryScorer train_binary(const DenseMatrix& x, std::span<const int> y, const TrainConfig& cfg) {
  check_finite(x);
  return train_binary_impl(x, y, cfg);
}

std::vector<double> MultilabelClassifier::scores(const SparseVector& x) const {
  std::vector<double> out(scorers.size());
  for (std::size_t c = 0; c < scorers.size(); ++c) out[c] = raw_score(scorers[c], x);
  return out;
}

std::vector<double> MultilabelClassifier::scores(std::span<const double> x) const {
  std::vector<double> out(scorers.size());
  for (std::size_t c = 0; c < scorers.size(); ++c) out[c] = raw_score(scorers[c], x);
  return out;
}

LabelSet MultilabelClassifier::decide(const SparseVector& x) const {
  LabelSet out;
  for (std::size_t c = 0; c < scorers.size(); ++c) {
    if (!scorers[c].is_trivial_rejector() && raw_score(scorers[c], x) >= 0.0) out.push_back(static_cast<int>(c));
  }
  return out;
}

LabelSet MultilabelClassifier::decide(std::span<const double> x) const {
  LabelSet out;
  for (std::size_t c = 0; c < scorers.size(); ++c) {
    if (!scorers[c].is_trivial_rejector() && raw_score(scorers[c], x) >= 0.0) out.push_back(static_cast<int>(c));
  }
  return out;
}

std::vector<int> binary_labels(std::span<const LabelSet> labels, std::size_t c) {
  std::vector<int> y(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = std::binary_search(labels[i].begin(), labels[i].end(), static_cast<int>(c)) ? 1 : 0;
  }
  return y;
}

MultilabelClassifier train_multilabel(const SparseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                                      const TrainConfig& cfg) {
  return train_multilabel_impl(x, labels, n_classes, cfg);
}

MultilabelClassifier train_multilabel(const DenseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                                      const TrainConfig& cfg) {
  check_finite(x);
  return train_multilabel_impl(x, labels, n_classes, cfg);
}

std::vector<std::size_t> FoldPlan::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2, got " + std::to_string(k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, stable_hash("kfold")));
  rng.shuffle(order);
  FoldPlan plan;
  plan.k = k;
  plan.effective_folds = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(k)));
  plan.assignment.resize(n);
  for (std::size_t pos = 0; pos < n; ++pos) plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return plan;
}

double grid_search_reg(const SparseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                       std::span<const double> grid, int folds, const TrainConfig& cfg) {
  return grid_search_impl(x, labels, n_classes, grid, folds, cfg);
}

double grid_search_reg(const DenseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                       std::span<const double> grid, int folds, const TrainConfig& cfg) {
  check_finite(x);
  return grid_search_impl(x, labels, n_classes, grid, folds, cfg);
}

RandomFourierMap::RandomFourierMap(std::size_t input_dim, std::size_t output_dim, double gamma, std::uint64_t seed)
    : input_dim_(input_dim), output_dim_(output_dim), gamma_(gamma), seed_(seed) {
  if (!(gamma > 0.0)) throw ConfigError("RBF feature map needs gamma > 0");
  if (output_dim < 1) throw ConfigError("RBF feature map needs at least one output dimension");
  Rng rng(derive_seed(seed, stable_hash("rff")));
  const double sd = std::sqrt(2.0 * gamma);
  w_.resize(output_dim * input_dim);
  for (auto& v : w_) v = sd * rng.normal();
  b_.resize(output_dim);
  for (auto& v : b_) v = 2.0 * std::numbers::pi * rng.uniform();
}

std::vector<double> RandomFourierMap::apply(std::span<const double> x) const {
  if (x.size() != input_dim_) {
    throw DataError("RBF feature map expects dimension " + std::to_string(input_dim_) + ", got " +
                    std::to_string(x.size()));
  }
  const double scale = std::sqrt(2.0 / static_cast<double>(output_dim_));
  std::vector<double> z(output_dim_);
  for (std::size_t r = 0; r < output_dim_; ++r) {
    const double* w = w_.data() + r * input_dim_;
    double a = b_[r];
    for (std::size_t c = 0; c < input_dim_; ++c) a += w[c] * x[c];
    z[r] = scale * std::cos(a);
  }
  return z;
}

DenseMatrix RandomFourierMap::apply(const DenseMatrix& x) const {
  DenseMatrix out(x.rows(), output_dim_);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto z = apply(x.row(r));
    std::copy(z.begin(), z.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace funnel

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "funnel/corpus.hpp"
#include "funnel/sparse.hpp"

namespace funnel {

struct TrainConfig {
  // Inverse regularization (the usual C): the penalty is ||w||^2 / (2 C).
  double reg_strength = 1.0;
  // Stop once the gradient norm drops to this value.
  double tolerance = 1e-6;
  int max_iterations = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class ScorerKind { Linear, TrivialRejector, ConstantPositive };

// Raw score emitted by a scorer trained without negative examples.
inline constexpr double kConstantPositiveScore = 10.0;

struct BinaryScorer {
  ScorerKind kind = ScorerKind::Linear;
  std::vector<double> weights;
  double bias = 0.0;
  // Optimizer diagnostics, not part of the model's behaviour.
  int iterations = 0;
  bool converged = true;

  bool is_trivial_rejector() const { return kind == ScorerKind::TrivialRejector; }

  static BinaryScorer trivial_rejector(std::size_t dimension);
  static BinaryScorer constant_positive(std::size_t dimension);
};

double raw_score(const BinaryScorer& s, const SparseVector& x);
double raw_score(const BinaryScorer& s, std::span<const double> x);

// Labels are 0/1. Throws DataError when only one class is present or a
// feature value is not finite.
BinaryScorer train_binary(const SparseMatrix& x, std::span<const int> y, const TrainConfig& cfg);
BinaryScorer train_binary(const DenseMatrix& x, std::span<const int> y, const TrainConfig& cfg);

// Regularized logistic objective over parameters [w..., b]; fills grad
// (same length as params) and returns the objective value. Exposed so the
// analytic gradient can be checked against finite differences.
double logistic_objective(const SparseMatrix& x, std::span<const int> y, double reg_strength,
                          std::span<const double> params, std::span<double> grad);
double logistic_objective(const DenseMatrix& x, std::span<const int> y, double reg_strength,
                          std::span<const double> params, std::span<double> grad);

struct MultilabelClassifier {
  std::vector<BinaryScorer> scorers;
  std::size_t dimension = 0;

  std::size_t n_classes() const { return scorers.size(); }
  std::vector<double> scores(const SparseVector& x) const;
  std::vector<double> scores(std::span<const double> x) const;
  // Positive iff raw score >= 0; trivial rejectors never fire.
  LabelSet decide(const SparseVector& x) const;
  LabelSet decide(std::span<const double> x) const;
};

std::vector<int> binary_labels(std::span<const LabelSet> labels, std::size_t c);

// One scorer per class. Classes without positives become trivial rejectors,
// classes without negatives become constant-positive scorers.
MultilabelClassifier train_multilabel(const SparseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                                      const TrainConfig& cfg);
MultilabelClassifier train_multilabel(const DenseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                                      const TrainConfig& cfg);

struct FoldPlan {
  int k = 0;
  // Folds that received at least one position (min(n, k)).
  int effective_folds = 0;
  std::vector<int> assignment;

  std::vector<std::size_t> members(int fold) const;
  std::vector<std::size_t> complement(int fold) const;
};

// Non-stratified split: a seeded permutation dealt round-robin into k folds,
// so fold sizes differ by at most one.
FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed);

inline constexpr std::array<double, 6> kDefaultRegGrid{0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0};

// Picks the grid value with the best mean out-of-fold micro-F1; ties go to
// the smallest value.
double grid_search_reg(const SparseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                       std::span<const double> grid, int folds, const TrainConfig& cfg);
double grid_search_reg(const DenseMatrix& x, std::span<const LabelSet> labels, std::size_t n_classes,
                       std::span<const double> grid, int folds, const TrainConfig& cfg);

// Random Fourier features: z(x) = sqrt(2/D) cos(Wx + b), rows of W drawn
// from N(0, 2*gamma I) and b uniform on [0, 2pi), so that z(x).z(y)
// approximates exp(-gamma ||x - y||^2).
class RandomFourierMap {
 public:
  RandomFourierMap() = default;
  RandomFourierMap(std::size_t input_dim, std::size_t output_dim, double gamma, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  double gamma() const { return gamma_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<double> apply(std::span<const double> x) const;
  DenseMatrix apply(const DenseMatrix& x) const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  double gamma_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<double> w_;  // output_dim x input_dim
  std::vector<double> b_;
};

}  // namespace funnel

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace funnel {

struct SparseEntry {
  std::uint32_t index = 0;
  double weight = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Document vector in a language-specific feature space. Indices are
// strictly increasing and weights finite; see validate().
struct SparseVector {
  std::vector<SparseEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  // Throws DataError when indices are not strictly increasing or a weight
  // is not finite.
  void validate() const;

  // Largest index + 1, or 0 for the empty vector.
  std::size_t span_dimension() const;

  double squared_norm() const;
  double dot(std::span<const double> dense) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

// Builds a vector from unordered (index, weight) pairs, summing duplicates.
SparseVector make_sparse(std::vector<SparseEntry> entries);

// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  // The first appended row fixes the column count of an empty matrix.
  void append_row(std::span<const double> values);
  DenseMatrix select(std::span<const std::size_t> rows) const;

  double dot_row(std::size_t r, std::span<const double> w) const;
  void add_row(std::size_t r, double coef, std::span<double> out) const;

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Compressed sparse row storage for a training design.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::span<const SparseVector> rows, std::size_t cols);

  std::size_t rows() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t cols() const { return cols_; }

  SparseMatrix select(std::span<const std::size_t> rows) const;

  double dot_row(std::size_t r, std::span<const double> w) const;
  void add_row(std::size_t r, double coef, std::span<double> out) const;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

}  // namespace funnel

#include "funnel/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "funnel/error.hpp"

namespace funnel {

void SparseVector::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i].weight)) {
      throw DataError("non-finite weight at feature " + std::to_string(entries[i].index));
    }
    if (i > 0 && entries[i].index <= entries[i - 1].index) {
      throw DataError("feature indices not strictly increasing at position " + std::to_string(i));
    }
  }
}

std::size_t SparseVector::span_dimension() const {
  return entries.empty() ? 0 : static_cast<std::size_t>(entries.back().index) + 1;
}

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight * e.weight;
  return s;
}

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& e : entries) {
    if (e.index < dense.size()) s += e.weight * dense[e.index];
  }
  return s;
}

SparseVector make_sparse(std::vector<SparseEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  SparseVector out;
  out.entries.reserve(entries.size());
  for (const auto& e : entries) {
    if (!out.entries.empty() && out.entries.back().index == e.index) {
      out.entries.back().weight += e.weight;
    } else {
      out.entries.push_back(e);
    }
  }
  return out;
}

void DenseMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw DataError("row width " + std::to_string(values.size()) + " does not match matrix width " +
                    std::to_string(cols_));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

DenseMatrix DenseMatrix::select(std::span<const std::size_t> rows) const {
  DenseMatrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

double DenseMatrix::dot_row(std::size_t r, std::span<const double> w) const {
  const double* x = data_.data() + r * cols_;
  // Four fixed partial sums; the summation order never depends on the
  // machine, so results stay reproducible.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t c = 0;
  for (; c + 4 <= cols_; c += 4) {
    s0 += x[c] * w[c];
    s1 += x[c + 1] * w[c + 1];
    s2 += x[c + 2] * w[c + 2];
    s3 += x[c + 3] * w[c + 3];
  }
  for (; c < cols_; ++c) s0 += x[c] * w[c];
  return (s0 + s1) + (s2 + s3);
}

void DenseMatrix::add_row(std::size_t r, double coef, std::span<double> out) const {
  const double* x = data_.data() + r * cols_;
  for (std::size_t c = 0; c < cols_; ++c) out[c] += coef * x[c];
}

SparseMatrix::SparseMatrix(std::span<const SparseVector> rows, std::size_t cols) : cols_(cols) {
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.size();
  offsets_.reserve(rows.size() + 1);
  indices_.reserve(nnz);
  values_.reserve(nnz);
  for (const auto& r : rows) {
    for (const auto& e : r.entries) {
      if (e.index >= cols) {
        throw DataError("feature index " + std::to_string(e.index) + " exceeds dimension " +
                        std::to_string(cols));
      }
      indices_.push_back(e.index);
      values_.push_back(e.weight);
    }
    offsets_.push_back(indices_.size());
  }
}

SparseMatrix SparseMatrix::select(std::span<const std::size_t> rows) const {
  SparseMatrix out;
  out.cols_ = cols_;
  for (std::size_t r : rows) {
    for (std::size_t p = offsets_[r]; p < offsets_[r + 1]; ++p) {
      out.indices_.push_back(indices_[p]);
      out.values_.push_back(values_[p]);
    }
    out.offsets_.push_back(out.indices_.size());
  }
  return out;
}

double SparseMatrix::dot_row(std::size_t r, std::span<const double> w) const {
  double s = 0.0;
  for (std::size_t p = offsets_[r]; p < offsets_[r + 1]; ++p) s += values_[p] * w[indices_[p]];
  return s;
}

void SparseMatrix::add_row(std::size_t r, double coef, std::span<double> out) const {
  for (std::size_t p = offsets_[r]; p < offsets_[r + 1]; ++p) out[indices_[p]] += coef * values_[p];
}

}  // namespace funnel

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kronadapt {

/// Dense column-major matrix of 64-bit reals.
///
/// Storage is a single contiguous buffer with entry (i, j) at data[i + j*rows].
/// Constructors taking external data reject non-finite entries and zero
/// dimensions; matrices built through zeros()/filled() skip the finiteness
/// scan since the fill value is checked once.
class DenseMatrix {
 public:
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix zeros(std::size_t rows, std::size_t cols);
  static DenseMatrix identity(std::size_t n);
  static DenseMatrix filled(std::size_t rows, std::size_t cols, double value);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i + j * rows_];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i + j * rows_];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  DenseMatrix(std::size_t rows, std::size_t cols);  // zero-filled, unchecked

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Dense vector of 64-bit reals. Entries must be finite on construction
/// from external data.
class DenseVector {
 public:
  explicit DenseVector(std::vector<double> data);

  static DenseVector zeros(std::size_t len);

  std::size_t len() const noexcept { return data_.size(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const DenseVector& a, const DenseVector& b) {
    return a.data_ == b.data_;
  }

 private:
  DenseVector(std::size_t len, int);  // zero-filled, unchecked

  std::vector<double> data_;
};

// Plain dense kernels. All of them validate conformability and throw
// DimensionMismatch otherwise.

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseVector matvec(const DenseMatrix& a, const DenseVector& x);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double s);
DenseVector add(const DenseVector& a, const DenseVector& b);
DenseVector subtract(const DenseVector& a, const DenseVector& b);

double dot(const DenseVector& a, const DenseVector& b);
double frobenius_norm(const DenseMatrix& a);
double max_abs(const DenseVector& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_diff(const DenseVector& a, const DenseVector& b);

/// Sum with a fixed pairwise tree reduction order. Used wherever a mean
/// must stay bit-reproducible independent of traversal strategy.
double pairwise_sum(std::span<const double> values);

/// Deterministic random source. Gaussian draws use an explicit Box-Muller
/// transform and uniforms a 53-bit mantissa fill, so sequences do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (two draws per pair, one cached).
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace kronadapt

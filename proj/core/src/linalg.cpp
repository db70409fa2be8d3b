// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "kronadapt/errors.hpp"

namespace kronadapt {

namespace {

bool finite_range(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows_ == 0 || cols_ == 0) {
    throw DimensionMismatch("DenseMatrix dimensions must be positive");
  }
  if (data_.size() != rows_ * cols_) {
    throw DimensionMismatch("DenseMatrix data length " +
                            std::to_string(data_.size()) + " != rows*cols " +
                            std::to_string(rows_ * cols_));
  }
  if (!finite_range(data_)) {
    throw NonFinite("DenseMatrix entries must be finite");
  }
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix DenseMatrix::zeros(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw DimensionMismatch("DenseMatrix dimensions must be positive");
  }
  return DenseMatrix(rows, cols);
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::filled(std::size_t rows, std::size_t cols,
                                double value) {
  if (!std::isfinite(value)) {
    throw NonFinite("DenseMatrix fill value must be finite");
  }
  DenseMatrix m = zeros(rows, cols);
  for (double& x : m.data_) x = value;
  return m;
}

bool DenseMatrix::all_finite() const noexcept { return finite_range(data_); }

DenseVector::DenseVector(std::vector<double> data) : data_(std::move(data)) {
  if (data_.empty()) {
    throw DimensionMismatch("DenseVector length must be positive");
  }
  if (!finite_range(data_)) {
    throw NonFinite("DenseVector entries must be finite");
  }
}

DenseVector::DenseVector(std::size_t len, int) : data_(len, 0.0) {}

DenseVector DenseVector::zeros(std::size_t len) {
  if (len == 0) {
    throw DimensionMismatch("DenseVector length must be positive");
  }
  return DenseVector(len, 0);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " * " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
  DenseMatrix c = DenseMatrix::zeros(a.rows(), b.cols());
  // Column-major friendly loop order: c[:,j] += a[:,k] * b[k,j].
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      for (std::size_t i = 0; i < a.rows(); ++i) {
        c(i, j) += a(i, k) * bkj;
      }
    }
  }
  return c;
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
  if (a.cols() != x.len()) {
    throw DimensionMismatch("matvec: matrix cols " + std::to_string(a.cols()) +
                            " != vector length " + std::to_string(x.len()));
  }
  DenseVector y = DenseVector::zeros(a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const double xj = x[j];
    for (std::size_t i = 0; i < a.rows(); ++i) {
      y[i] += a(i, j) * xj;
    }
  }
  return y;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t = DenseMatrix::zeros(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      t(j, i) = a(i, j);
    }
  }
  return t;
}

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shapes " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

}  // namespace

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix c = DenseMatrix::zeros(a.rows(), a.cols());
  auto ad = a.data(), bd = b.data();
  auto cd = c.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] * bd[i];
  return c;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix c = DenseMatrix::zeros(a.rows(), a.cols());
  auto ad = a.data(), bd = b.data();
  auto cd = c.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] + bd[i];
  return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "subtract");
  DenseMatrix c = DenseMatrix::zeros(a.rows(), a.cols());
  auto ad = a.data(), bd = b.data();
  auto cd = c.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] - bd[i];
  return c;
}

DenseMatrix scaled(const DenseMatrix& a, double s) {
  DenseMatrix c = DenseMatrix::zeros(a.rows(), a.cols());
  auto ad = a.data();
  auto cd = c.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] * s;
  return c;
}

DenseVector add(const DenseVector& a, const DenseVector& b) {
  if (a.len() != b.len()) throw DimensionMismatch("vector add: length mismatch");
  DenseVector c = DenseVector::zeros(a.len());
  for (std::size_t i = 0; i < a.len(); ++i) c[i] = a[i] + b[i];
  return c;
}

DenseVector subtract(const DenseVector& a, const DenseVector& b) {
  if (a.len() != b.len()) {
    throw DimensionMismatch("vector subtract: length mismatch");
  }
  DenseVector c = DenseVector::zeros(a.len());
  for (std::size_t i = 0; i < a.len(); ++i) c[i] = a[i] - b[i];
  return c;
}

double dot(const DenseVector& a, const DenseVector& b) {
  if (a.len() != b.len()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.len(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double max_abs(const DenseVector& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    m = std::max(m, std::abs(ad[i] - bd[i]));
  }
  return m;
}

double max_abs_diff(const DenseVector& a, const DenseVector& b) {
  if (a.len() != b.len()) {
    throw DimensionMismatch("max_abs_diff: length mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.len(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double x : values) s += x;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

// splitmix64; a full-period 64-bit mixer that is trivially reproducible.
Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller; reject u1 == 0 so the log stays finite.
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_below: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace kronadapt

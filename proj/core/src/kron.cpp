// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/kron.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>
#include <string>

#include "kronadapt/errors.hpp"

namespace kronadapt {

DenseVector vec(const DenseMatrix& m) {
  // Column-major storage already is the stacked-columns layout.
  return DenseVector(std::vector<double>(m.data().begin(), m.data().end()));
}

DenseMatrix unvec(const DenseVector& v, std::size_t rows, std::size_t cols) {
  if (v.len() != rows * cols) {
    throw DimensionMismatch("unvec: vector length " + std::to_string(v.len()) +
                            " != " + std::to_string(rows) + "*" +
                            std::to_string(cols));
  }
  return DenseMatrix(rows, cols,
                     std::vector<double>(v.data().begin(), v.data().end()));
}

DenseMatrix kron_materialize(const DenseMatrix& a, const DenseMatrix& b,
                             std::size_t element_budget) {
  const std::size_t out_rows = a.rows() * b.rows();
  const std::size_t out_cols = a.cols() * b.cols();
  // Multiply in wide integers so the guard itself cannot overflow.
  const unsigned __int128 elements =
      static_cast<unsigned __int128>(out_rows) * out_cols;
  if (elements > element_budget) {
    throw SizeOverflow("kron_materialize: " + std::to_string(out_rows) + "x" +
                       std::to_string(out_cols) + " exceeds element budget " +
                       std::to_string(element_budget));
  }
  DenseMatrix out = DenseMatrix::zeros(out_rows, out_cols);
  for (std::size_t ja = 0; ja < a.cols(); ++ja) {
    for (std::size_t ia = 0; ia < a.rows(); ++ia) {
      const double aij = a(ia, ja);
      for (std::size_t jb = 0; jb < b.cols(); ++jb) {
        for (std::size_t ib = 0; ib < b.rows(); ++ib) {
          out(ia * b.rows() + ib, ja * b.cols() + jb) = aij * b(ib, jb);
        }
      }
    }
  }
  return out;
}

DenseVector kron_matvec(const DenseMatrix& a, const DenseMatrix& b,
                        const DenseVector& x, MatvecCounters* counters) {
  const std::size_t a1 = a.rows(), a2 = a.cols();
  const std::size_t b1 = b.rows(), b2 = b.cols();
  if (x.len() != a2 * b2) {
    throw DimensionMismatch("kron_matvec: x length " + std::to_string(x.len()) +
                            " != a2*b2 = " + std::to_string(a2 * b2));
  }

  // x reinterpreted as the b2 x a2 matrix X (column-major stacking is free),
  // then result = vec(B * (X * A^T)).
  std::vector<double> xa(b2 * a1, 0.0);  // X * A^T, b2 x a1
  auto xd = x.data();
  for (std::size_t i = 0; i < a1; ++i) {
    for (std::size_t j = 0; j < a2; ++j) {
      const double aij = a(i, j);
      for (std::size_t k = 0; k < b2; ++k) {
        xa[k + i * b2] += xd[k + j * b2] * aij;
      }
    }
  }

  std::vector<double> out(b1 * a1, 0.0);  // B * (X A^T), b1 x a1
  for (std::size_t i = 0; i < a1; ++i) {
    for (std::size_t k = 0; k < b2; ++k) {
      const double v = xa[k + i * b2];
      for (std::size_t r = 0; r < b1; ++r) {
        out[r + i * b1] += b(r, k) * v;
      }
    }
  }

  if (counters != nullptr) {
    counters->multiply_adds += static_cast<std::uint64_t>(a1) * a2 * b2 +
                               static_cast<std::uint64_t>(a1) * b1 * b2;
    counters->workspace_elements += b2 * a1 + b1 * a1;
  }
  // vec of the b1 x a1 result is its column-major buffer.
  return DenseVector(std::move(out));
}

DenseVector matvec_counted(const DenseMatrix& a, const DenseVector& x,
                           MatvecCounters* counters) {
  DenseVector y = matvec(a, x);
  if (counters != nullptr) {
    counters->multiply_adds +=
        static_cast<std::uint64_t>(a.rows()) * a.cols();
    counters->workspace_elements += a.rows();
  }
  return y;
}

int numerical_rank(const DenseMatrix& m, double tol) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("numerical_rank: tol must be positive");
  }
  Eigen::Map<const Eigen::MatrixXd> mapped(
      m.data().data(), static_cast<Eigen::Index>(m.rows()),
      static_cast<Eigen::Index>(m.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mapped);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double sigma_max = sv(0);
  if (sigma_max == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol * sigma_max) ++rank;
  }
  return rank;
}

}  // namespace kronadapt

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "kronadapt/linalg.hpp"

namespace kronadapt {

/// Default cap on materialized Kronecker products, in elements. The dense
/// product exists as an oracle for tests and small layers only; anything
/// bigger should go through kron_matvec.
inline constexpr std::size_t kDefaultElementBudget = std::size_t{1} << 26;

/// Column-major flattening: out[i + j*rows] = m(i, j).
DenseVector vec(const DenseMatrix& m);

/// Inverse of vec. Requires v.len == rows*cols; throws DimensionMismatch
/// otherwise.
DenseMatrix unvec(const DenseVector& v, std::size_t rows, std::size_t cols);

/// Dense Kronecker product: block (i, j) of the result is a(i, j) * b.
/// Output shape (a.rows*b.rows) x (a.cols*b.cols). Throws SizeOverflow when
/// the output would exceed element_budget elements.
DenseMatrix kron_materialize(const DenseMatrix& a, const DenseMatrix& b,
                             std::size_t element_budget = kDefaultElementBudget);

/// Instrumentation for the structured/materialized matvec comparison.
struct MatvecCounters {
  std::uint64_t multiply_adds = 0;
  std::uint64_t workspace_elements = 0;
};

/// Computes (a (x) b) x without materializing the Kronecker product, via
/// the reshape identity: stack the columns of b * unvec(x) * a^T. The two
/// small products cost a1*a2*b2 + a1*b1*b2 multiply-adds against
/// a1*b1*a2*b2 for the dense route.
DenseVector kron_matvec(const DenseMatrix& a, const DenseMatrix& b,
                        const DenseVector& x,
                        MatvecCounters* counters = nullptr);

/// Dense matvec twin that fills the same counters, for side-by-side cost
/// accounting in benchmarks and tests.
DenseVector matvec_counted(const DenseMatrix& a, const DenseVector& x,
                           MatvecCounters* counters);

/// Number of singular values greater than tol * sigma_max; 0 for the zero
/// matrix. Requires tol > 0.
int numerical_rank(const DenseMatrix& m, double tol);

}  // namespace kronadapt

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "kronadapt/errors.hpp"
#include "kronadapt/kron.hpp"
#include "test_util.hpp"

using namespace kronadapt;
using testutil::random_matrix;
using testutil::random_rank_r;
using testutil::random_vector;

namespace {

double relative_gap(const DenseVector& got, const DenseVector& want) {
  return max_abs_diff(got, want) / (1.0 + max_abs(want));
}

}  // namespace

TEST_CASE("vec stacks columns") {
  const DenseMatrix m(2, 2, {1, 3, 2, 4});  // [[1,2],[3,4]]
  CHECK(vec(m) == DenseVector({1, 3, 2, 4}));
  CHECK(vec(DenseMatrix(1, 1, {5})) == DenseVector({5}));
  CHECK(vec(DenseMatrix::zeros(3, 2)) == DenseVector::zeros(6));
}

TEST_CASE("unvec inverts vec") {
  const DenseMatrix m = unvec(DenseVector({1, 3, 2, 4}), 2, 2);
  CHECK(m(0, 0) == 1);
  CHECK(m(0, 1) == 2);
  CHECK(m(1, 0) == 3);
  CHECK(m(1, 1) == 4);
  CHECK(unvec(DenseVector({7}), 1, 1)(0, 0) == 7);
  CHECK_THROWS_AS(unvec(DenseVector({1, 2, 3, 4, 5}), 2, 2),
                  DimensionMismatch);
}

TEST_CASE("unvec(vec(M)) == M exactly on random matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.next_below(9);
    const std::size_t c = 1 + rng.next_below(9);
    const DenseMatrix m = random_matrix(rng, r, c);
    CHECK(unvec(vec(m), r, c) == m);
  }
}

TEST_CASE("kron_materialize block structure") {
  const DenseMatrix a(2, 2, {1, 3, 2, 4});  // [[1,2],[3,4]]
  const DenseMatrix expected(
      4, 4, {1, 0, 3, 0, 0, 1, 0, 3, 2, 0, 4, 0, 0, 2, 0, 4});
  CHECK(kron_materialize(a, DenseMatrix::identity(2)) == expected);

  Rng rng(3);
  const DenseMatrix b = random_matrix(rng, 3, 4);
  CHECK(kron_materialize(DenseMatrix(1, 1, {1}), b) == b);

  CHECK(kron_materialize(DenseMatrix(1, 1, {2}),
                         DenseMatrix::filled(2, 2, 1.0)) ==
        DenseMatrix::filled(2, 2, 2.0));
}

TEST_CASE("kron_materialize enforces the element budget") {
  Rng rng(5);
  const DenseMatrix a = random_matrix(rng, 8, 8);
  const DenseMatrix b = random_matrix(rng, 8, 8);
  CHECK_THROWS_AS(kron_materialize(a, b, 4095), SizeOverflow);
  CHECK_NOTHROW(kron_materialize(a, b, 4096));
}

TEST_CASE("kron_matvec on identity and permutation factors") {
  const DenseVector x({1, 2, 3, 4});
  const DenseMatrix eye = DenseMatrix::identity(2);
  CHECK(kron_matvec(eye, eye, x) == x);

  const DenseMatrix swap(2, 2, {0, 1, 1, 0});  // [[0,1],[1,0]]
  CHECK(kron_matvec(swap, eye, x) == DenseVector({3, 4, 1, 2}));

  CHECK_THROWS_AS(kron_matvec(swap, eye, DenseVector({1, 2, 3})),
                  DimensionMismatch);
}

TEST_CASE("kron_matvec matches the materialized oracle") {
  Rng rng(17);
  const DenseMatrix a = random_matrix(rng, 3, 4);
  const DenseMatrix b = random_matrix(rng, 2, 5);
  const DenseVector x = random_vector(rng, 20);
  const DenseVector want = matvec(kron_materialize(a, b), x);
  CHECK(relative_gap(kron_matvec(a, b, x), want) <= 1e-10);

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t a1 = 1 + rng.next_below(6);
    const std::size_t a2 = 1 + rng.next_below(6);
    const std::size_t b1 = 1 + rng.next_below(6);
    const std::size_t b2 = 1 + rng.next_below(6);
    const DenseMatrix fa = random_matrix(rng, a1, a2);
    const DenseMatrix fb = random_matrix(rng, b1, b2);
    const DenseVector fx = random_vector(rng, a2 * b2);
    const DenseVector oracle = matvec(kron_materialize(fa, fb), fx);
    CHECK(relative_gap(kron_matvec(fa, fb, fx), oracle) <= 1e-10);
  }
}

TEST_CASE("mixed product identity (A(x)B)(C(x)D) = (AC)(x)(BD)") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix a = random_matrix(rng, 2, 3);
    const DenseMatrix b = random_matrix(rng, 3, 2);
    const DenseMatrix c = random_matrix(rng, 3, 2);
    const DenseMatrix d = random_matrix(rng, 2, 3);
    const DenseMatrix lhs =
        matmul(kron_materialize(a, b), kron_materialize(c, d));
    const DenseMatrix rhs = kron_materialize(matmul(a, c), matmul(b, d));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
  }
}

TEST_CASE("numerical_rank basics") {
  CHECK(numerical_rank(DenseMatrix::zeros(4, 4), 1e-9) == 0);
  CHECK(numerical_rank(DenseMatrix::identity(3), 1e-9) == 3);

  Rng rng(31);
  const DenseMatrix rank1 = random_rank_r(rng, 5, 7, 1);
  CHECK(numerical_rank(rank1, 1e-9) == 1);
}

TEST_CASE("Kronecker rank is multiplicative") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + rng.next_below(4);
    const std::size_t s = 1 + rng.next_below(4);
    const DenseMatrix a = random_rank_r(rng, 5, 6, r);
    const DenseMatrix b = random_rank_r(rng, 4, 5, s);
    CHECK(numerical_rank(kron_materialize(a, b), 1e-9) ==
          static_cast<int>(r * s));
  }
}

TEST_CASE("composition rank is the min of factor ranks") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + rng.next_below(4);
    const std::size_t s = 1 + rng.next_below(4);
    const DenseMatrix a = random_rank_r(rng, 6, 6, r);
    const DenseMatrix b = random_rank_r(rng, 6, 6, s);
    CHECK(numerical_rank(matmul(a, b), 1e-9) ==
          static_cast<int>(std::min(r, s)));
  }
}

TEST_CASE("structured matvec cost accounting") {
  Rng rng(43);
  const DenseMatrix a = random_matrix(rng, 2, 3);
  const DenseMatrix b = random_matrix(rng, 4, 5);
  const DenseVector x = random_vector(rng, 15);

  MatvecCounters structured;
  kron_matvec(a, b, x, &structured);
  CHECK(structured.multiply_adds == 2 * 3 * 5 + 2 * 4 * 5);  // a1a2b2 + a1b1b2

  MatvecCounters dense;
  matvec_counted(kron_materialize(a, b), x, &dense);
  CHECK(dense.multiply_adds == (2 * 4) * (3 * 5));  // a1b1 * a2b2
  CHECK(structured.multiply_adds < dense.multiply_adds);
}

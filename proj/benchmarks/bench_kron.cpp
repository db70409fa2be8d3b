// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structured vs materialized Kronecker matvec, and adapter forward passes
// at matched parameter budgets.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "kronadapt/adapters.hpp"
#include "kronadapt/kron.hpp"
#include "kronadapt/linalg.hpp"

namespace {

using namespace kronadapt;

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  DenseMatrix m = DenseMatrix::zeros(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

DenseVector random_vector(Rng& rng, std::size_t len) {
  DenseVector v = DenseVector::zeros(len);
  for (double& x : v.data()) x = rng.normal();
  return v;
}

void BM_StructuredMatvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const DenseMatrix a = random_matrix(rng, n, n);
  const DenseMatrix b = random_matrix(rng, n, n);
  const DenseVector x = random_vector(rng, n * n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kron_matvec(a, b, x));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StructuredMatvec)->RangeMultiplier(2)->Range(4, 64);

void BM_MaterializedMatvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const DenseMatrix a = random_matrix(rng, n, n);
  const DenseMatrix b = random_matrix(rng, n, n);
  const DenseVector x = random_vector(rng, n * n);
  const DenseMatrix w = kron_materialize(a, b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matvec(w, x));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MaterializedMatvec)->RangeMultiplier(2)->Range(4, 64);

void BM_KronMaterialize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const DenseMatrix a = random_matrix(rng, n, n);
  const DenseMatrix b = random_matrix(rng, n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kron_materialize(a, b));
  }
}
BENCHMARK(BM_KronMaterialize)->RangeMultiplier(2)->Range(4, 32);

void BM_AdapterForwardKronA(benchmark::State& state) {
  const auto dim = static_cast<std::int64_t>(state.range(0));
  AdapterSpec spec;
  spec.family = AdapterFamily::krona;
  spec.d = spec.h = dim;
  spec.a1 = spec.a2 = 4;
  spec.init.up = UpInit::same;
  spec.seed = 2;
  const AdapterState adapter = build_adapter(spec);

  Rng rng(3);
  const DenseMatrix w0 = random_matrix(rng, dim, dim);
  const DenseVector b0 = random_vector(rng, dim);
  const DenseVector x = random_vector(rng, dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adapter_forward(adapter, w0, b0, x));
  }
}
BENCHMARK(BM_AdapterForwardKronA)->RangeMultiplier(2)->Range(16, 64);

void BM_AdapterForwardLoRA(benchmark::State& state) {
  const auto dim = static_cast<std::int64_t>(state.range(0));
  AdapterSpec spec;
  spec.family = AdapterFamily::lora;
  spec.d = spec.h = dim;
  spec.rank = 4;
  spec.init.up = UpInit::same;
  spec.seed = 2;
  const AdapterState adapter = build_adapter(spec);

  Rng rng(3);
  const DenseMatrix w0 = random_matrix(rng, dim, dim);
  const DenseVector b0 = random_vector(rng, dim);
  const DenseVector x = random_vector(rng, dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adapter_forward(adapter, w0, b0, x));
  }
}
BENCHMARK(BM_AdapterForwardLoRA)->RangeMultiplier(2)->Range(16, 64);

}  // namespace

BENCHMARK_MAIN();

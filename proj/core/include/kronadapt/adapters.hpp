// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kronadapt/linalg.hpp"
#include "kronadapt/manifest.hpp"

namespace kronadapt {

enum class AdapterFamily { krona, lora, lokr, loha };

const char* to_string(AdapterFamily f);
AdapterFamily adapter_family_from_string(const std::string& s);

/// Distribution used for the down factor(s). The up factor is either zeroed
/// (the default; leaves the adapted layer exactly equal to the base layer at
/// initialization) or drawn from the same distribution.
enum class DownInit { normal_s1, normal_s2, kaiming_uniform, xavier_uniform };
enum class UpInit { zero, same };

const char* to_string(DownInit d);
const char* to_string(UpInit u);
DownInit down_init_from_string(const std::string& s);
UpInit up_init_from_string(const std::string& s);

struct InitScheme {
  DownInit down = DownInit::normal_s1;
  UpInit up = UpInit::zero;
};

/// Kronecker adapter: delta = scale * (A (x) B) with A in R^{a1 x a2},
/// B in R^{b1 x b2}, a1*b1 = d and a2*b2 = h. Trainable parameter count is
/// a1*a2 + b1*b2.
struct KronAdapterState {
  std::int64_t a1, a2, b1, b2;
  DenseMatrix A;
  DenseMatrix B;
  double scale = 1.0;
};

/// Low-rank adapter: delta = scale * (A * B), A in R^{d x r}, B in R^{r x h}.
struct LoRAAdapterState {
  std::int64_t r;
  DenseMatrix A;
  DenseMatrix B;
  double scale = 1.0;
};

/// Kronecker-with-inner-low-rank: delta = scale * (A (x) (B * C)), or
/// scale * (A (x) B) when the second block is kept dense (C absent).
struct LoKrAdapterState {
  DenseMatrix A;                  // left factor, shapes from lokr_factorization
  DenseMatrix B;                  // second block, or its left low-rank half
  std::optional<DenseMatrix> C;   // right low-rank half when decomposed
  double scale = 1.0;
};

/// Hadamard-of-low-rank: delta = scale * ((A*B) .* (C*D)).
struct LoHAAdapterState {
  DenseMatrix A;  // d x r
  DenseMatrix B;  // r x h
  DenseMatrix C;  // d x r
  DenseMatrix D;  // r x h
  double scale = 1.0;
};

using AdapterState = std::variant<KronAdapterState, LoRAAdapterState,
                                  LoKrAdapterState, LoHAAdapterState>;

/// Inner rank used for a decomposed LoKr second block when the spec leaves
/// rank unset (clamped to the block's smaller dimension).
inline constexpr std::int64_t kLoKrDefaultRank = 8;

/// Construction recipe for one adapter. The host layer maps x in R^h to R^d
/// through W x with W in R^{d x h}.
struct AdapterSpec {
  AdapterFamily family = AdapterFamily::krona;
  std::int64_t d = 0;
  std::int64_t h = 0;
  std::int64_t a1 = 0;      // krona factor rows; must divide d
  std::int64_t a2 = 0;      // krona factor cols; must divide h
  std::int64_t rank = 0;    // lora/loha rank; lokr inner rank (0 = default)
  std::int64_t factor = -1; // lokr factorization knob
  bool lokr_decompose = true;  // false keeps the second block dense
  InitScheme init;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

AdapterFamily family_of(const AdapterState& state);
std::int64_t adapter_out_dim(const AdapterState& state);
std::int64_t adapter_in_dim(const AdapterState& state);

/// Builds an adapter from its spec. Deterministic for a given seed.
/// Throws InvalidFactorization when a1 does not divide d or a2 does not
/// divide h (krona), InvalidRank when rank > min(d, h).
AdapterState build_adapter(const AdapterSpec& spec);

/// Assembles the full d x h update. For the Kronecker family this
/// materializes the product and is meant for merging, auditing, and tests;
/// the forward pass does not use it.
DenseMatrix delta_weight(const AdapterState& state);

/// f(x) = W0 x + delta x + b0. For the Kronecker family the delta term goes
/// through the structured matvec, never the materialized product.
DenseVector adapter_forward(const AdapterState& state, const DenseMatrix& w0,
                            const DenseVector& b0, const DenseVector& x);

/// W0 + delta_weight(state). After merging, a plain affine layer reproduces
/// adapter_forward.
DenseMatrix merge_adapter(const AdapterState& state, const DenseMatrix& w0);

/// Exact count of trainable scalars for the spec.
std::int64_t param_count(const AdapterSpec& spec);

/// Sum of param_count across manifest layers, with the spec template's d/h
/// replaced per layer. InvalidFactorization carries the offending layer name.
std::int64_t manifest_param_count(const LayerManifest& manifest,
                                  const AdapterSpec& tmpl);

/// Splits dim into a pair (m, n), m <= n, m*n a divisor-pair of dim chasing
/// the given factor; factor = -1 walks divisors toward the most balanced
/// split. Mirrors the published reference routine exactly, including the
/// once-set length bound.
std::pair<std::int64_t, std::int64_t> lokr_factorization(std::int64_t dim,
                                                         std::int64_t factor);

/// Effective inner rank of a LoKr spec's second block: 0 when the block
/// stays dense, otherwise the requested rank or the clamped default.
std::int64_t lokr_inner_rank(const AdapterSpec& spec);

/// All (a1, a2) with a1 | d and a2 | h, sorted by the parameter count of a
/// single d x h layer ascending, then by a1, then a2.
std::vector<std::pair<std::int64_t, std::int64_t>> enumerate_factor_pairs(
    std::int64_t d, std::int64_t h);

/// Relative Frobenius change ||after - before||_F / ||before||_F.
/// Throws ZeroBaseNorm when before is all zeros.
double module_delta(const DenseMatrix& before, const DenseMatrix& after);

/// Named relative change of one layer.
struct ModuleDelta {
  std::string layer_name;
  double delta = 0.0;
};

}  // namespace kronadapt

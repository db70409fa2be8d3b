// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <stdexcept>

#include "kronadapt/errors.hpp"
#include "kronadapt/kron.hpp"

namespace kronadapt {

const char* to_string(AdapterFamily f) {
  switch (f) {
    case AdapterFamily::krona: return "krona";
    case AdapterFamily::lora: return "lora";
    case AdapterFamily::lokr: return "lokr";
    case AdapterFamily::loha: return "loha";
  }
  return "krona";
}

AdapterFamily adapter_family_from_string(const std::string& s) {
  if (s == "krona") return AdapterFamily::krona;
  if (s == "lora") return AdapterFamily::lora;
  if (s == "lokr") return AdapterFamily::lokr;
  if (s == "loha") return AdapterFamily::loha;
  throw ParseError("unknown adapter family '" + s + "'");
}

const char* to_string(DownInit d) {
  switch (d) {
    case DownInit::normal_s1: return "normal_s1";
    case DownInit::normal_s2: return "normal_s2";
    case DownInit::kaiming_uniform: return "kaiming_uniform";
    case DownInit::xavier_uniform: return "xavier_uniform";
  }
  return "normal_s1";
}

const char* to_string(UpInit u) {
  return u == UpInit::zero ? "up_zero" : "up_same";
}

DownInit down_init_from_string(const std::string& s) {
  if (s == "normal_s1") return DownInit::normal_s1;
  if (s == "normal_s2") return DownInit::normal_s2;
  if (s == "kaiming_uniform") return DownInit::kaiming_uniform;
  if (s == "xavier_uniform") return DownInit::xavier_uniform;
  throw ParseError("unknown init scheme '" + s + "'");
}

UpInit up_init_from_string(const std::string& s) {
  if (s == "up_zero") return UpInit::zero;
  if (s == "up_same") return UpInit::same;
  throw ParseError("unknown up-init mode '" + s + "'");
}

namespace {

void validate_layer_dims(const AdapterSpec& spec) {
  if (spec.d < 1 || spec.h < 1) {
    throw NonPositiveDim("adapter spec requires d >= 1 and h >= 1");
  }
}

void warn_normal_s2_once(std::int64_t d, std::int64_t h) {
  static std::once_flag flag;
  std::call_once(flag, [&] {
    std::cerr << "kronadapt: warning: normal_s2 draws with stddev sqrt(min(d,h)) = "
              << std::sqrt(static_cast<double>(std::min(d, h)))
              << ", far larger than fan-in scalings; intended for ablation runs only\n";
  });
}

/// Fills a rows x cols factor from the chosen distribution. fan_in = cols,
/// fan_out = rows; normal_s1 uses stddev 1/fan_in, which reduces to the
/// 1/a2 scaling on the Kronecker down factor.
DenseMatrix draw_factor(Rng& rng, std::int64_t rows, std::int64_t cols,
                        DownInit dist, std::int64_t d, std::int64_t h) {
  const double fan_in = static_cast<double>(cols);
  const double fan_out = static_cast<double>(rows);
  DenseMatrix m = DenseMatrix::zeros(static_cast<std::size_t>(rows),
                                     static_cast<std::size_t>(cols));
  auto data = m.data();
  switch (dist) {
    case DownInit::normal_s1: {
      const double stddev = 1.0 / fan_in;
      for (double& x : data) x = rng.normal(0.0, stddev);
      break;
    }
    case DownInit::normal_s2: {
      warn_normal_s2_once(d, h);
      const double stddev = std::sqrt(static_cast<double>(std::min(d, h)));
      for (double& x : data) x = rng.normal(0.0, stddev);
      break;
    }
    case DownInit::kaiming_uniform: {
      const double bound = std::sqrt(6.0 / fan_in);
      for (double& x : data) x = rng.uniform(-bound, bound);
      break;
    }
    case DownInit::xavier_uniform: {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& x : data) x = rng.uniform(-bound, bound);
      break;
    }
  }
  return m;
}

DenseMatrix make_up_factor(Rng& rng, std::int64_t rows, std::int64_t cols,
                           const InitScheme& init, std::int64_t d,
                           std::int64_t h) {
  if (init.up == UpInit::zero) {
    return DenseMatrix::zeros(static_cast<std::size_t>(rows),
                              static_cast<std::size_t>(cols));
  }
  return draw_factor(rng, rows, cols, init.down, d, h);
}

void validate_krona(const AdapterSpec& spec) {
  if (spec.a1 < 1 || spec.a2 < 1) {
    throw InvalidFactorization("krona factors a1, a2 must be positive");
  }
  if (spec.d % spec.a1 != 0) {
    throw InvalidFactorization("a1 = " + std::to_string(spec.a1) +
                               " does not divide d = " +
                               std::to_string(spec.d));
  }
  if (spec.h % spec.a2 != 0) {
    throw InvalidFactorization("a2 = " + std::to_string(spec.a2) +
                               " does not divide h = " +
                               std::to_string(spec.h));
  }
}

void validate_rank(std::int64_t rank, std::int64_t d, std::int64_t h) {
  if (rank < 1) throw InvalidRank("rank must be positive");
  if (rank > std::min(d, h)) {
    throw InvalidRank("rank " + std::to_string(rank) + " exceeds min(d, h) = " +
                      std::to_string(std::min(d, h)));
  }
}

struct LoKrShape {
  std::int64_t d1, d2;  // left/second block rows, d1 <= d2, d1*d2 = d
  std::int64_t h1, h2;  // left/second block cols, h1 <= h2, h1*h2 = h
  std::int64_t rank;    // inner rank of the second block, 0 when dense
};

LoKrShape lokr_shape(const AdapterSpec& spec) {
  const auto [d1, d2] = lokr_factorization(spec.d, spec.factor);
  const auto [h1, h2] = lokr_factorization(spec.h, spec.factor);
  if (!spec.lokr_decompose) return {d1, d2, h1, h2, 0};
  if (spec.rank < 0) throw InvalidRank("lokr inner rank must be >= 0");
  const std::int64_t rank =
      spec.rank > 0 ? spec.rank
                    : std::min(kLoKrDefaultRank, std::min(d2, h2));
  if (rank > std::min(d2, h2)) {
    throw InvalidRank("lokr inner rank " + std::to_string(rank) +
                      " exceeds second-block min dim " +
                      std::to_string(std::min(d2, h2)));
  }
  return {d1, d2, h1, h2, rank};
}

}  // namespace

AdapterFamily family_of(const AdapterState& state) {
  return std::visit(
      [](const auto& s) -> AdapterFamily {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          return AdapterFamily::krona;
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          return AdapterFamily::lora;
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          return AdapterFamily::lokr;
        } else {
          return AdapterFamily::loha;
        }
      },
      state);
}

std::int64_t adapter_out_dim(const AdapterState& state) {
  return std::visit(
      [](const auto& s) -> std::int64_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          return s.a1 * s.b1;
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          return static_cast<std::int64_t>(s.A.rows());
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          return static_cast<std::int64_t>(s.A.rows() * s.B.rows());
        } else {
          return static_cast<std::int64_t>(s.A.rows());
        }
      },
      state);
}

std::int64_t adapter_in_dim(const AdapterState& state) {
  return std::visit(
      [](const auto& s) -> std::int64_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          return s.a2 * s.b2;
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          return static_cast<std::int64_t>(s.B.cols());
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          const std::size_t block_cols =
              s.C.has_value() ? s.C->cols() : s.B.cols();
          return static_cast<std::int64_t>(s.A.cols() * block_cols);
        } else {
          return static_cast<std::int64_t>(s.B.cols());
        }
      },
      state);
}

AdapterState build_adapter(const AdapterSpec& spec) {
  validate_layer_dims(spec);
  Rng rng(spec.seed);
  switch (spec.family) {
    case AdapterFamily::krona: {
      validate_krona(spec);
      const std::int64_t b1 = spec.d / spec.a1;
      const std::int64_t b2 = spec.h / spec.a2;
      DenseMatrix a =
          draw_factor(rng, spec.a1, spec.a2, spec.init.down, spec.d, spec.h);
      DenseMatrix b = make_up_factor(rng, b1, b2, spec.init, spec.d, spec.h);
      return KronAdapterState{spec.a1, spec.a2, b1, b2,
                              std::move(a), std::move(b), spec.scale};
    }
    case AdapterFamily::lora: {
      validate_rank(spec.rank, spec.d, spec.h);
      DenseMatrix a =
          draw_factor(rng, spec.d, spec.rank, spec.init.down, spec.d, spec.h);
      DenseMatrix b =
          make_up_factor(rng, spec.rank, spec.h, spec.init, spec.d, spec.h);
      return LoRAAdapterState{spec.rank, std::move(a), std::move(b),
                              spec.scale};
    }
    case AdapterFamily::lokr: {
      const LoKrShape s = lokr_shape(spec);
      DenseMatrix a =
          draw_factor(rng, s.d1, s.h1, spec.init.down, spec.d, spec.h);
      if (s.rank > 0) {
        DenseMatrix b =
            draw_factor(rng, s.d2, s.rank, spec.init.down, spec.d, spec.h);
        DenseMatrix c =
            make_up_factor(rng, s.rank, s.h2, spec.init, spec.d, spec.h);
        return LoKrAdapterState{std::move(a), std::move(b), std::move(c),
                                spec.scale};
      }
      DenseMatrix b = make_up_factor(rng, s.d2, s.h2, spec.init, spec.d, spec.h);
      return LoKrAdapterState{std::move(a), std::move(b), std::nullopt,
                              spec.scale};
    }
    case AdapterFamily::loha: {
      validate_rank(spec.rank, spec.d, spec.h);
      DenseMatrix a =
          draw_factor(rng, spec.d, spec.rank, spec.init.down, spec.d, spec.h);
      DenseMatrix b =
          make_up_factor(rng, spec.rank, spec.h, spec.init, spec.d, spec.h);
      DenseMatrix c =
          draw_factor(rng, spec.d, spec.rank, spec.init.down, spec.d, spec.h);
      DenseMatrix d =
          make_up_factor(rng, spec.rank, spec.h, spec.init, spec.d, spec.h);
      return LoHAAdapterState{std::move(a), std::move(b), std::move(c),
                              std::move(d), spec.scale};
    }
  }
  throw std::logic_error("unreachable adapter family");
}

DenseMatrix delta_weight(const AdapterState& state) {
  return std::visit(
      [](const auto& s) -> DenseMatrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          return scaled(kron_materialize(s.A, s.B), s.scale);
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          return scaled(matmul(s.A, s.B), s.scale);
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          const DenseMatrix block =
              s.C.has_value() ? matmul(s.B, *s.C) : s.B;
          return scaled(kron_materialize(s.A, block), s.scale);
        } else {
          return scaled(hadamard(matmul(s.A, s.B), matmul(s.C, s.D)), s.scale);
        }
      },
      state);
}

DenseVector adapter_forward(const AdapterState& state, const DenseMatrix& w0,
                            const DenseVector& b0, const DenseVector& x) {
  const std::int64_t d = adapter_out_dim(state);
  const std::int64_t h = adapter_in_dim(state);
  if (static_cast<std::int64_t>(w0.rows()) != d ||
      static_cast<std::int64_t>(w0.cols()) != h) {
    throw DimensionMismatch("adapter_forward: base weight is " +
                            std::to_string(w0.rows()) + "x" +
                            std::to_string(w0.cols()) + ", adapter expects " +
                            std::to_string(d) + "x" + std::to_string(h));
  }
  if (static_cast<std::int64_t>(x.len()) != h ||
      static_cast<std::int64_t>(b0.len()) != d) {
    throw DimensionMismatch("adapter_forward: input/bias length mismatch");
  }

  DenseVector delta_x = std::visit(
      [&](const auto& s) -> DenseVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          return kron_matvec(s.A, s.B, x);
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          return matvec(s.A, matvec(s.B, x));
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          const DenseMatrix block =
              s.C.has_value() ? matmul(s.B, *s.C) : s.B;
          return kron_matvec(s.A, block, x);
        } else {
          // Hadamard structure has no matvec shortcut; assemble the rows.
          return matvec(hadamard(matmul(s.A, s.B), matmul(s.C, s.D)), x);
        }
      },
      state);

  const double scale =
      std::visit([](const auto& s) { return s.scale; }, state);
  DenseVector y = matvec(w0, x);
  for (std::size_t i = 0; i < y.len(); ++i) {
    y[i] += scale * delta_x[i] + b0[i];
  }
  return y;
}

DenseMatrix merge_adapter(const AdapterState& state, const DenseMatrix& w0) {
  const std::int64_t d = adapter_out_dim(state);
  const std::int64_t h = adapter_in_dim(state);
  if (static_cast<std::int64_t>(w0.rows()) != d ||
      static_cast<std::int64_t>(w0.cols()) != h) {
    throw DimensionMismatch("merge_adapter: base weight shape mismatch");
  }
  return add(w0, delta_weight(state));
}

std::int64_t param_count(const AdapterSpec& spec) {
  validate_layer_dims(spec);
  switch (spec.family) {
    case AdapterFamily::krona: {
      validate_krona(spec);
      return spec.a1 * spec.a2 + (spec.d / spec.a1) * (spec.h / spec.a2);
    }
    case AdapterFamily::lora:
      validate_rank(spec.rank, spec.d, spec.h);
      return spec.rank * (spec.d + spec.h);
    case AdapterFamily::lokr: {
      const LoKrShape s = lokr_shape(spec);
      const std::int64_t block =
          s.rank > 0 ? s.d2 * s.rank + s.rank * s.h2 : s.d2 * s.h2;
      return s.d1 * s.h1 + block;
    }
    case AdapterFamily::loha:
      validate_rank(spec.rank, spec.d, spec.h);
      return 2 * spec.rank * (spec.d + spec.h);
  }
  throw std::logic_error("unreachable adapter family");
}

std::int64_t manifest_param_count(const LayerManifest& manifest,
                                  const AdapterSpec& tmpl) {
  manifest.validate();
  std::int64_t total = 0;
  for (const LayerEntry& layer : manifest.layers) {
    AdapterSpec spec = tmpl;
    spec.d = layer.d;
    spec.h = layer.h;
    try {
      total += param_count(spec);
    } catch (const InvalidFactorization& e) {
      throw InvalidFactorization(
          std::string(e.what()) + " (layer '" + layer.layer_name + "')",
          layer.layer_name);
    }
  }
  return total;
}

std::int64_t lokr_inner_rank(const AdapterSpec& spec) {
  return lokr_shape(spec).rank;
}

std::pair<std::int64_t, std::int64_t> lokr_factorization(std::int64_t dim,
                                                         std::int64_t factor) {
  if (dim < 1) throw std::invalid_argument("lokr_factorization: dim must be >= 1");
  // Faithful port of the reference routine; the search state, the once-set
  // length bound, and the final ordering swap are all preserved.
  if (factor > 0 && dim % factor == 0) {
    std::int64_t m = factor;
    std::int64_t n = dim / factor;
    if (m > n) std::swap(m, n);
    return {m, n};
  }
  if (factor < 0) factor = dim;
  std::int64_t m = 1;
  std::int64_t n = dim;
  const std::int64_t length = m + n;
  while (m < n) {
    std::int64_t new_m = m + 1;
    while (dim % new_m != 0) ++new_m;
    const std::int64_t new_n = dim / new_m;
    if (new_m + new_n > length || new_m > factor) {
      break;
    }
    m = new_m;
    n = new_n;
  }
  if (m > n) std::swap(m, n);
  return {m, n};
}

std::vector<std::pair<std::int64_t, std::int64_t>> enumerate_factor_pairs(
    std::int64_t d, std::int64_t h) {
  std::vector<std::int64_t> d_divs, h_divs;
  for (std::int64_t a = 1; a <= d; ++a) {
    if (d % a == 0) d_divs.push_back(a);
  }
  for (std::int64_t a = 1; a <= h; ++a) {
    if (h % a == 0) h_divs.push_back(a);
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  pairs.reserve(d_divs.size() * h_divs.size());
  for (std::int64_t a1 : d_divs) {
    for (std::int64_t a2 : h_divs) {
      pairs.emplace_back(a1, a2);
    }
  }
  auto cost = [d, h](const std::pair<std::int64_t, std::int64_t>& p) {
    return p.first * p.second + (d / p.first) * (h / p.second);
  };
  std::sort(pairs.begin(), pairs.end(),
            [&](const auto& lhs, const auto& rhs) {
              const std::int64_t cl = cost(lhs), cr = cost(rhs);
              if (cl != cr) return cl < cr;
              if (lhs.first != rhs.first) return lhs.first < rhs.first;
              return lhs.second < rhs.second;
            });
  return pairs;
}

double module_delta(const DenseMatrix& before, const DenseMatrix& after) {
  const double base = frobenius_norm(before);
  const DenseMatrix diff = subtract(after, before);
  if (base == 0.0) {
    throw ZeroBaseNorm("module_delta: baseline parameters are all zero");
  }
  return frobenius_norm(diff) / base;
}

}  // namespace kronadapt

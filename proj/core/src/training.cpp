// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/training.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "kronadapt/errors.hpp"
#include "kronadapt/kron.hpp"

namespace kronadapt {

namespace {

DenseVector row_of(const DenseMatrix& m, std::size_t i) {
  DenseVector r = DenseVector::zeros(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) r[j] = m(i, j);
  return r;
}

void set_row(DenseMatrix& m, std::size_t i, const DenseVector& r) {
  for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = r[j];
}

DenseMatrix outer(const DenseVector& u, const DenseVector& v) {
  DenseMatrix m = DenseMatrix::zeros(u.len(), v.len());
  for (std::size_t j = 0; j < v.len(); ++j) {
    for (std::size_t i = 0; i < u.len(); ++i) {
      m(i, j) = u[i] * v[j];
    }
  }
  return m;
}

/// Applies W0 + delta to every row of X (as column vectors).
DenseMatrix project_rows(const DenseMatrix& w0, const AdapterState& adapter,
                         const DenseMatrix& x) {
  const DenseVector zero_bias = DenseVector::zeros(w0.rows());
  DenseMatrix out = DenseMatrix::zeros(x.rows(), w0.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    set_row(out, i, adapter_forward(adapter, w0, zero_bias, row_of(x, i)));
  }
  return out;
}

void softmax_rows_inplace(DenseMatrix& s) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double row_max = s(i, 0);
    for (std::size_t j = 1; j < s.cols(); ++j) {
      row_max = std::max(row_max, s(i, j));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const double e = std::exp(s(i, j) - row_max);
      s(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < s.cols(); ++j) s(i, j) /= sum;
  }
}

struct AttentionCache {
  DenseMatrix tokens, q, k, v, probs, context, out;
};

AttentionCache attention_forward_cached(const ToyAttentionModel& model,
                                        const DenseMatrix& tokens) {
  if (tokens.cols() != model.dim) {
    throw DimensionMismatch("attention_forward: token width " +
                            std::to_string(tokens.cols()) + " != model dim " +
                            std::to_string(model.dim));
  }
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(model.dim));
  DenseMatrix q = project_rows(model.base_weight(AttnSite::Q),
                               model.adapter(AttnSite::Q), tokens);
  DenseMatrix k = project_rows(model.base_weight(AttnSite::K),
                               model.adapter(AttnSite::K), tokens);
  DenseMatrix v = project_rows(model.base_weight(AttnSite::V),
                               model.adapter(AttnSite::V), tokens);
  DenseMatrix probs = scaled(matmul(q, transpose(k)), inv_sqrt_dim);
  softmax_rows_inplace(probs);
  DenseMatrix context = matmul(probs, v);
  DenseMatrix out = project_rows(model.base_weight(AttnSite::O),
                                 model.adapter(AttnSite::O), context);
  return {tokens, std::move(q), std::move(k), std::move(v), std::move(probs),
          std::move(context), std::move(out)};
}

}  // namespace

const char* to_string(AttnSite site) {
  switch (site) {
    case AttnSite::Q: return "Q";
    case AttnSite::K: return "K";
    case AttnSite::V: return "V";
    case AttnSite::O: return "O";
  }
  return "?";
}

ToyAttentionModel make_toy_attention_model(std::size_t dim,
                                           const AdapterSpec& adapter_spec,
                                           std::uint64_t base_seed) {
  if (dim == 0) throw DimensionMismatch("model dim must be positive");
  Rng rng(base_seed);
  // Tokens are z + c + timestep embedding, roughly variance 3 per channel;
  // this scaling keeps attention logits O(1) so the softmax stays soft.
  const double stddev = 1.0 / std::sqrt(3.0 * static_cast<double>(dim));
  auto random_weight = [&] {
    DenseMatrix w = DenseMatrix::zeros(dim, dim);
    for (double& x : w.data()) x = rng.normal(0.0, stddev);
    return w;
  };

  AdapterSpec spec = adapter_spec;
  spec.d = static_cast<std::int64_t>(dim);
  spec.h = static_cast<std::int64_t>(dim);
  auto site_adapter = [&](std::size_t site) {
    AdapterSpec site_spec = spec;
    site_spec.seed = spec.seed + site;
    return build_adapter(site_spec);
  };

  return ToyAttentionModel{
      dim,
      {random_weight(), random_weight(), random_weight(), random_weight()},
      {site_adapter(0), site_adapter(1), site_adapter(2), site_adapter(3)}};
}

DenseMatrix attention_forward(const ToyAttentionModel& model,
                              const DenseMatrix& tokens) {
  return attention_forward_cached(model, tokens).out;
}

void DenoiseBatch::validate() const {
  const std::size_t n = z.rows();
  if (eps.rows() != n || c.rows() != n || t.size() != n || w.size() != n) {
    throw DimensionMismatch("DenoiseBatch arrays disagree on batch size");
  }
  if (eps.cols() != z.cols() || c.cols() != z.cols()) {
    throw DimensionMismatch("DenoiseBatch arrays disagree on width");
  }
  for (double wi : w) {
    if (!(wi > 0.0)) {
      throw std::invalid_argument("DenoiseBatch weights must be positive");
    }
  }
}

DenseVector timestep_embedding(int t, std::size_t dim) {
  DenseVector e = DenseVector::zeros(dim);
  const std::size_t half = dim / 2;
  for (std::size_t j = 0; j < half; ++j) {
    const double freq =
        std::pow(10000.0, -2.0 * static_cast<double>(j) /
                              static_cast<double>(dim));
    e[2 * j] = std::sin(t * freq);
    e[2 * j + 1] = std::cos(t * freq);
  }
  if (dim % 2 == 1) {
    const double freq =
        std::pow(10000.0, -2.0 * static_cast<double>(half) /
                              static_cast<double>(dim));
    e[dim - 1] = std::sin(t * freq);
  }
  return e;
}

namespace {

DenseMatrix conditioned_tokens(const DenoiseBatch& batch, std::size_t dim) {
  DenseMatrix tokens = DenseMatrix::zeros(batch.batch_size(), dim);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const DenseVector emb = timestep_embedding(batch.t[i], dim);
    for (std::size_t j = 0; j < dim; ++j) {
      tokens(i, j) = batch.z(i, j) + batch.c(i, j) + emb[j];
    }
  }
  return tokens;
}

double weighted_loss(const DenseMatrix& pred, const DenoiseBatch& batch) {
  if (!pred.all_finite()) {
    throw NonFinite("denoise_loss: forward pass produced NaN/Inf");
  }
  std::vector<double> per_sample(batch.batch_size());
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      const double r = pred(i, j) - batch.eps(i, j);
      sq += r * r;
    }
    per_sample[i] = batch.w[i] * sq;
  }
  return pairwise_sum(per_sample) / static_cast<double>(batch.batch_size());
}

}  // namespace

DenseMatrix denoiser_forward(const ToyAttentionModel& model,
                             const DenoiseBatch& batch) {
  batch.validate();
  if (batch.z.cols() != model.dim) {
    throw DimensionMismatch("denoiser_forward: batch width != model dim");
  }
  return attention_forward(model, conditioned_tokens(batch, model.dim));
}

double denoise_loss(const ToyAttentionModel& model, const DenoiseBatch& batch) {
  return weighted_loss(denoiser_forward(model, batch), batch);
}

std::vector<DenseMatrix*> trainable_factors(AdapterState& state) {
  return std::visit(
      [](auto& s) -> std::vector<DenseMatrix*> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState> ||
                      std::is_same_v<T, LoRAAdapterState>) {
          return {&s.A, &s.B};
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          if (s.C.has_value()) return {&s.A, &s.B, &*s.C};
          return {&s.A, &s.B};
        } else {
          return {&s.A, &s.B, &s.C, &s.D};
        }
      },
      state);
}

std::vector<const DenseMatrix*> trainable_factors(const AdapterState& state) {
  auto mut = trainable_factors(const_cast<AdapterState&>(state));
  return {mut.begin(), mut.end()};
}

std::vector<std::string> factor_names(const AdapterState& state) {
  switch (family_of(state)) {
    case AdapterFamily::krona:
    case AdapterFamily::lora:
      return {"A", "B"};
    case AdapterFamily::lokr:
      return trainable_factors(state).size() == 3
                 ? std::vector<std::string>{"A", "B", "C"}
                 : std::vector<std::string>{"A", "B"};
    case AdapterFamily::loha:
      return {"A", "B", "C", "D"};
  }
  return {};
}

namespace {

/// Kronecker factor gradients from the reshaped views of x and upstream:
/// with U = unvec(upstream, rows(B), rows(A)) and X = unvec(x, cols(B),
/// cols(A)), dA = scale * U^T B X and dB = scale * U A X^T.
void kron_factor_gradients(const DenseMatrix& a, const DenseMatrix& b,
                           double scale, const DenseVector& x,
                           const DenseVector& upstream, DenseMatrix& da,
                           DenseMatrix& db) {
  const DenseMatrix u_mat = unvec(upstream, b.rows(), a.rows());
  const DenseMatrix x_mat = unvec(x, b.cols(), a.cols());
  da = scaled(matmul(transpose(u_mat), matmul(b, x_mat)), scale);
  db = scaled(matmul(u_mat, matmul(a, transpose(x_mat))), scale);
}

}  // namespace

std::vector<DenseMatrix> adapter_gradients(const AdapterState& state,
                                           const DenseVector& x,
                                           const DenseVector& upstream) {
  if (static_cast<std::int64_t>(x.len()) != adapter_in_dim(state) ||
      static_cast<std::int64_t>(upstream.len()) != adapter_out_dim(state)) {
    throw DimensionMismatch("adapter_gradients: x/upstream length mismatch");
  }
  return std::visit(
      [&](const auto& s) -> std::vector<DenseMatrix> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          DenseMatrix da = DenseMatrix::zeros(1, 1), db = da;
          kron_factor_gradients(s.A, s.B, s.scale, x, upstream, da, db);
          return {std::move(da), std::move(db)};
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          // y = scale * A (B x); dA = scale * u (Bx)^T, dB = scale * (A^T u) x^T.
          const DenseVector bx = matvec(s.B, x);
          const DenseVector atu = matvec(transpose(s.A), upstream);
          return {scaled(outer(upstream, bx), s.scale),
                  scaled(outer(atu, x), s.scale)};
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          const DenseMatrix block = s.C.has_value() ? matmul(s.B, *s.C) : s.B;
          DenseMatrix da = DenseMatrix::zeros(1, 1), dblock = da;
          kron_factor_gradients(s.A, block, s.scale, x, upstream, da, dblock);
          if (!s.C.has_value()) return {std::move(da), std::move(dblock)};
          DenseMatrix db = matmul(dblock, transpose(*s.C));
          DenseMatrix dc = matmul(transpose(s.B), dblock);
          return {std::move(da), std::move(db), std::move(dc)};
        } else {
          // y = scale * ((A B) .* (C D)) x.
          const DenseMatrix p = matmul(s.A, s.B);
          const DenseMatrix q = matmul(s.C, s.D);
          const DenseMatrix g = scaled(outer(upstream, x), s.scale);
          const DenseMatrix dp = hadamard(g, q);
          const DenseMatrix dq = hadamard(g, p);
          return {matmul(dp, transpose(s.B)), matmul(transpose(s.A), dp),
                  matmul(dq, transpose(s.D)), matmul(transpose(s.C), dq)};
        }
      },
      state);
}

DenseVector delta_transpose_matvec(const AdapterState& state,
                                   const DenseVector& v) {
  if (static_cast<std::int64_t>(v.len()) != adapter_out_dim(state)) {
    throw DimensionMismatch("delta_transpose_matvec: length mismatch");
  }
  return std::visit(
      [&](const auto& s) -> DenseVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KronAdapterState>) {
          DenseVector y = kron_matvec(transpose(s.A), transpose(s.B), v);
          for (std::size_t i = 0; i < y.len(); ++i) y[i] *= s.scale;
          return y;
        } else if constexpr (std::is_same_v<T, LoRAAdapterState>) {
          DenseVector y = matvec(transpose(s.B), matvec(transpose(s.A), v));
          for (std::size_t i = 0; i < y.len(); ++i) y[i] *= s.scale;
          return y;
        } else if constexpr (std::is_same_v<T, LoKrAdapterState>) {
          const DenseMatrix block = s.C.has_value() ? matmul(s.B, *s.C) : s.B;
          DenseVector y = kron_matvec(transpose(s.A), transpose(block), v);
          for (std::size_t i = 0; i < y.len(); ++i) y[i] *= s.scale;
          return y;
        } else {
          const DenseMatrix delta =
              hadamard(matmul(s.A, s.B), matmul(s.C, s.D));
          DenseVector y = matvec(transpose(delta), v);
          for (std::size_t i = 0; i < y.len(); ++i) y[i] *= s.scale;
          return y;
        }
      },
      state);
}

std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> params, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("finite_diff_gradient: step must be positive");
  }
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + step;
    const double up = loss(p);
    p[i] = saved - step;
    const double down = loss(p);
    p[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ParseError("unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

namespace {

struct SiteGradients {
  std::array<std::vector<DenseMatrix>, 4> by_site;
};

void accumulate(std::vector<DenseMatrix>& acc, std::vector<DenseMatrix> g) {
  if (acc.empty()) {
    acc = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = add(acc[i], g[i]);
}

/// Backpropagates the weighted squared-error loss through one attention pass
/// into per-site adapter factor gradients.
SiteGradients backward(const ToyAttentionModel& model,
                       const AttentionCache& cache, const DenoiseBatch& batch) {
  const std::size_t n = cache.tokens.rows();
  const std::size_t dim = model.dim;
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(dim));
  const double inv_n = 1.0 / static_cast<double>(n);

  DenseMatrix d_out = DenseMatrix::zeros(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      d_out(i, j) = 2.0 * batch.w[i] * inv_n *
                    (cache.out(i, j) - batch.eps(i, j));
    }
  }

  // Through the O projection: row-wise d_context = W_O_eff^T d_out.
  const DenseMatrix& w_o = model.base_weight(AttnSite::O);
  const AdapterState& ad_o = model.adapter(AttnSite::O);
  DenseMatrix d_context = DenseMatrix::zeros(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const DenseVector g = row_of(d_out, i);
    DenseVector back = matvec(transpose(w_o), g);
    const DenseVector structured = delta_transpose_matvec(ad_o, g);
    for (std::size_t j = 0; j < dim; ++j) back[j] += structured[j];
    set_row(d_context, i, back);
  }

  // Attention mixing: context = probs * V.
  DenseMatrix d_probs = matmul(d_context, transpose(cache.v));
  DenseMatrix d_v = matmul(transpose(cache.probs), d_context);

  // Row-wise softmax backward: ds = p .* (dp - <dp, p>).
  DenseMatrix d_scores = DenseMatrix::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot_dp_p = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dot_dp_p += d_probs(i, j) * cache.probs(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) {
      d_scores(i, j) = cache.probs(i, j) * (d_probs(i, j) - dot_dp_p);
    }
  }

  DenseMatrix d_q = scaled(matmul(d_scores, cache.k), inv_sqrt_dim);
  DenseMatrix d_k = scaled(matmul(transpose(d_scores), cache.q), inv_sqrt_dim);

  SiteGradients grads;
  auto accumulate_site = [&](AttnSite site, const DenseMatrix& upstream_rows,
                             const DenseMatrix& input_rows) {
    auto& acc = grads.by_site[static_cast<std::size_t>(site)];
    const AdapterState& adapter = model.adapter(site);
    for (std::size_t i = 0; i < n; ++i) {
      accumulate(acc, adapter_gradients(adapter, row_of(input_rows, i),
                                        row_of(upstream_rows, i)));
    }
  };
  accumulate_site(AttnSite::Q, d_q, cache.tokens);
  accumulate_site(AttnSite::K, d_k, cache.tokens);
  accumulate_site(AttnSite::V, d_v, cache.tokens);
  accumulate_site(AttnSite::O, d_out, cache.context);
  return grads;
}

struct AdamSlot {
  std::vector<double> m, v;
};

}  // namespace

TrainHistory train(ToyAttentionModel& model, const DataGenerator& generator,
                   const TrainConfig& config) {
  config.validate();

  std::array<DenseMatrix, 4> merged_before = {
      merge_adapter(model.adapter(AttnSite::Q), model.base_weight(AttnSite::Q)),
      merge_adapter(model.adapter(AttnSite::K), model.base_weight(AttnSite::K)),
      merge_adapter(model.adapter(AttnSite::V), model.base_weight(AttnSite::V)),
      merge_adapter(model.adapter(AttnSite::O), model.base_weight(AttnSite::O))};

  // Adam slots per site, per factor.
  std::array<std::vector<AdamSlot>, 4> adam;
  for (std::size_t site = 0; site < 4; ++site) {
    for (DenseMatrix* f : trainable_factors(model.adapters[site])) {
      adam[site].push_back(
          {std::vector<double>(f->size(), 0.0),
           std::vector<double>(f->size(), 0.0)});
    }
  }

  TrainHistory history;
  history.loss.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    const DenoiseBatch batch = generator(step);
    batch.validate();

    std::optional<AttentionCache> cache;
    double loss = 0.0;
    try {
      cache.emplace(
          attention_forward_cached(model, conditioned_tokens(batch, model.dim)));
      loss = weighted_loss(cache->out, batch);
    } catch (const NonFinite&) {
      throw DivergenceDetected("training diverged at step " +
                               std::to_string(step) + ": non-finite loss");
    }
    if (!std::isfinite(loss) || loss > config.divergence_threshold) {
      throw DivergenceDetected("training diverged at step " +
                               std::to_string(step) + ": loss = " +
                               std::to_string(loss));
    }
    history.loss.push_back(loss);

    SiteGradients grads = backward(model, *cache, batch);

    const int t = step + 1;
    for (std::size_t site = 0; site < 4; ++site) {
      std::vector<DenseMatrix*> factors =
          trainable_factors(model.adapters[site]);
      auto& site_grads = grads.by_site[site];
      for (std::size_t f = 0; f < factors.size(); ++f) {
        auto param = factors[f]->data();
        auto grad = site_grads[f].data();
        if (config.optimizer == OptimizerKind::sgd) {
          for (std::size_t i = 0; i < param.size(); ++i) {
            param[i] -= config.learning_rate * grad[i];
          }
        } else {
          AdamSlot& slot = adam[site][f];
          const double b1 = config.adam_beta1, b2 = config.adam_beta2;
          const double bc1 = 1.0 - std::pow(b1, t);
          const double bc2 = 1.0 - std::pow(b2, t);
          for (std::size_t i = 0; i < param.size(); ++i) {
            slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * grad[i];
            slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * grad[i] * grad[i];
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            param[i] -= config.learning_rate * m_hat /
                        (std::sqrt(v_hat) + config.adam_eps);
          }
        }
      }
    }
  }

  for (std::size_t site = 0; site < 4; ++site) {
    const AttnSite s = kAttnSites[site];
    const DenseMatrix merged_after =
        merge_adapter(model.adapter(s), model.base_weight(s));
    history.module_deltas.push_back(
        {to_string(s), module_delta(merged_before[site], merged_after)});
  }
  return history;
}

TeacherStudentTask make_teacher_student_task(const TeacherStudentConfig& cfg) {
  AdapterSpec student_spec = cfg.student_adapter;
  student_spec.d = static_cast<std::int64_t>(cfg.dim);
  student_spec.h = static_cast<std::int64_t>(cfg.dim);
  student_spec.init.up = UpInit::zero;  // start exactly at the base function

  // The hidden model shares the student's seed, so its down factors equal
  // the student's initial ones and only the up factors differ (drawn where
  // the student has zeros). Recovery then stays within reach of the desk
  // budget while still driving every factor through the training loop.
  AdapterSpec teacher_spec = student_spec;
  teacher_spec.init.up = UpInit::same;
  teacher_spec.scale = cfg.teacher_scale;

  const std::uint64_t base_seed = cfg.seed ^ 0x51F0E9C4A3B7D621ULL;
  ToyAttentionModel teacher =
      make_toy_attention_model(cfg.dim, teacher_spec, base_seed);
  ToyAttentionModel student =
      make_toy_attention_model(cfg.dim, student_spec, base_seed);

  const std::size_t dim = cfg.dim;
  const int batch_size = cfg.batch_size;
  const std::uint64_t data_seed = cfg.seed;
  ToyAttentionModel teacher_copy = teacher;
  DataGenerator generator = [teacher_copy, dim, batch_size,
                             data_seed](int step) -> DenoiseBatch {
    // Stateless per step so identical seeds replay identical batches.
    Rng rng(data_seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(step + 1));
    const auto n = static_cast<std::size_t>(batch_size);
    DenseMatrix z = DenseMatrix::zeros(n, dim);
    DenseMatrix c = DenseMatrix::zeros(n, dim);
    for (double& x : z.data()) x = rng.normal();
    for (double& x : c.data()) x = rng.normal();
    std::vector<int> t(n);
    for (auto& ti : t) ti = static_cast<int>(rng.next_below(1000));
    std::vector<double> w(n, 1.0);

    DenoiseBatch batch{std::move(z), DenseMatrix::zeros(n, dim), std::move(c),
                       std::move(t), std::move(w)};
    batch.eps = denoiser_forward(teacher_copy, batch);
    return batch;
  };

  return {std::move(teacher), std::move(student), std::move(generator)};
}

}  // namespace kronadapt

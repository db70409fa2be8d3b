// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kronadapt/adapters.hpp"
#include "kronadapt/linalg.hpp"

namespace kronadapt {

/// Attention projection sites carrying adapters.
enum class AttnSite { Q = 0, K = 1, V = 2, O = 3 };
inline constexpr std::array<AttnSite, 4> kAttnSites = {
    AttnSite::Q, AttnSite::K, AttnSite::V, AttnSite::O};

const char* to_string(AttnSite site);

/// Single-head attention block with a frozen base weight and one adapter per
/// projection. The base weights never change during training; only adapter
/// factors receive updates.
struct ToyAttentionModel {
  std::size_t dim = 0;
  std::array<DenseMatrix, 4> base;      // indexed by AttnSite, each dim x dim
  std::array<AdapterState, 4> adapters;

  const DenseMatrix& base_weight(AttnSite s) const {
    return base[static_cast<std::size_t>(s)];
  }
  const AdapterState& adapter(AttnSite s) const {
    return adapters[static_cast<std::size_t>(s)];
  }
  AdapterState& adapter(AttnSite s) {
    return adapters[static_cast<std::size_t>(s)];
  }
};

/// Builds a model with Gaussian base weights (stddev 1/sqrt(dim)) and one
/// adapter per site from the given spec; site k uses seed spec.seed + k so
/// the four adapters draw distinct factors.
ToyAttentionModel make_toy_attention_model(std::size_t dim,
                                           const AdapterSpec& adapter_spec,
                                           std::uint64_t base_seed);

/// softmax(Q K^T / sqrt(dim)) V projected by O, rows are tokens. Every
/// projection applies its adapter; with zero-initialized up factors the
/// output equals the frozen-base attention exactly.
DenseMatrix attention_forward(const ToyAttentionModel& model,
                              const DenseMatrix& tokens);

/// One training batch for the noise-prediction objective: latents, targets,
/// conditioning, timestep indices, and per-sample loss weights (rows are
/// samples).
struct DenoiseBatch {
  DenseMatrix z;            // batch x dim noisy latents
  DenseMatrix eps;          // batch x dim target noise
  DenseMatrix c;            // batch x dim conditioning
  std::vector<int> t;       // timestep index per sample
  std::vector<double> w;    // per-sample weight, all > 0

  std::size_t batch_size() const { return z.rows(); }
  void validate() const;
};

/// Classic sinusoidal position embedding of a timestep over `dim` channels.
DenseVector timestep_embedding(int t, std::size_t dim);

/// The toy denoiser: tokens = z + c + timestep_embedding(t) per row, one
/// attention pass, predictions are the output rows.
DenseMatrix denoiser_forward(const ToyAttentionModel& model,
                             const DenoiseBatch& batch);

/// Mean over the batch of w_i * ||prediction_i - eps_i||^2, accumulated with
/// a pairwise tree sum. Throws NonFinite if the forward pass produced
/// NaN/Inf.
double denoise_loss(const ToyAttentionModel& model, const DenoiseBatch& batch);

/// Pointers to the trainable factor matrices of an adapter, in a fixed
/// order (A, B[, C[, D]]). Gradient vectors align with this order.
std::vector<DenseMatrix*> trainable_factors(AdapterState& state);
std::vector<const DenseMatrix*> trainable_factors(const AdapterState& state);
std::vector<std::string> factor_names(const AdapterState& state);

/// Analytic factor gradients of L at y = delta * x, given upstream = dL/dy.
/// The Kronecker path works on the reshaped factors directly and never
/// materializes the product.
std::vector<DenseMatrix> adapter_gradients(const AdapterState& state,
                                           const DenseVector& x,
                                           const DenseVector& upstream);

/// delta^T v, structured per family; used to backpropagate through adapted
/// projections.
DenseVector delta_transpose_matvec(const AdapterState& state,
                                   const DenseVector& v);

/// Central finite differences, (f(p + step e_i) - f(p - step e_i)) / (2 step)
/// per coordinate. The loss callback must be deterministic.
std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> params, double step);

enum class OptimizerKind { sgd, adam };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 5e-4;
  int steps = 1000;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int batch_size = 16;
  double divergence_threshold = 1e6;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> loss;                // one entry per step
  std::vector<ModuleDelta> module_deltas;  // per site, merged before vs after
};

using DataGenerator = std::function<DenoiseBatch(int step)>;

/// Runs the training loop: per step, draws a batch, evaluates the weighted
/// denoising loss, backpropagates through the attention block into the
/// adapter factors, and applies the optimizer. Base weights stay bit-exact.
/// Throws DivergenceDetected when the loss goes non-finite or past the
/// divergence threshold.
TrainHistory train(ToyAttentionModel& model, const DataGenerator& generator,
                   const TrainConfig& config);

/// Synthetic regression task whose targets come from a hidden adapted copy
/// of the same base model, so adapter recovery is verifiable at desk scale.
struct TeacherStudentTask {
  ToyAttentionModel teacher;
  ToyAttentionModel student;
  DataGenerator generator;
};

struct TeacherStudentConfig {
  std::size_t dim = 16;
  int batch_size = 16;
  std::uint64_t seed = 0;
  AdapterSpec student_adapter;   // d/h filled from dim
  double teacher_scale = 1.0;    // scale on the hidden adapters
};

TeacherStudentTask make_teacher_student_task(const TeacherStudentConfig& cfg);

}  // namespace kronadapt

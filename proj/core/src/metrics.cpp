// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/metrics.hpp"

#include <cmath>

#include "kronadapt/errors.hpp"
#include "kronadapt/linalg.hpp"

namespace kronadapt {

const char* to_string(EmbeddingRole r) {
  switch (r) {
    case EmbeddingRole::reference_images: return "reference_images";
    case EmbeddingRole::generated_images: return "generated_images";
    case EmbeddingRole::prompts: return "prompts";
  }
  return "reference_images";
}

EmbeddingRole embedding_role_from_string(const std::string& s) {
  if (s == "reference_images") return EmbeddingRole::reference_images;
  if (s == "generated_images") return EmbeddingRole::generated_images;
  if (s == "prompts") return EmbeddingRole::prompts;
  throw ParseError("unknown embedding role '" + s + "'");
}

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

void EmbeddingSet::validate() const {
  if (vectors.empty()) {
    throw EmptySet("embedding set '" + label + "' is empty");
  }
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw DimensionMismatch("embedding set '" + label +
                              "' has a vector of length " +
                              std::to_string(v.size()) + ", expected " +
                              std::to_string(dim));
    }
    if (!(norm(v) > 0.0)) {
      throw ZeroNorm("embedding set '" + label + "' contains a zero vector");
    }
  }
}

double cosine_sim(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("cosine_sim: dimensions " +
                            std::to_string(x.size()) + " vs " +
                            std::to_string(y.size()));
  }
  const double nx = norm(x), ny = norm(y);
  if (!(nx > 0.0) || !(ny > 0.0)) {
    throw ZeroNorm("cosine_sim: zero-norm input");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d += x[i] * y[i];
  return d / (nx * ny);
}

double image_alignment_score(const EmbeddingSet& real,
                             const EmbeddingSet& gen) {
  real.validate();
  gen.validate();
  if (real.dim != gen.dim) {
    throw DimensionMismatch("image_alignment_score: embedding dims differ");
  }
  std::vector<double> sims;
  sims.reserve(real.size() * gen.size());
  for (const auto& r : real.vectors) {
    for (const auto& g : gen.vectors) {
      sims.push_back(cosine_sim(r, g));
    }
  }
  return pairwise_sum(sims) / static_cast<double>(sims.size());
}

double text_alignment_score(const EmbeddingSet& gen,
                            const EmbeddingSet& prompts) {
  gen.validate();
  prompts.validate();
  if (gen.size() != prompts.size()) {
    throw LengthMismatch("text_alignment_score: " +
                         std::to_string(gen.size()) + " generated vs " +
                         std::to_string(prompts.size()) + " prompts");
  }
  if (gen.dim != prompts.dim) {
    throw DimensionMismatch("text_alignment_score: embedding dims differ");
  }
  std::vector<double> sims(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) {
    sims[i] = cosine_sim(gen.vectors[i], prompts.vectors[i]);
  }
  return pairwise_sum(sims) / static_cast<double>(sims.size());
}

}  // namespace kronadapt

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

namespace kronadapt {

enum class EmbeddingRole { reference_images, generated_images, prompts };

const char* to_string(EmbeddingRole r);
EmbeddingRole embedding_role_from_string(const std::string& s);

/// Labeled collection of embedding vectors, all of one dimension and each
/// with strictly positive norm. Embeddings are supplied externally; this
/// library only scores them.
struct EmbeddingSet {
  std::string label;
  EmbeddingRole role = EmbeddingRole::reference_images;
  std::size_t dim = 0;
  std::vector<std::vector<double>> vectors;

  std::size_t size() const { return vectors.size(); }
  /// Throws EmptySet / DimensionMismatch / ZeroNorm on violations.
  void validate() const;
};

/// x . y / (||x|| ||y||). Throws ZeroNorm for zero-length inputs and
/// DimensionMismatch for unequal dimensions.
double cosine_sim(std::span<const double> x, std::span<const double> y);

/// Mean cosine similarity over all |real| x |gen| pairs; serves both
/// CLIP-style and DINO-style image alignment depending on which embeddings
/// are supplied. The mean uses a pairwise tree sum.
double image_alignment_score(const EmbeddingSet& real, const EmbeddingSet& gen);

/// Mean cosine similarity over index-paired (gen_i, prompt_i); requires
/// equal set sizes (LengthMismatch otherwise).
double text_alignment_score(const EmbeddingSet& gen,
                            const EmbeddingSet& prompts);

}  // namespace kronadapt

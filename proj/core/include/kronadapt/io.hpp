// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "kronadapt/adapters.hpp"
#include "kronadapt/manifest.hpp"
#include "kronadapt/metrics.hpp"
#include "kronadapt/training.hpp"

namespace kronadapt {

/// Current schema version stamped into every JSON document this library
/// writes. Loaders accept a missing field as version 1 and reject anything
/// else with SchemaVersionMismatch.
inline constexpr int kSchemaVersion = 1;

// Layer manifests: JSON {schema_version, name, layers:[{layer_name,d,h,group}]}.
LayerManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const LayerManifest& manifest,
                   const std::filesystem::path& path);

/// One serialized adapter: its construction spec plus the live factor
/// values. Factor payloads are base64 of little-endian f64, column-major,
/// so round-trips are bit-exact.
struct AdapterCheckpointEntry {
  AdapterSpec spec;
  AdapterState state;
};

using AdapterCheckpoint = std::map<std::string, AdapterCheckpointEntry>;

void save_checkpoint(const AdapterCheckpoint& checkpoint,
                     const std::filesystem::path& path);
AdapterCheckpoint load_checkpoint(const std::filesystem::path& path);

// Embedding sets: either JSON {schema_version, label, role, dim, vectors}
// or the binary variant (magic "EMB1", u32 dim, u32 count, little-endian
// f64 payload). load_embeddings sniffs the magic; the binary format carries
// no label/role, so the fallbacks apply there.
EmbeddingSet load_embeddings(
    const std::filesystem::path& path, const std::string& fallback_label = "",
    EmbeddingRole fallback_role = EmbeddingRole::reference_images);
void save_embeddings_json(const EmbeddingSet& set,
                          const std::filesystem::path& path);
void save_embeddings_binary(const EmbeddingSet& set,
                            const std::filesystem::path& path);

/// Everything a training run needs: model width, the adapter recipe, the
/// synthetic-task knobs, and the optimizer configuration.
struct TrainRunConfig {
  std::size_t dim = 16;
  AdapterSpec adapter;
  double teacher_scale = 1.0;
  TrainConfig train;
};

TrainRunConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const TrainRunConfig& config,
                       const std::filesystem::path& path);

/// CSV with header "step,loss"; loss printed with full round-trip precision.
void save_history_csv(const TrainHistory& history,
                      const std::filesystem::path& path);

}  // namespace kronadapt

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "kronadapt/errors.hpp"
#include "kronadapt/io.hpp"
#include "test_util.hpp"

using namespace kronadapt;

namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("kronadapt_io_" + name);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

}  // namespace

TEST_CASE("manifest round-trip and validation") {
  const fs::path path = temp_file("manifest.json");

  write_text(path, R"({
    "schema_version": 1,
    "name": "two-layer",
    "layers": [
      {"layer_name": "attn.to_q", "d": 8, "h": 8, "group": "Q"},
      {"layer_name": "attn.to_k", "d": 8, "h": 16, "group": "K"}
    ]
  })");
  const LayerManifest manifest = load_manifest(path);
  CHECK(manifest.name == "two-layer");
  CHECK(manifest.layers.size() == 2);
  CHECK(manifest.layers[1].h == 16);
  CHECK(manifest.layers[1].group == LayerGroup::K);

  const fs::path copy = temp_file("manifest_copy.json");
  save_manifest(manifest, copy);
  const LayerManifest reloaded = load_manifest(copy);
  CHECK(reloaded.name == manifest.name);
  REQUIRE(reloaded.layers.size() == manifest.layers.size());
  for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
    CHECK(reloaded.layers[i].layer_name == manifest.layers[i].layer_name);
    CHECK(reloaded.layers[i].d == manifest.layers[i].d);
    CHECK(reloaded.layers[i].h == manifest.layers[i].h);
    CHECK(reloaded.layers[i].group == manifest.layers[i].group);
  }
}

TEST_CASE("shipped SDXL manifest matches the in-tree builder") {
  const LayerManifest from_file =
      load_manifest(std::string(KRONADAPT_DOCS_DIR) +
                    "/examples/sdxl_attention.json");
  const LayerManifest built = testutil::sdxl_attention_manifest();
  REQUIRE(from_file.layers.size() == built.layers.size());
  for (std::size_t i = 0; i < built.layers.size(); ++i) {
    CHECK(from_file.layers[i].layer_name == built.layers[i].layer_name);
    CHECK(from_file.layers[i].d == built.layers[i].d);
    CHECK(from_file.layers[i].h == built.layers[i].h);
    CHECK(from_file.layers[i].group == built.layers[i].group);
  }

  AdapterSpec krona;
  krona.family = AdapterFamily::krona;
  krona.a1 = 2;
  krona.a2 = 4;
  CHECK(manifest_param_count(from_file, krona) == 119402880);
}

TEST_CASE("manifest error paths") {
  const fs::path path = temp_file("manifest_bad.json");

  write_text(path, R"({"name": "dup", "layers": [
    {"layer_name": "x", "d": 4, "h": 4},
    {"layer_name": "x", "d": 8, "h": 8}
  ]})");
  CHECK_THROWS_AS(load_manifest(path), DuplicateLayer);

  write_text(path, R"({"name": "zero", "layers": [
    {"layer_name": "x", "d": 0, "h": 4}
  ]})");
  CHECK_THROWS_AS(load_manifest(path), NonPositiveDim);

  write_text(path, R"({"layers": []})");
  CHECK_THROWS_AS(load_manifest(path), ParseError);

  write_text(path, "not json at all");
  CHECK_THROWS_AS(load_manifest(path), ParseError);

  write_text(path, R"({"schema_version": 9, "name": "v", "layers": []})");
  CHECK_THROWS_AS(load_manifest(path), SchemaVersionMismatch);

  CHECK_THROWS_AS(load_manifest(temp_file("does_not_exist.json")), ParseError);
}

namespace {

AdapterSpec sample_spec(AdapterFamily family, std::uint64_t seed) {
  AdapterSpec spec;
  spec.family = family;
  spec.d = 8;
  spec.h = 8;
  spec.a1 = 2;
  spec.a2 = 4;
  spec.rank = 2;
  spec.factor = 2;
  spec.init.down = DownInit::kaiming_uniform;
  spec.init.up = UpInit::same;
  spec.scale = 0.75;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-exact for every family") {
  AdapterCheckpoint checkpoint;
  std::uint64_t seed = 1000;
  for (AdapterFamily family : {AdapterFamily::krona, AdapterFamily::lora,
                               AdapterFamily::lokr, AdapterFamily::loha}) {
    const AdapterSpec spec = sample_spec(family, seed++);
    checkpoint.emplace(std::string("layer_") + to_string(family),
                       AdapterCheckpointEntry{spec, build_adapter(spec)});
  }

  const std::filesystem::path path = temp_file("checkpoint.json");
  save_checkpoint(checkpoint, path);
  const AdapterCheckpoint loaded = load_checkpoint(path);

  REQUIRE(loaded.size() == checkpoint.size());
  for (const auto& [name, entry] : checkpoint) {
    REQUIRE(loaded.count(name) == 1);
    const AdapterCheckpointEntry& got = loaded.at(name);
    CHECK(got.spec.family == entry.spec.family);
    CHECK(got.spec.seed == entry.spec.seed);
    CHECK(got.spec.scale == entry.spec.scale);
    CHECK(got.spec.init.down == entry.spec.init.down);
    CHECK(got.spec.init.up == entry.spec.init.up);
    CHECK(testutil::factors_equal(got.state, entry.state));
  }
}

TEST_CASE("empty checkpoint and corrupted payloads") {
  const std::filesystem::path path = temp_file("checkpoint_empty.json");
  save_checkpoint({}, path);
  CHECK(load_checkpoint(path).empty());

  // Truncating a factor payload must be flagged, not silently accepted.
  const AdapterSpec spec = sample_spec(AdapterFamily::krona, 7);
  AdapterCheckpoint checkpoint;
  checkpoint.emplace("layer", AdapterCheckpointEntry{spec, build_adapter(spec)});
  const std::filesystem::path full = temp_file("checkpoint_full.json");
  save_checkpoint(checkpoint, full);

  std::ifstream in(full);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const std::size_t data_pos = text.find("\"data\": \"");
  REQUIRE(data_pos != std::string::npos);
  text.erase(data_pos + 9, 8);  // drop 8 payload characters
  const std::filesystem::path corrupt = temp_file("checkpoint_corrupt.json");
  write_text(corrupt, text);
  CHECK_THROWS_AS(load_checkpoint(corrupt), ParseError);

  write_text(corrupt, R"({"format": "kronadapt-checkpoint",
                          "schema_version": 3, "adapters": {}})");
  CHECK_THROWS_AS(load_checkpoint(corrupt), SchemaVersionMismatch);
}

TEST_CASE("trained adapters survive a checkpoint round-trip bit-exactly") {
  TeacherStudentConfig cfg;
  cfg.dim = 8;
  cfg.batch_size = 4;
  cfg.seed = 5;
  cfg.student_adapter.family = AdapterFamily::krona;
  cfg.student_adapter.a1 = 2;
  cfg.student_adapter.a2 = 4;
  cfg.student_adapter.seed = 6;
  TeacherStudentTask task = make_teacher_student_task(cfg);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch_size = cfg.batch_size;
  train(task.student, task.generator, tc);

  AdapterCheckpoint checkpoint;
  AdapterSpec spec = cfg.student_adapter;
  spec.d = spec.h = 8;
  for (std::size_t site = 0; site < 4; ++site) {
    AdapterSpec site_spec = spec;
    site_spec.seed = spec.seed + site;
    checkpoint.emplace(std::string("site_") + std::to_string(site),
                       AdapterCheckpointEntry{site_spec,
                                              task.student.adapters[site]});
  }
  const std::filesystem::path path = temp_file("checkpoint_trained.json");
  save_checkpoint(checkpoint, path);
  const AdapterCheckpoint loaded = load_checkpoint(path);
  for (std::size_t site = 0; site < 4; ++site) {
    CHECK(testutil::factors_equal(
        loaded.at("site_" + std::to_string(site)).state,
        task.student.adapters[site]));
  }
}

TEST_CASE("embedding files round-trip in both encodings") {
  EmbeddingSet set;
  set.label = "refs";
  set.role = EmbeddingRole::reference_images;
  set.dim = 3;
  set.vectors = {{1.0, -2.5, 3.25}, {0.1, 0.2, -0.30000000000000004}};

  const std::filesystem::path json_path = temp_file("emb.json");
  save_embeddings_json(set, json_path);
  const EmbeddingSet from_json = load_embeddings(json_path);
  CHECK(from_json.label == set.label);
  CHECK(from_json.role == set.role);
  CHECK(from_json.vectors == set.vectors);

  const std::filesystem::path bin_path = temp_file("emb.bin");
  save_embeddings_binary(set, bin_path);
  const EmbeddingSet from_bin =
      load_embeddings(bin_path, "refs", EmbeddingRole::reference_images);
  CHECK(from_bin.vectors == set.vectors);
  CHECK(from_bin.dim == set.dim);

  // Corrupt the binary payload length.
  std::ifstream in(bin_path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  bytes.resize(bytes.size() - 5);
  const std::filesystem::path trunc = temp_file("emb_trunc.bin");
  std::ofstream out(trunc, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(load_embeddings(trunc), ParseError);
}

TEST_CASE("train config defaults mirror the documented values") {
  const std::filesystem::path path = temp_file("train_config.json");
  write_text(path, R"({"adapter": {"family": "krona", "a1": 4, "a2": 4}})");
  const TrainRunConfig config = load_train_config(path);
  CHECK(config.dim == 16);
  CHECK(config.train.learning_rate == 5e-4);
  CHECK(config.train.steps == 1000);
  CHECK(config.train.optimizer == OptimizerKind::adam);
  CHECK(config.train.batch_size == 16);
  CHECK(config.adapter.family == AdapterFamily::krona);
  CHECK(config.adapter.d == 16);

  TrainRunConfig out = config;
  out.train.steps = 77;
  const std::filesystem::path copy = temp_file("train_config_copy.json");
  save_train_config(out, copy);
  CHECK(load_train_config(copy).train.steps == 77);

  write_text(path, R"({"train": {"learning_rate": -1}})");
  CHECK_THROWS_AS(load_train_config(path), ParseError);
}

TEST_CASE("history csv layout") {
  TrainHistory history;
  history.loss = {1.5, 0.25};
  const std::filesystem::path path = temp_file("history.csv");
  save_history_csv(history, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,loss");
  std::getline(in, line);
  CHECK(line == "0,1.5");
  std::getline(in, line);
  CHECK(line == "1,0.25");
}

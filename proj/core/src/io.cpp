// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "kronadapt/errors.hpp"

namespace kronadapt {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open '" + path.string() + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void write_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ParseError("cannot write '" + path.string() + "'");
  }
  out << j.dump(2) << '\n';
}

void check_schema_version(const json& j, const std::string& where) {
  const int version = j.value("schema_version", 1);
  if (version != kSchemaVersion) {
    throw SchemaVersionMismatch(where + ": schema_version " +
                                std::to_string(version) + ", expected " +
                                std::to_string(kSchemaVersion));
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "': " + e.what());
  }
}

// --- base64 ---------------------------------------------------------------

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) |
                            (std::uint32_t{bytes[i + 1]} << 8) |
                            std::uint32_t{bytes[i + 2]};
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = std::uint32_t{bytes[i]} << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rest == 2) {
    const std::uint32_t v =
        (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<std::uint8_t> base64_decode(const std::string& text,
                                        const std::string& where) {
  if (text.size() % 4 != 0) {
    throw ParseError(where + ": base64 length not a multiple of 4");
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        // Padding is only legal in the final two positions of the last group.
        if (i + 4 != text.size() || k < 2) {
          throw ParseError(where + ": misplaced base64 padding");
        }
        vals[k] = 0;
        ++pad;
      } else {
        if (pad > 0) {
          throw ParseError(where + ": data after base64 padding");
        }
        vals[k] = b64_value(c);
        if (vals[k] < 0) {
          throw ParseError(where + ": invalid base64 character");
        }
      }
    }
    const std::uint32_t v = (std::uint32_t(vals[0]) << 18) |
                            (std::uint32_t(vals[1]) << 12) |
                            (std::uint32_t(vals[2]) << 6) |
                            std::uint32_t(vals[3]);
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

// --- little-endian f64 payloads -------------------------------------------

void append_f64_le(std::vector<std::uint8_t>& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF));
  }
}

double read_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= std::uint64_t{p[b]} << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

std::string encode_matrix(const DenseMatrix& m) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(m.size() * 8);
  for (double x : m.data()) append_f64_le(bytes, x);
  return base64_encode(bytes);
}

DenseMatrix decode_matrix(const json& j, const std::string& where) {
  const auto rows = require<std::size_t>(j, "rows", where);
  const auto cols = require<std::size_t>(j, "cols", where);
  const auto text = require<std::string>(j, "data", where);
  const std::vector<std::uint8_t> bytes = base64_decode(text, where);
  if (bytes.size() != rows * cols * 8) {
    throw ParseError(where + ": payload holds " +
                     std::to_string(bytes.size() / 8) + " values, expected " +
                     std::to_string(rows * cols));
  }
  std::vector<double> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = read_f64_le(bytes.data() + i * 8);
  }
  try {
    return DenseMatrix(rows, cols, std::move(data));
  } catch (const Error& e) {
    throw ParseError(where + ": " + e.what());
  }
}

// --- adapter spec <-> json -------------------------------------------------

json spec_to_json(const AdapterSpec& spec) {
  return json{{"family", to_string(spec.family)},
              {"d", spec.d},
              {"h", spec.h},
              {"a1", spec.a1},
              {"a2", spec.a2},
              {"rank", spec.rank},
              {"factor", spec.factor},
              {"lokr_decompose", spec.lokr_decompose},
              {"init",
               {{"down", to_string(spec.init.down)},
                {"up", to_string(spec.init.up)}}},
              {"scale", spec.scale},
              {"seed", spec.seed}};
}

AdapterSpec spec_from_json(const json& j, const std::string& where) {
  AdapterSpec spec;
  spec.family = adapter_family_from_string(
      require<std::string>(j, "family", where));
  spec.d = require<std::int64_t>(j, "d", where);
  spec.h = require<std::int64_t>(j, "h", where);
  spec.a1 = j.value("a1", std::int64_t{0});
  spec.a2 = j.value("a2", std::int64_t{0});
  spec.rank = j.value("rank", std::int64_t{0});
  spec.factor = j.value("factor", std::int64_t{-1});
  spec.lokr_decompose = j.value("lokr_decompose", true);
  if (j.contains("init")) {
    const json& init = j.at("init");
    spec.init.down =
        down_init_from_string(require<std::string>(init, "down", where));
    spec.init.up = up_init_from_string(require<std::string>(init, "up", where));
  }
  spec.scale = j.value("scale", 1.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  return spec;
}

struct FactorShape {
  std::string name;
  std::size_t rows, cols;
};

std::vector<FactorShape> expected_factor_shapes(const AdapterSpec& spec) {
  auto sz = [](std::int64_t v) { return static_cast<std::size_t>(v); };
  switch (spec.family) {
    case AdapterFamily::krona:
      return {{"A", sz(spec.a1), sz(spec.a2)},
              {"B", sz(spec.d / spec.a1), sz(spec.h / spec.a2)}};
    case AdapterFamily::lora:
      return {{"A", sz(spec.d), sz(spec.rank)},
              {"B", sz(spec.rank), sz(spec.h)}};
    case AdapterFamily::lokr: {
      const auto [d1, d2] = lokr_factorization(spec.d, spec.factor);
      const auto [h1, h2] = lokr_factorization(spec.h, spec.factor);
      const std::int64_t rank = lokr_inner_rank(spec);
      if (rank > 0) {
        return {{"A", sz(d1), sz(h1)},
                {"B", sz(d2), sz(rank)},
                {"C", sz(rank), sz(h2)}};
      }
      return {{"A", sz(d1), sz(h1)}, {"B", sz(d2), sz(h2)}};
    }
    case AdapterFamily::loha:
      return {{"A", sz(spec.d), sz(spec.rank)},
              {"B", sz(spec.rank), sz(spec.h)},
              {"C", sz(spec.d), sz(spec.rank)},
              {"D", sz(spec.rank), sz(spec.h)}};
  }
  throw ParseError("unreachable adapter family");
}

AdapterState state_from_factors(const AdapterSpec& spec,
                                std::vector<DenseMatrix> factors) {
  switch (spec.family) {
    case AdapterFamily::krona:
      return KronAdapterState{spec.a1,
                              spec.a2,
                              spec.d / spec.a1,
                              spec.h / spec.a2,
                              std::move(factors[0]),
                              std::move(factors[1]),
                              spec.scale};
    case AdapterFamily::lora:
      return LoRAAdapterState{spec.rank, std::move(factors[0]),
                              std::move(factors[1]), spec.scale};
    case AdapterFamily::lokr:
      if (factors.size() == 3) {
        return LoKrAdapterState{std::move(factors[0]), std::move(factors[1]),
                                std::move(factors[2]), spec.scale};
      }
      return LoKrAdapterState{std::move(factors[0]), std::move(factors[1]),
                              std::nullopt, spec.scale};
    case AdapterFamily::loha:
      return LoHAAdapterState{std::move(factors[0]), std::move(factors[1]),
                              std::move(factors[2]), std::move(factors[3]),
                              spec.scale};
  }
  throw ParseError("unreachable adapter family");
}

}  // namespace

LayerManifest load_manifest(const std::filesystem::path& path) {
  const json j = parse_file(path);
  check_schema_version(j, path.string());
  LayerManifest manifest;
  manifest.name = require<std::string>(j, "name", path.string());
  if (!j.contains("layers") || !j.at("layers").is_array()) {
    throw ParseError(path.string() + ": missing 'layers' array");
  }
  for (const json& lj : j.at("layers")) {
    LayerEntry entry;
    entry.layer_name = require<std::string>(lj, "layer_name", path.string());
    entry.d = require<std::int64_t>(lj, "d", path.string());
    entry.h = require<std::int64_t>(lj, "h", path.string());
    entry.group = layer_group_from_string(
        lj.value("group", std::string("other")));
    manifest.layers.push_back(std::move(entry));
  }
  manifest.validate();
  return manifest;
}

void save_manifest(const LayerManifest& manifest,
                   const std::filesystem::path& path) {
  manifest.validate();
  json layers = json::array();
  for (const LayerEntry& layer : manifest.layers) {
    layers.push_back(json{{"layer_name", layer.layer_name},
                          {"d", layer.d},
                          {"h", layer.h},
                          {"group", to_string(layer.group)}});
  }
  write_file(json{{"schema_version", kSchemaVersion},
                  {"name", manifest.name},
                  {"layers", layers}},
             path);
}

void save_checkpoint(const AdapterCheckpoint& checkpoint,
                     const std::filesystem::path& path) {
  json adapters = json::object();
  for (const auto& [name, entry] : checkpoint) {
    json factors = json::object();
    const std::vector<const DenseMatrix*> mats = trainable_factors(entry.state);
    const std::vector<std::string> names = factor_names(entry.state);
    for (std::size_t i = 0; i < mats.size(); ++i) {
      factors[names[i]] = json{{"rows", mats[i]->rows()},
                               {"cols", mats[i]->cols()},
                               {"data", encode_matrix(*mats[i])}};
    }
    json header = spec_to_json(entry.spec);
    header["factors"] = std::move(factors);
    adapters[name] = std::move(header);
  }
  write_file(json{{"format", "kronadapt-checkpoint"},
                  {"schema_version", kSchemaVersion},
                  {"adapters", adapters}},
             path);
}

AdapterCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = parse_file(path);
  check_schema_version(j, path.string());
  if (j.value("format", "") != "kronadapt-checkpoint") {
    throw ParseError(path.string() + ": not a kronadapt checkpoint");
  }
  AdapterCheckpoint checkpoint;
  if (!j.contains("adapters") || !j.at("adapters").is_object()) {
    throw ParseError(path.string() + ": missing 'adapters' object");
  }
  for (const auto& [name, aj] : j.at("adapters").items()) {
    const std::string where = path.string() + ": adapter '" + name + "'";
    AdapterSpec spec = spec_from_json(aj, where);
    const std::vector<FactorShape> shapes = expected_factor_shapes(spec);
    if (!aj.contains("factors")) {
      throw ParseError(where + ": missing 'factors'");
    }
    std::vector<DenseMatrix> factors;
    for (const FactorShape& fs : shapes) {
      if (!aj.at("factors").contains(fs.name)) {
        throw ParseError(where + ": missing factor '" + fs.name + "'");
      }
      DenseMatrix m = decode_matrix(aj.at("factors").at(fs.name),
                                    where + " factor " + fs.name);
      if (m.rows() != fs.rows || m.cols() != fs.cols) {
        throw ParseError(where + ": factor " + fs.name + " is " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", spec implies " +
                         std::to_string(fs.rows) + "x" +
                         std::to_string(fs.cols));
      }
      factors.push_back(std::move(m));
    }
    checkpoint.emplace(name, AdapterCheckpointEntry{
                                 spec, state_from_factors(spec,
                                                          std::move(factors))});
  }
  return checkpoint;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path,
                             const std::string& fallback_label,
                             EmbeddingRole fallback_role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open '" + path.string() + "'");
  }
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string_view(magic, 4) == "EMB1") {
    std::uint32_t dim = 0, count = 0;
    std::uint8_t header[8];
    in.read(reinterpret_cast<char*>(header), 8);
    if (in.gcount() != 8) {
      throw ParseError(path.string() + ": truncated binary header");
    }
    for (int b = 0; b < 4; ++b) {
      dim |= std::uint32_t{header[b]} << (8 * b);
      count |= std::uint32_t{header[4 + b]} << (8 * b);
    }
    EmbeddingSet set;
    set.label = fallback_label.empty() ? path.stem().string() : fallback_label;
    set.role = fallback_role;
    set.dim = dim;
    set.vectors.resize(count);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(dim) * 8);
    for (std::uint32_t i = 0; i < count; ++i) {
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
      if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw ParseError(path.string() + ": truncated binary payload");
      }
      set.vectors[i].resize(dim);
      for (std::uint32_t k = 0; k < dim; ++k) {
        set.vectors[i][k] = read_f64_le(buf.data() + std::size_t{k} * 8);
      }
    }
    set.validate();
    return set;
  }

  const json j = parse_file(path);
  check_schema_version(j, path.string());
  EmbeddingSet set;
  set.label = require<std::string>(j, "label", path.string());
  set.role =
      embedding_role_from_string(require<std::string>(j, "role", path.string()));
  set.dim = require<std::size_t>(j, "dim", path.string());
  if (!j.contains("vectors") || !j.at("vectors").is_array()) {
    throw ParseError(path.string() + ": missing 'vectors' array");
  }
  try {
    set.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": vectors: " + e.what());
  }
  set.validate();
  return set;
}

void save_embeddings_json(const EmbeddingSet& set,
                          const std::filesystem::path& path) {
  set.validate();
  write_file(json{{"schema_version", kSchemaVersion},
                  {"label", set.label},
                  {"role", to_string(set.role)},
                  {"dim", set.dim},
                  {"vectors", set.vectors}},
             path);
}

void save_embeddings_binary(const EmbeddingSet& set,
                            const std::filesystem::path& path) {
  set.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ParseError("cannot write '" + path.string() + "'");
  }
  out.write("EMB1", 4);
  std::vector<std::uint8_t> header(8);
  const auto dim = static_cast<std::uint32_t>(set.dim);
  const auto count = static_cast<std::uint32_t>(set.vectors.size());
  for (int b = 0; b < 4; ++b) {
    header[b] = static_cast<std::uint8_t>((dim >> (8 * b)) & 0xFF);
    header[4 + b] = static_cast<std::uint8_t>((count >> (8 * b)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(header.data()), 8);
  std::vector<std::uint8_t> payload;
  payload.reserve(set.vectors.size() * set.dim * 8);
  for (const auto& v : set.vectors) {
    for (double x : v) append_f64_le(payload, x);
  }
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
}

TrainRunConfig load_train_config(const std::filesystem::path& path) {
  const json j = parse_file(path);
  check_schema_version(j, path.string());
  TrainRunConfig config;
  config.dim = j.value("dim", std::size_t{16});
  if (j.contains("adapter")) {
    json aj = j.at("adapter");
    // Layer dims come from the model width; tolerate their absence here.
    if (!aj.contains("d")) aj["d"] = config.dim;
    if (!aj.contains("h")) aj["h"] = config.dim;
    config.adapter = spec_from_json(aj, path.string() + ": adapter");
  }
  config.adapter.d = static_cast<std::int64_t>(config.dim);
  config.adapter.h = static_cast<std::int64_t>(config.dim);
  config.teacher_scale = j.value("teacher_scale", 1.0);
  if (j.contains("train")) {
    const json& tj = j.at("train");
    config.train.learning_rate = tj.value("learning_rate", 5e-4);
    config.train.steps = tj.value("steps", 1000);
    if (tj.contains("optimizer")) {
      config.train.optimizer =
          optimizer_from_string(tj.at("optimizer").get<std::string>());
    }
    config.train.seed = tj.value("seed", std::uint64_t{0});
    config.train.batch_size = tj.value("batch_size", 16);
  }
  try {
    config.train.validate();
  } catch (const std::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config;
}

void save_train_config(const TrainRunConfig& config,
                       const std::filesystem::path& path) {
  json aj = spec_to_json(config.adapter);
  write_file(
      json{{"schema_version", kSchemaVersion},
           {"dim", config.dim},
           {"adapter", aj},
           {"teacher_scale", config.teacher_scale},
           {"train",
            {{"learning_rate", config.train.learning_rate},
             {"steps", config.train.steps},
             {"optimizer", to_string(config.train.optimizer)},
             {"seed", config.train.seed},
             {"batch_size", config.train.batch_size}}}},
      path);
}

void save_history_csv(const TrainHistory& history,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ParseError("cannot write '" + path.string() + "'");
  }
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, history.loss[i]);
    out << buf;
  }
}

}  // namespace kronadapt

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "kronadapt/io.hpp"
#include "test_util.hpp"

using namespace kronadapt;
using testutil::CommandResult;
using testutil::run_command;

namespace {

namespace fs = std::filesystem;

const std::string kCli = KRONADAPT_CLI_PATH;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("kronadapt_cli_" + name);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

fs::path square_manifest() {
  const fs::path path = temp_file("square_manifest.json");
  write_text(path, R"({
    "schema_version": 1,
    "name": "two-square-layers",
    "layers": [
      {"layer_name": "layer_a", "d": 8, "h": 8, "group": "Q"},
      {"layer_name": "layer_b", "d": 8, "h": 8, "group": "V"}
    ]
  })");
  return path;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("cli factorize prints the published pairs") {
  CommandResult r = run_command(kCli + " factorize --dim 640 --factor 8",
                                "fact1");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "(8, 80)\n");

  r = run_command(kCli + " factorize --dim 640 --factor=-1", "fact2");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "(20, 32)\n");

  r = run_command(kCli + " factorize --dim 7 --factor=-1", "fact3");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "(1, 7)\n");
}

TEST_CASE("cli plan reports totals and per-layer counts") {
  const fs::path manifest = square_manifest();

  CommandResult r = run_command(
      kCli + " plan --manifest " + manifest.string() +
          " --family krona --a1 2 --a2 4",
      "plan_krona");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "a1,a2,total_params,layer_a,layer_b"));
  CHECK(contains(r.out, "2,4,32,16,16"));

  r = run_command(kCli + " plan --manifest " + manifest.string() +
                      " --family lora --rank 2",
                  "plan_lora");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "2,64,32,32"));

  // Identical invocations must produce byte-identical output.
  CommandResult again = run_command(
      kCli + " plan --manifest " + manifest.string() +
          " --family lora --rank 2",
      "plan_lora2");
  CHECK(again.out == r.out);

  r = run_command(kCli + " plan --manifest " + manifest.string() +
                      " --family krona --a1 3 --a2 4",
                  "plan_invalid");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.err, "layer_a"));
}

TEST_CASE("cli plan sweep lists symmetric totals for square layers") {
  const fs::path manifest = square_manifest();
  const CommandResult r = run_command(
      kCli + " plan --manifest " + manifest.string() + " --family krona --sweep",
      "plan_sweep");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "2,4,32,16,16"));
  CHECK(contains(r.out, "4,2,32,16,16"));

  // Every (a1, a2) row has a matching (a2, a1) row with the same total.
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);  // header
  std::map<std::pair<std::string, std::string>, std::string> totals;
  while (std::getline(lines, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    totals[{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1)}] =
        line.substr(c2 + 1, c3 - c2 - 1);
  }
  for (const auto& [pair, total] : totals) {
    REQUIRE(totals.count({pair.second, pair.first}) == 1);
    CHECK(totals.at({pair.second, pair.first}) == total);
  }
}

TEST_CASE("cli train writes history and checkpoint") {
  const fs::path config = temp_file("train_config.json");
  write_text(config, R"({
    "dim": 8,
    "adapter": {"family": "krona", "a1": 2, "a2": 4, "seed": 3},
    "train": {"steps": 25, "batch_size": 8, "seed": 11}
  })");
  const fs::path history = temp_file("history.csv");
  const fs::path ckpt = temp_file("ckpt.json");

  CommandResult r = run_command(
      kCli + " train --config " + config.string() + " --out " +
          history.string() + " --ckpt " + ckpt.string(),
      "train_ok");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "steps=25"));

  std::ifstream hist(history);
  std::string line;
  std::getline(hist, line);
  CHECK(line == "step,loss");
  int rows = 0;
  while (std::getline(hist, line)) ++rows;
  CHECK(rows == 25);

  const AdapterCheckpoint loaded = load_checkpoint(ckpt);
  CHECK(loaded.size() == 4);
  CHECK(loaded.count("Q") == 1);
  CHECK(loaded.count("O") == 1);

  // Replaying the same invocation reproduces the same summary line.
  CommandResult again = run_command(
      kCli + " train --config " + config.string() + " --out " +
          history.string() + " --ckpt " + ckpt.string(),
      "train_replay");
  CHECK(again.out == r.out);
}

TEST_CASE("cli train handles zero steps and divergence") {
  const fs::path config = temp_file("train_zero.json");
  write_text(config, R"({
    "dim": 8,
    "adapter": {"family": "krona", "a1": 2, "a2": 4},
    "train": {"steps": 0, "batch_size": 4}
  })");
  const fs::path history = temp_file("history_zero.csv");
  const fs::path ckpt = temp_file("ckpt_zero.json");
  CommandResult r = run_command(
      kCli + " train --config " + config.string() + " --out " +
          history.string() + " --ckpt " + ckpt.string(),
      "train_zero");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "steps=0\n");
  std::ifstream hist(history);
  std::string line;
  std::getline(hist, line);
  CHECK(line == "step,loss");
  CHECK_FALSE(std::getline(hist, line));

  const fs::path bad = temp_file("train_diverge.json");
  write_text(bad, R"({
    "dim": 8,
    "adapter": {"family": "krona", "a1": 2, "a2": 4},
    "train": {"steps": 400, "batch_size": 8, "learning_rate": 1e9,
              "optimizer": "sgd"}
  })");
  r = run_command(kCli + " train --config " + bad.string() + " --out " +
                      history.string() + " --ckpt " + ckpt.string(),
                  "train_diverge");
  CHECK(r.exit_code == 3);

  r = run_command(kCli + " train --config /nonexistent.json", "train_noconf");
  CHECK(r.exit_code == 2);
}

TEST_CASE("cli grad-check audits all families") {
  for (const std::string family : {"krona", "lora", "lokr", "loha"}) {
    const CommandResult r = run_command(
        kCli + " grad-check --family " + family + " --trials 20 --step 1e-6",
        "grad_" + family);
    CHECK(r.exit_code == 0);
    CHECK(contains(r.out, "family=" + family));
    CHECK(contains(r.out, "max_rel_err="));
  }

  const CommandResult corrupt = run_command(
      kCli + " grad-check --family krona --trials 5 --corrupt", "grad_corrupt");
  CHECK(corrupt.exit_code == 3);
}

TEST_CASE("cli eval-metrics") {
  EmbeddingSet real;
  real.label = "real";
  real.role = EmbeddingRole::reference_images;
  real.dim = 3;
  real.vectors = {{1, 0, 0}, {0, 1, 0}};
  const fs::path real_path = temp_file("real.json");
  save_embeddings_json(real, real_path);

  EmbeddingSet gen = real;
  gen.label = "gen";
  gen.role = EmbeddingRole::generated_images;
  const fs::path gen_path = temp_file("gen.json");
  save_embeddings_json(gen, gen_path);

  EmbeddingSet prompts = real;
  prompts.label = "prompts";
  prompts.role = EmbeddingRole::prompts;
  const fs::path prompts_path = temp_file("prompts.json");
  save_embeddings_json(prompts, prompts_path);

  CommandResult r = run_command(
      kCli + " eval-metrics --real " + real_path.string() + " --gen " +
          gen_path.string(),
      "eval_img");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "clip_i=0.5000\n");  // identity pairs 1, cross pairs 0

  r = run_command(kCli + " eval-metrics --real " + real_path.string() +
                      " --gen " + gen_path.string() + " --prompts " +
                      prompts_path.string() + " --dino-real " +
                      real_path.string() + " --dino-gen " + gen_path.string(),
                  "eval_all");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "clip_i=0.5000 dino=0.5000 clip_t=1.0000\n");

  EmbeddingSet short_prompts = prompts;
  short_prompts.vectors.pop_back();
  const fs::path short_path = temp_file("prompts_short.json");
  save_embeddings_json(short_prompts, short_path);
  r = run_command(kCli + " eval-metrics --real " + real_path.string() +
                      " --gen " + gen_path.string() + " --prompts " +
                      short_path.string(),
                  "eval_short");
  CHECK(r.exit_code == 2);
}

TEST_CASE("cli bench times both methods and honors the element budget") {
  CommandResult r = run_command(
      kCli + " bench --a1 2 --a2 2 --b1 2 --b2 2 --reps 5", "bench_tiny");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "method,shape,median_ns,allocations_estimate"));
  CHECK(contains(r.out, "structured,2x2x2x2"));
  CHECK(contains(r.out, "materialized,2x2x2x2"));

  r = run_command(kCli + " bench --a1 2 --a2 2 --b1 2 --b2 2 --reps 0",
                  "bench_zero");
  CHECK(r.exit_code == 2);

  // With a tight budget the oracle side refuses but the structured side is
  // still timed.
  r = run_command("KRONADAPT_ELEMENT_BUDGET=1000000 " + kCli +
                      " bench --a1 64 --a2 64 --b1 64 --b2 64 --reps 3",
                  "bench_budget");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "structured,64x64x64x64"));
  CHECK_FALSE(contains(r.out, "materialized,"));
  const bool skip_noted =
      contains(r.err, "SizeOverflow") || contains(r.err, "exceeds");
  CHECK(skip_noted);
}

TEST_CASE("cli rejects unknown commands with the usage exit code") {
  CHECK(run_command(kCli + " no-such-command", "unknown").exit_code == 2);
  CHECK(run_command(kCli, "nosub").exit_code == 2);
}

// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// kronadapt command line: parameter-budget planning, LoKr factorization
// lookup, toy training runs, gradient audits, embedding-alignment scoring,
// and a structured-vs-dense matvec benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kronadapt/kronadapt.hpp"

namespace {

using namespace kronadapt;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::size_t resolve_element_budget() {
  const char* env = std::getenv("KRONADAPT_ELEMENT_BUDGET");
  if (env == nullptr || *env == '\0') return kDefaultElementBudget;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0' || value == 0) {
    throw ParseError("KRONADAPT_ELEMENT_BUDGET must be a positive integer");
  }
  return static_cast<std::size_t>(value);
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanOptions {
  std::string manifest_path;
  std::string family = "krona";
  std::int64_t a1 = 0;
  std::int64_t a2 = 0;
  std::int64_t rank = 0;
  std::int64_t factor = -1;
  bool sweep = false;
};

void print_layer_header(const LayerManifest& manifest) {
  for (const LayerEntry& layer : manifest.layers) {
    std::cout << ',' << layer.layer_name;
  }
  std::cout << '\n';
}

int run_plan(const PlanOptions& opt) {
  const LayerManifest manifest = load_manifest(opt.manifest_path);
  AdapterSpec tmpl;
  tmpl.family = adapter_family_from_string(opt.family);
  tmpl.a1 = opt.a1;
  tmpl.a2 = opt.a2;
  tmpl.rank = opt.rank;
  tmpl.factor = opt.factor;

  auto layer_count = [&](const LayerEntry& layer,
                         const AdapterSpec& spec) -> std::optional<std::int64_t> {
    AdapterSpec s = spec;
    s.d = layer.d;
    s.h = layer.h;
    try {
      return param_count(s);
    } catch (const InvalidFactorization&) {
      return std::nullopt;
    }
  };

  if (opt.sweep) {
    if (tmpl.family != AdapterFamily::krona) {
      throw ParseError("--sweep enumerates Kronecker factor pairs; use --family krona");
    }
    std::set<std::int64_t> a1_candidates, a2_candidates;
    for (const LayerEntry& layer : manifest.layers) {
      for (std::int64_t a = 1; a <= layer.d; ++a) {
        if (layer.d % a == 0) a1_candidates.insert(a);
      }
      for (std::int64_t a = 1; a <= layer.h; ++a) {
        if (layer.h % a == 0) a2_candidates.insert(a);
      }
    }

    struct Row {
      std::int64_t a1, a2, total;
      std::vector<std::optional<std::int64_t>> per_layer;
    };
    std::vector<Row> rows;
    for (std::int64_t a1 : a1_candidates) {
      for (std::int64_t a2 : a2_candidates) {
        Row row{a1, a2, 0, {}};
        AdapterSpec spec = tmpl;
        spec.a1 = a1;
        spec.a2 = a2;
        for (const LayerEntry& layer : manifest.layers) {
          const auto count = layer_count(layer, spec);
          row.per_layer.push_back(count);
          if (count) row.total += *count;
        }
        rows.push_back(std::move(row));
      }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& l, const Row& r) {
      if (l.total != r.total) return l.total < r.total;
      if (l.a1 != r.a1) return l.a1 < r.a1;
      return l.a2 < r.a2;
    });

    std::cout << "a1,a2,total_params";
    print_layer_header(manifest);
    for (const Row& row : rows) {
      std::cout << row.a1 << ',' << row.a2 << ',' << row.total;
      for (const auto& count : row.per_layer) {
        std::cout << ',' << (count ? std::to_string(*count) : "invalid");
      }
      std::cout << '\n';
    }
    return kExitOk;
  }

  // Single configuration: any invalid layer is a hard error naming it.
  std::vector<std::int64_t> per_layer;
  const std::int64_t total = manifest_param_count(manifest, tmpl);
  for (const LayerEntry& layer : manifest.layers) {
    per_layer.push_back(*layer_count(layer, tmpl));
  }

  switch (tmpl.family) {
    case AdapterFamily::krona:
      std::cout << "a1,a2,total_params";
      break;
    case AdapterFamily::lora:
    case AdapterFamily::loha:
      std::cout << "rank,total_params";
      break;
    case AdapterFamily::lokr:
      std::cout << "factor,rank,total_params";
      break;
  }
  print_layer_header(manifest);

  switch (tmpl.family) {
    case AdapterFamily::krona:
      std::cout << tmpl.a1 << ',' << tmpl.a2 << ',' << total;
      break;
    case AdapterFamily::lora:
    case AdapterFamily::loha:
      std::cout << tmpl.rank << ',' << total;
      break;
    case AdapterFamily::lokr:
      std::cout << tmpl.factor << ',' << tmpl.rank << ',' << total;
      break;
  }
  for (std::int64_t count : per_layer) std::cout << ',' << count;
  std::cout << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// factorize
// ---------------------------------------------------------------------------

int run_factorize(std::int64_t dim, std::int64_t factor) {
  const auto [m, n] = lokr_factorization(dim, factor);
  std::cout << '(' << m << ", " << n << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string config_path;
  std::string history_path = "history.csv";
  std::string checkpoint_path = "checkpoint.json";
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainOptions& opt) {
  TrainRunConfig config = load_train_config(opt.config_path);
  if (opt.seed) {
    config.train.seed = *opt.seed;
    config.adapter.seed = *opt.seed + 1;
  }

  TeacherStudentConfig task_cfg;
  task_cfg.dim = config.dim;
  task_cfg.batch_size = config.train.batch_size;
  task_cfg.seed = config.train.seed;
  task_cfg.student_adapter = config.adapter;
  task_cfg.teacher_scale = config.teacher_scale;
  TeacherStudentTask task = make_teacher_student_task(task_cfg);

  TrainHistory history;
  try {
    history = train(task.student, task.generator, config.train);
  } catch (const DivergenceDetected& e) {
    std::cerr << "kronadapt train: " << e.what() << '\n';
    return kExitNumerical;
  }

  save_history_csv(history, opt.history_path);

  AdapterCheckpoint checkpoint;
  for (std::size_t site = 0; site < 4; ++site) {
    AdapterSpec spec = config.adapter;
    spec.d = static_cast<std::int64_t>(config.dim);
    spec.h = static_cast<std::int64_t>(config.dim);
    spec.seed = config.adapter.seed + site;
    checkpoint.emplace(to_string(kAttnSites[site]),
                       AdapterCheckpointEntry{spec,
                                              task.student.adapters[site]});
  }
  save_checkpoint(checkpoint, opt.checkpoint_path);

  char line[256];
  if (history.loss.empty()) {
    std::snprintf(line, sizeof(line), "steps=0\n");
    std::cout << line;
  } else {
    std::snprintf(line, sizeof(line),
                  "steps=%zu initial_loss=%.17g final_loss=%.17g\n",
                  history.loss.size(), history.loss.front(),
                  history.loss.back());
    std::cout << line;
    for (const ModuleDelta& delta : history.module_deltas) {
      std::snprintf(line, sizeof(line), "delta_%s=%.17g\n",
                    delta.layer_name.c_str(), delta.delta);
      std::cout << line;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  std::string family = "krona";
  int trials = 20;
  double step = 1e-6;
  std::uint64_t seed = 0;
  bool corrupt = false;
};

int run_grad_check(const GradCheckOptions& opt) {
  if (opt.trials < 1) throw ParseError("--trials must be >= 1");
  if (!(opt.step > 0.0)) throw ParseError("--step must be positive");
  const AdapterFamily family = adapter_family_from_string(opt.family);
  Rng rng(opt.seed);

  double worst = 0.0;
  std::string worst_desc;
  for (int trial = 0; trial < opt.trials; ++trial) {
    AdapterSpec spec;
    spec.family = family;
    const std::int64_t a1 = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const std::int64_t a2 = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const std::int64_t b1 = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const std::int64_t b2 = 1 + static_cast<std::int64_t>(rng.next_below(4));
    spec.d = a1 * b1;
    spec.h = a2 * b2;
    spec.a1 = a1;
    spec.a2 = a2;
    spec.rank = 1 + static_cast<std::int64_t>(rng.next_below(
                        static_cast<std::uint64_t>(std::min(spec.d, spec.h))));
    spec.factor = 2;
    if (family == AdapterFamily::lokr) {
      const auto [d1, d2] = lokr_factorization(spec.d, spec.factor);
      const auto [h1, h2] = lokr_factorization(spec.h, spec.factor);
      (void)d1;
      (void)h1;
      if (trial % 3 == 0) {
        spec.lokr_decompose = false;
      } else {
        spec.rank = 1 + static_cast<std::int64_t>(rng.next_below(
                            static_cast<std::uint64_t>(std::min(d2, h2))));
      }
    }
    spec.init.up = UpInit::same;
    spec.scale = rng.uniform(0.5, 1.5);
    spec.seed = rng.next_u64();

    const AdapterState state = build_adapter(spec);
    DenseVector x = DenseVector::zeros(static_cast<std::size_t>(spec.h));
    DenseVector upstream = DenseVector::zeros(static_cast<std::size_t>(spec.d));
    for (double& v : x.data()) v = rng.normal();
    for (double& v : upstream.data()) v = rng.normal();

    std::vector<DenseMatrix> analytic = adapter_gradients(state, x, upstream);
    if (opt.corrupt) {
      analytic[0].data()[0] += 1e-3;
    }

    std::vector<double> params;
    for (const DenseMatrix* f : trainable_factors(state)) {
      params.insert(params.end(), f->data().begin(), f->data().end());
    }
    auto loss = [&](std::span<const double> p) {
      AdapterState probe = state;
      std::size_t offset = 0;
      for (DenseMatrix* f : trainable_factors(probe)) {
        auto data = f->data();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = p[offset++];
      }
      const DenseMatrix zero_base = DenseMatrix::zeros(
          static_cast<std::size_t>(spec.d), static_cast<std::size_t>(spec.h));
      const DenseVector zero_bias =
          DenseVector::zeros(static_cast<std::size_t>(spec.d));
      return dot(upstream, adapter_forward(probe, zero_base, zero_bias, x));
    };
    const std::vector<double> fd = finite_diff_gradient(loss, params, opt.step);

    std::vector<double> flat;
    for (const DenseMatrix& g : analytic) {
      flat.insert(flat.end(), g.data().begin(), g.data().end());
    }
    double norm_scale = opt.step;
    for (double v : fd) norm_scale = std::max(norm_scale, std::abs(v));
    double err = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      err = std::max(err, std::abs(flat[i] - fd[i]) / norm_scale);
    }
    if (err > worst) {
      worst = err;
      worst_desc = "trial " + std::to_string(trial) + " d=" +
                   std::to_string(spec.d) + " h=" + std::to_string(spec.h) +
                   " seed=" + std::to_string(spec.seed);
    }
  }

  char line[128];
  std::snprintf(line, sizeof(line), "family=%s trials=%d max_rel_err=%.3e\n",
                opt.family.c_str(), opt.trials, worst);
  std::cout << line;
  if (worst > 1e-5) {
    std::cerr << "kronadapt grad-check: worst case: " << worst_desc << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-metrics
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string real_path;
  std::string gen_path;
  std::string prompts_path;
  std::string dino_real_path;
  std::string dino_gen_path;
};

int run_eval_metrics(const EvalOptions& opt) {
  const EmbeddingSet real =
      load_embeddings(opt.real_path, "real", EmbeddingRole::reference_images);
  const EmbeddingSet gen =
      load_embeddings(opt.gen_path, "gen", EmbeddingRole::generated_images);

  char buf[64];
  std::snprintf(buf, sizeof(buf), "clip_i=%.4f",
                image_alignment_score(real, gen));
  std::string line = buf;

  if (!opt.dino_real_path.empty() || !opt.dino_gen_path.empty()) {
    if (opt.dino_real_path.empty() || opt.dino_gen_path.empty()) {
      throw ParseError("--dino-real and --dino-gen must be given together");
    }
    const EmbeddingSet dino_real = load_embeddings(
        opt.dino_real_path, "dino_real", EmbeddingRole::reference_images);
    const EmbeddingSet dino_gen = load_embeddings(
        opt.dino_gen_path, "dino_gen", EmbeddingRole::generated_images);
    std::snprintf(buf, sizeof(buf), " dino=%.4f",
                  image_alignment_score(dino_real, dino_gen));
    line += buf;
  }

  if (!opt.prompts_path.empty()) {
    const EmbeddingSet prompts =
        load_embeddings(opt.prompts_path, "prompts", EmbeddingRole::prompts);
    std::snprintf(buf, sizeof(buf), " clip_t=%.4f",
                  text_alignment_score(gen, prompts));
    line += buf;
  }

  std::cout << line << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOptions {
  std::int64_t a1 = 0, a2 = 0, b1 = 0, b2 = 0;
  int reps = 0;
  std::uint64_t seed = 0;
};

int run_bench(const BenchOptions& opt) {
  if (opt.a1 < 1 || opt.a2 < 1 || opt.b1 < 1 || opt.b2 < 1) {
    throw ParseError("factor shapes must be positive");
  }
  if (opt.reps < 1) throw ParseError("--reps must be >= 1");
  const std::size_t budget = resolve_element_budget();

  Rng rng(opt.seed);
  DenseMatrix a = DenseMatrix::zeros(static_cast<std::size_t>(opt.a1),
                                     static_cast<std::size_t>(opt.a2));
  DenseMatrix b = DenseMatrix::zeros(static_cast<std::size_t>(opt.b1),
                                     static_cast<std::size_t>(opt.b2));
  DenseVector x =
      DenseVector::zeros(static_cast<std::size_t>(opt.a2 * opt.b2));
  for (double& v : a.data()) v = rng.normal();
  for (double& v : b.data()) v = rng.normal();
  for (double& v : x.data()) v = rng.normal();

  const std::string shape = std::to_string(opt.a1) + "x" +
                            std::to_string(opt.a2) + "x" +
                            std::to_string(opt.b1) + "x" +
                            std::to_string(opt.b2);

  std::optional<DenseMatrix> materialized;
  try {
    materialized.emplace(kron_materialize(a, b, budget));
  } catch (const SizeOverflow& e) {
    std::cerr << "kronadapt bench: materialized side skipped: " << e.what()
              << '\n';
  }

  const DenseVector structured = kron_matvec(a, b, x);
  if (materialized) {
    const DenseVector oracle = matvec(*materialized, x);
    const double gap =
        max_abs_diff(structured, oracle) / (1.0 + max_abs(oracle));
    if (gap > 1e-10) {
      std::cerr << "kronadapt bench: structured result deviates from the "
                   "materialized oracle (rel err "
                << gap << ")\n";
      return kExitNumerical;
    }
  }

  auto median_ns = [&](auto&& body) {
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(opt.reps));
    body();  // warm-up
    for (int rep = 0; rep < opt.reps; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      body();
      const auto stop = std::chrono::steady_clock::now();
      samples.push_back(
          std::chrono::duration<double, std::nano>(stop - start).count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
  };

  double sink = 0.0;
  const double structured_ns = median_ns([&] {
    const DenseVector y = kron_matvec(a, b, x);
    sink += y[0];
  });

  std::cout << "method,shape,median_ns,allocations_estimate\n";
  {
    MatvecCounters counters;
    kron_matvec(a, b, x, &counters);
    char row[160];
    std::snprintf(row, sizeof(row), "structured,%s,%.0f,%llu\n", shape.c_str(),
                  structured_ns,
                  static_cast<unsigned long long>(counters.workspace_elements));
    std::cout << row;
  }
  if (materialized) {
    const double dense_ns = median_ns([&] {
      const DenseVector y = matvec(*materialized, x);
      sink += y[0];
    });
    char row[160];
    std::snprintf(row, sizeof(row), "materialized,%s,%.0f,%llu\n",
                  shape.c_str(), dense_ns,
                  static_cast<unsigned long long>(opt.a1 * opt.b1));
    std::cout << row;
  }
  if (!std::isfinite(sink)) std::cerr << "";  // keep the timed work alive
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kronecker-product adapters: budget planning, training, "
               "auditing, and benchmarking"};
  app.require_subcommand(1);

  PlanOptions plan_opt;
  CLI::App* plan = app.add_subcommand(
      "plan", "Parameter-budget table for a layer manifest (CSV on stdout)");
  plan->add_option("--manifest", plan_opt.manifest_path, "Manifest JSON path")
      ->required();
  plan->add_option("--family", plan_opt.family,
                   "Adapter family: krona|lora|lokr|loha");
  plan->add_option("--a1", plan_opt.a1, "Kronecker factor rows (krona)");
  plan->add_option("--a2", plan_opt.a2, "Kronecker factor cols (krona)");
  plan->add_option("--rank", plan_opt.rank, "Rank (lora/loha, lokr inner)");
  plan->add_option("--factor", plan_opt.factor, "LoKr factorization knob");
  plan->add_flag("--sweep", plan_opt.sweep,
                 "Enumerate all valid (a1, a2) pairs");

  std::int64_t fact_dim = 0;
  std::int64_t fact_factor = -1;
  CLI::App* factorize = app.add_subcommand(
      "factorize", "LoKr dimension factorization lookup");
  factorize->add_option("--dim", fact_dim, "Dimension to split")
      ->required()
      ->check(CLI::PositiveNumber);
  factorize->add_option("--factor", fact_factor, "Factor (-1 = balanced walk)");

  TrainOptions train_opt;
  CLI::App* train_cmd = app.add_subcommand(
      "train", "Run the teacher-student training loop from a JSON config");
  train_cmd->add_option("--config", train_opt.config_path, "Config JSON path")
      ->required();
  train_cmd->add_option("--out", train_opt.history_path,
                        "History CSV output path");
  train_cmd->add_option("--ckpt", train_opt.checkpoint_path,
                        "Adapter checkpoint output path");
  std::uint64_t train_seed = 0;
  CLI::Option* train_seed_opt =
      train_cmd->add_option("--seed", train_seed, "Override the config seed");

  GradCheckOptions grad_opt;
  CLI::App* grad = app.add_subcommand(
      "grad-check", "Audit analytic adapter gradients against finite differences");
  grad->add_option("--family", grad_opt.family,
                   "Adapter family: krona|lora|lokr|loha");
  grad->add_option("--trials", grad_opt.trials, "Random instances to audit");
  grad->add_option("--step", grad_opt.step, "Finite-difference step");
  grad->add_option("--seed", grad_opt.seed, "RNG seed");
  grad->add_flag("--corrupt", grad_opt.corrupt,
                 "Negative control: perturb one analytic gradient entry");

  EvalOptions eval_opt;
  CLI::App* eval = app.add_subcommand(
      "eval-metrics", "Alignment scores over embedding files");
  eval->add_option("--real", eval_opt.real_path, "Reference-image embeddings")
      ->required();
  eval->add_option("--gen", eval_opt.gen_path, "Generated-image embeddings")
      ->required();
  eval->add_option("--prompts", eval_opt.prompts_path, "Prompt embeddings");
  eval->add_option("--dino-real", eval_opt.dino_real_path,
                   "Second reference-image embedding set");
  eval->add_option("--dino-gen", eval_opt.dino_gen_path,
                   "Second generated-image embedding set");

  BenchOptions bench_opt;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time the structured matvec against the materialized product");
  bench->add_option("--a1", bench_opt.a1, "Left factor rows")->required();
  bench->add_option("--a2", bench_opt.a2, "Left factor cols")->required();
  bench->add_option("--b1", bench_opt.b1, "Right factor rows")->required();
  bench->add_option("--b2", bench_opt.b2, "Right factor cols")->required();
  bench->add_option("--reps", bench_opt.reps, "Timing repetitions")->required();
  bench->add_option("--seed", bench_opt.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(plan)) return run_plan(plan_opt);
    if (app.got_subcommand(factorize)) return run_factorize(fact_dim, fact_factor);
    if (app.got_subcommand(train_cmd)) {
      if (train_seed_opt->count() > 0) train_opt.seed = train_seed;
      return run_train(train_opt);
    }
    if (app.got_subcommand(grad)) return run_grad_check(grad_opt);
    if (app.got_subcommand(eval)) return run_eval_metrics(eval_opt);
    if (app.got_subcommand(bench)) return run_bench(bench_opt);
  } catch (const DivergenceDetected& e) {
    std::cerr << "kronadapt: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonFinite& e) {
    std::cerr << "kronadapt: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "kronadapt: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "kronadapt: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

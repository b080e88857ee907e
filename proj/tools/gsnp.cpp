// SPDX-License-Identifier: Apache-2.0
// gsnp: dataset preparation, training, evaluation and explanation.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gsnp/dataset.hpp"
#include "gsnp/error.hpp"
#include "gsnp/evaluator.hpp"
#include "gsnp/explain.hpp"
#include "gsnp/params.hpp"
#include "gsnp/trainer.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

constexpr const char* kConfigEnv = "GSNP_CONFIG";
constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kMetricsFile = "metrics.jsonl";
constexpr const char* kConfigFile = "config.txt";

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> k;
  std::vector<std::string> overrides;
  bool quiet = false;
};

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "test";
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<std::size_t> samples;
  std::size_t threads = 1;
  bool expected_mask = false;
};

struct ExplainArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "test";
  std::string task;
  std::size_t query = 0;
  double threshold = gsnp::kDefaultExplainThreshold;
  std::size_t top_k = 0;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::size_t threads = 1;
};

struct PrepareArgs {
  std::string source;
  std::string split;
  std::string out;
  bool whitespace = false;
  gsnp::PrepareOptions options;
};

struct SynthArgs {
  std::string out;
  gsnp::SynthOptions options;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gsnp::DataError("cannot write " + path.string());
  out << text;
  if (!out) throw gsnp::DataError("write failed for " + path.string());
}

gsnp::TrainConfig config_from_json(const nlohmann::json& j) {
  gsnp::TrainConfig c;
  std::vector<std::string> unknown;
  const auto keys = gsnp::TrainConfig::keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      unknown.push_back(key);
      continue;
    }
    c.set(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  if (!unknown.empty()) {
    std::string msg = "checkpoint config has unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw gsnp::ConfigError(msg);
  }
  return c;
}

struct LoadedModel {
  gsnp::Model model;
  gsnp::TrainConfig config;
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw gsnp::ConfigError("--checkpoint is required");
  if (!fs::exists(path)) throw gsnp::DataError("checkpoint not found: " + path);
  nlohmann::json meta;
  gsnp::ParameterStore store = gsnp::load_checkpoint(path, &meta);
  gsnp::TrainConfig config;
  if (meta.contains("config")) config = config_from_json(meta.at("config"));
  return {gsnp::Model::from_checkpoint(store, meta), config};
}

std::span<const gsnp::FewShotTask> split_tasks(const gsnp::Dataset& data, const std::string& split) {
  if (split == "valid") return data.valid_tasks;
  if (split == "test") return data.test_tasks;
  throw gsnp::ConfigError("unknown split '" + split + "' (expected valid or test)");
}

int cmd_prepare(const PrepareArgs& a) {
  const auto format = a.whitespace ? gsnp::TripleFormat::whitespace_separated : gsnp::TripleFormat::tab_separated;
  const auto source = gsnp::load_triples(a.source, format);
  const gsnp::SplitSpec split = a.split.empty() ? gsnp::SplitSpec{} : gsnp::read_split_spec(a.split);
  const auto bundle = gsnp::prepare_bundle(source, split, a.options);
  gsnp::write_bundle(a.out, bundle);
  std::cout << gsnp::format_statistics(bundle);
  return kOk;
}

int cmd_synth(const SynthArgs& a) {
  const auto bundle = gsnp::synthesize_bundle(a.options);
  gsnp::write_bundle(a.out, bundle);
  std::cout << gsnp::format_statistics(bundle);
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  std::string config_path = a.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kConfigEnv)) config_path = env;
  }
  gsnp::TrainConfig config = config_path.empty() ? gsnp::TrainConfig{} : gsnp::TrainConfig::load(config_path);
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw gsnp::ConfigError("--set expects key=value, got '" + o + "'");
    config.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (a.seed) config.seed = *a.seed;
  if (a.threads) config.threads = *a.threads;
  if (a.k) config.K = *a.k;
  config.validate();

  const auto data = gsnp::load_dataset(a.data);
  fs::create_directories(a.out);
  std::ofstream metrics(fs::path(a.out) / kMetricsFile, std::ios::binary);
  if (!metrics) throw gsnp::DataError("cannot write " + (fs::path(a.out) / kMetricsFile).string());
  gsnp::TrainHooks hooks;
  hooks.metrics = &metrics;
  if (!a.quiet) {
    hooks.on_episode = [&](std::size_t episode, const gsnp::LossReport& r) {
      if (episode % config.valid_every == 0)
        std::cerr << "episode " << episode << " loss " << r.total << " ranking " << r.ranking << '\n';
    };
  }
  const auto result = gsnp::train(data, config, hooks);
  gsnp::save_checkpoint(fs::path(a.out) / kCheckpointFile, result.model.params(), result.checkpoint_metadata(config));
  write_text(fs::path(a.out) / kConfigFile, config.to_text());
  std::cout << "episodes " << result.episodes << ", best episode " << result.best_episode;
  if (result.best_val_mrr >= 0.0) std::cout << ", valid MRR " << result.best_val_mrr;
  std::cout << "\ncheckpoint " << (fs::path(a.out) / kCheckpointFile).string() << '\n';
  return kOk;
}

int cmd_eval(const EvalArgs& a) {
  const auto loaded = load_model(a.checkpoint);
  const auto data = gsnp::load_dataset(a.data);
  gsnp::EvalConfig eval = loaded.config.eval_config();
  if (a.seed) eval.seed = *a.seed;
  if (a.k) eval.shots = *a.k;
  if (a.samples) eval.samples = *a.samples;
  if (a.expected_mask) eval.sample_mask = false;
  const auto report = gsnp::evaluate_split(loaded.model, data.test_graph, split_tasks(data, a.split), eval);
  std::cout << report.to_table();
  if (!a.output.empty()) write_text(a.output, report.to_json().dump(2) + "\n");
  return kOk;
}

int cmd_explain(const ExplainArgs& a) {
  const auto loaded = load_model(a.checkpoint);
  const auto data = gsnp::load_dataset(a.data);
  const auto tasks = split_tasks(data, a.split);
  if (tasks.empty()) throw gsnp::DataError("split '" + a.split + "' has no tasks");
  const gsnp::FewShotTask* task = &tasks.front();
  if (!a.task.empty()) {
    task = nullptr;
    for (const auto& t : tasks)
      if (t.id == a.task) task = &t;
    if (!task) throw gsnp::DataError("no task '" + a.task + "' in split '" + a.split + "'");
  }
  if (a.query >= task->queries.size())
    throw gsnp::DataError("task '" + task->id + "' has " + std::to_string(task->queries.size()) + " queries");
  gsnp::EvalConfig eval = loaded.config.eval_config();
  if (a.seed) eval.seed = *a.seed;
  if (a.k) eval.shots = *a.k;
  const auto index = loaded.model.relation_index(data.test_graph);
  const auto exp = gsnp::extract_explanation(loaded.model, data.test_graph, index, *task, task->queries[a.query], eval,
                                             {a.threshold, a.top_k});
  fs::create_directories(a.out);
  gsnp::export_explanation(exp, gsnp::ExplainFormat::dot, fs::path(a.out) / "explanation.dot");
  gsnp::export_explanation(exp, gsnp::ExplainFormat::structured_text, fs::path(a.out) / "explanation.json");
  std::cout << "kept " << exp.kept.size() << ", dropped " << exp.dropped.size() << " at threshold " << exp.threshold
            << '\n';
  if (exp.empty_subgraph) std::cerr << "warning: the query subgraph has no edges\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot inductive knowledge graph completion with subgraph neural processes", "gsnp"};
  app.require_subcommand(1, 1);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Build an inductive bundle from a raw triple file");
  p->add_option("--source", prepare.source, "Triple file")->required();
  p->add_option("--split", prepare.split, "JSON split spec with train/valid/test relation lists");
  p->add_option("--out", prepare.out, "Bundle directory")->required();
  p->add_flag("--whitespace", prepare.whitespace, "Fields separated by any whitespace");
  p->add_option("--shots", prepare.options.shots, "Support triples per task")->capture_default_str();
  p->add_option("--n-cand", prepare.options.n_cand, "Candidates per held-out query")->capture_default_str();
  p->add_option("--query-fraction", prepare.options.query_fraction, "Fraction of held-out queries kept")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  p->add_option("--seed", prepare.options.seed, "Seed")->capture_default_str();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a planted two-hop rule bundle");
  s->add_option("--out", synth.out, "Bundle directory")->required();
  s->add_option("--entities", synth.options.entities)->capture_default_str();
  s->add_option("--pairs", synth.options.pairs, "Planted pairs")->capture_default_str();
  s->add_option("--distractors", synth.options.distractors, "Distractor edges")->capture_default_str();
  s->add_option("--distractor-relations", synth.options.distractor_relations)->capture_default_str();
  s->add_option("--r1", synth.options.first_relation)->capture_default_str();
  s->add_option("--r2", synth.options.second_relation)->capture_default_str();
  s->add_option("--target", synth.options.target_relation)->capture_default_str();
  s->add_option("--valid-queries", synth.options.valid_queries)->capture_default_str();
  s->add_option("--test-queries", synth.options.test_queries)->capture_default_str();
  s->add_option("--shots", synth.options.shots)->capture_default_str();
  s->add_option("--n-cand", synth.options.n_cand)->capture_default_str();
  s->add_option("--seed", synth.options.seed)->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Episodic training");
  t->add_option("--config", train.config, std::string("key = value config file (default: $") + kConfigEnv + ")");
  t->add_option("--data", train.data, "Bundle directory")->required();
  t->add_option("--out", train.out, "Output directory for checkpoint and metrics")->required();
  t->add_option("--seed", train.seed);
  t->add_option("--threads", train.threads, "Parallel episodes per batch; 1 is bit-exact");
  t->add_option("--k", train.k, "Support shots");
  t->add_option("--set", train.overrides, "Config override key=value (repeatable)");
  t->add_flag("--quiet", train.quiet);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Rank held-out queries against their candidates");
  e->add_option("--data", eval.data, "Bundle directory")->required();
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--split", eval.split)->check(CLI::IsMember({"valid", "test"}))->capture_default_str();
  e->add_option("--output", eval.output, "Write the metrics report as JSON");
  e->add_option("--seed", eval.seed);
  e->add_option("--k", eval.k, "Support shots");
  e->add_option("--samples", eval.samples, "Prior samples averaged per score");
  e->add_option("--threads", eval.threads)->check(CLI::PositiveNumber);
  e->add_flag("--expected-mask", eval.expected_mask, "Use edge probabilities instead of sampled masks");

  ExplainArgs explain;
  auto* x = app.add_subcommand("explain", "Export the explanatory subgraph of a query");
  x->add_option("--data", explain.data, "Bundle directory")->required();
  x->add_option("--checkpoint", explain.checkpoint)->required();
  x->add_option("--split", explain.split)->check(CLI::IsMember({"valid", "test"}))->capture_default_str();
  x->add_option("--task", explain.task, "Task id (default: first task)");
  x->add_option("--query", explain.query, "Query index within the task")->capture_default_str();
  x->add_option("--threshold", explain.threshold)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  x->add_option("--top-k", explain.top_k, "Keep at most this many edges (0: no limit)")->capture_default_str();
  x->add_option("--out", explain.out, "Output directory")->capture_default_str();
  x->add_option("--seed", explain.seed);
  x->add_option("--k", explain.k, "Support shots");
  x->add_option("--threads", explain.threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsage;
  }

  try {
    if (*p) return cmd_prepare(prepare);
    if (*s) return cmd_synth(synth);
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*x) return cmd_explain(explain);
  } catch (const gsnp::ConfigError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kUsage;
  } catch (const gsnp::NumericError& err) {
    std::cerr << "numeric error: " << err.what() << '\n';
    return kNumeric;
  } catch (const gsnp::Error& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}

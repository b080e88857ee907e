// SPDX-License-Identifier: Apache-2.0
#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "gsnp/dataset.hpp"
#include "gsnp/encoder.hpp"
#include "gsnp/evaluator.hpp"
#include "gsnp/trainer.hpp"

namespace {

using namespace gsnp;

KnowledgeGraph random_graph(int nodes, int edges, int relations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KnowledgeGraph::Builder b;
  for (int e = 0; e < edges; ++e)
    b.add("n" + std::to_string(rng() % nodes), "r" + std::to_string(rng() % relations),
          "n" + std::to_string(rng() % nodes));
  return add_inverse_edges(std::move(b).build());
}

void BM_EnclosingSubgraph(benchmark::State& state) {
  const int nodes = static_cast<int>(state.range(0));
  const auto kg = random_graph(nodes, nodes * 4, 8, 1);
  std::mt19937_64 rng(2);
  std::size_t edges = 0;
  for (auto _ : state) {
    const auto h = static_cast<EntityId>(rng() % kg.num_entities());
    const auto t = static_cast<EntityId>(rng() % kg.num_entities());
    const auto sub = enclosing_subgraph(kg, h, t, 2);
    edges += sub.num_edges();
    benchmark::DoNotOptimize(sub);
  }
  state.counters["edges/query"] = benchmark::Counter(static_cast<double>(edges), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_EnclosingSubgraph)->Arg(100)->Arg(1000)->Arg(10000);

void BM_EncodeSubgraph(benchmark::State& state) {
  const auto kg = random_graph(60, 400, 8, 3);
  const Model model(ModelConfig{static_cast<int>(state.range(0)), 32, 3}, edge_relation_names(kg), 4);
  const auto index = model.relation_index(kg);
  const auto sub = enclosing_subgraph(kg, 0, 1, 2);
  for (auto _ : state) {
    Tape tape;
    tape.set_grad_enabled(false);
    benchmark::DoNotOptimize(encode_subgraph(tape, model, sub, index).embedding.value());
  }
  state.counters["edges"] = static_cast<double>(sub.num_edges());
}
BENCHMARK(BM_EncodeSubgraph)->Arg(32)->Arg(128);

void BM_EpisodeLossAndBackward(benchmark::State& state) {
  const auto data = assemble_dataset(synthesize_bundle({}));
  TrainConfig config;
  config.d_edge = 32;
  config.d_z = 32;
  config.T = static_cast<std::size_t>(state.range(0));
  const Model model(config.model_config(), data.edge_relations(), 5);
  const auto index = model.relation_index(data.train_graph);
  const auto triples = data.train_relation_triples();
  EpisodeRng rng(6);
  const auto task = sample_task(data.train_graph, triples.begin()->second, config.K, rng, {});
  NoiseStream noise(7);
  for (auto _ : state) {
    Tape tape;
    const auto r = episode_loss(tape, model, data.train_graph, index, task, config, noise);
    tape.backward(r.total);
    benchmark::DoNotOptimize(r.report.total);
  }
}
BENCHMARK(BM_EpisodeLossAndBackward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_EvaluateSplit(benchmark::State& state) {
  const auto data = assemble_dataset(synthesize_bundle({}));
  const Model model(ModelConfig{32, 32, 3}, data.edge_relations(), 8);
  EvalConfig config;
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_split(model, data.test_graph, data.test_tasks, config).mrr);
}
BENCHMARK(BM_EvaluateSplit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

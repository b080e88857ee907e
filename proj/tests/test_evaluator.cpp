// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gsnp/dataset.hpp"
#include "gsnp/error.hpp"
#include "gsnp/evaluator.hpp"
#include "helpers.hpp"

namespace gsnp {
namespace {

RankingResult with_rank(std::size_t rank) {
  RankingResult r;
  r.rank = rank;
  return r;
}

TEST(Rank, DominantTrueTailIsFirst) {
  const std::vector<double> candidates(50, 0.1);
  EXPECT_EQ(rank_from_scores(0.9, candidates), 1u);
}

TEST(Rank, AllTiedIsMidRank) {
  const std::vector<double> candidates(50, 0.3);
  EXPECT_EQ(rank_from_scores(0.3, candidates), 26u);
}

TEST(Rank, StrictlyHigherAndTies) {
  const std::vector<double> candidates{0.9, 0.5, 0.5, 0.5, 0.1};
  EXPECT_EQ(rank_from_scores(0.5, candidates), 1u + 1u + 1u);
  EXPECT_EQ(rank_from_scores(0.0, candidates), 6u);
  const auto r = rank_with_scores(Triple{0, 0, 1}, {0.5, 0.9, 0.5});
  EXPECT_EQ(r.rank, 2u);
  EXPECT_EQ(r.scores.size(), 3u);
}

TEST(Metrics, HandComputedRanks) {
  const std::vector<RankingResult> rs{with_rank(1), with_rank(2), with_rank(4)};
  const auto m = compute_metrics(rs);
  EXPECT_NEAR(m.mrr, 0.5833, 1e-4);
  EXPECT_NEAR(m.mrr, (1.0 + 0.5 + 0.25) / 3.0, 1e-15);
  EXPECT_NEAR(m.hit1, 0.3333, 1e-4);
  EXPECT_EQ(m.hit5, 1.0);
  EXPECT_EQ(m.hit10, 1.0);
  EXPECT_EQ(m.n_queries, 3u);
}

TEST(Metrics, PerfectRanker) {
  const std::vector<RankingResult> rs(7, with_rank(1));
  const auto m = compute_metrics(rs);
  EXPECT_EQ(m.mrr, 1.0);
  EXPECT_EQ(m.hit1, 1.0);
  EXPECT_EQ(m.hit5, 1.0);
  EXPECT_EQ(m.hit10, 1.0);
}

TEST(Metrics, EmptyIsDataError) {
  EXPECT_THROW(compute_metrics(std::span<const RankingResult>{}), DataError);
  EXPECT_THROW(compute_task_metrics(std::span<const RankingResult>{}), DataError);
}

TEST(Metrics, MonotoneHitsAndBounds) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RankingResult> rs;
    for (int i = 0; i < 20; ++i) rs.push_back(with_rank(1 + rng() % 51));
    const auto m = compute_metrics(rs);
    ASSERT_LE(m.hit1, m.hit5);
    ASSERT_LE(m.hit5, m.hit10);
    ASSERT_GE(m.mrr, m.hit1);
    ASSERT_GE(m.mrr, 1.0 / 51.0);
    ASSERT_LE(m.mrr, 1.0);
  }
}

FewShotTask random_task(const std::string& id, std::size_t queries, std::size_t n_cand) {
  FewShotTask t;
  t.id = id;
  t.relation = "rq";
  t.support = {Triple{0, 0, 1}};
  for (std::size_t q = 0; q < queries; ++q) {
    t.queries.push_back(Triple{static_cast<EntityId>(q), 0, 1000});
    std::vector<EntityId> c;
    for (std::size_t i = 0; i < n_cand; ++i) c.push_back(static_cast<EntityId>(i));
    t.candidates.push_back(c);
  }
  return t;
}

TEST(Metrics, RandomScorerMatchesHarmonicOracle) {
  std::vector<FewShotTask> tasks;
  for (int i = 0; i < 10; ++i) tasks.push_back(random_task("t" + std::to_string(i), 100, 50));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto m = evaluate_with_scores(tasks, [&](const FewShotTask&, std::size_t, EntityId) { return u(rng); });
  double harmonic = 0.0;
  for (int k = 1; k <= 51; ++k) harmonic += 1.0 / k;
  EXPECT_NEAR(harmonic / 51.0, 0.0888, 5e-4);
  EXPECT_EQ(m.n_queries, 1000u);
  EXPECT_NEAR(m.mrr, harmonic / 51.0, 0.01);
  EXPECT_EQ(m.per_task.size(), 10u);
}

TEST(Metrics, ReportFormats) {
  std::vector<FewShotTask> tasks{random_task("a", 2, 3), random_task("b", 1, 3)};
  const auto m = evaluate_with_scores(tasks, [](const FewShotTask& t, std::size_t, EntityId e) {
    return t.id == "a" ? (e == 1000 ? 1.0 : 0.0) : 0.5;
  });
  EXPECT_EQ(m.per_task[0].mrr, 1.0);
  EXPECT_EQ(m.per_task[1].mrr, 0.5);
  const auto j = m.to_json();
  for (const char* key : {"mrr", "hit1", "hit5", "hit10", "n_queries", "per_task"}) EXPECT_TRUE(j.contains(key)) << key;
  const auto table = m.to_table();
  EXPECT_NE(table.find("ALL"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}

struct Trained {
  Dataset data;
  Model model;
};

Trained synth_model(std::size_t shots = 3) {
  SynthOptions opt;
  opt.shots = shots;
  auto data = assemble_dataset(synthesize_bundle(opt));
  Model model(ModelConfig{6, 4, 2}, data.edge_relations(), 9);
  return {std::move(data), std::move(model)};
}

TEST(EvaluateSplit, DeterministicAcrossRuns) {
  const auto t = synth_model();
  EvalConfig config;
  config.seed = 4;
  const auto a = evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, config);
  const auto b = evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, config);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_GT(a.n_queries, 0u);
}

TEST(EvaluateSplit, InjectedTableMatchesLiveScoring) {
  const auto t = synth_model();
  EvalConfig config;
  const auto live = evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, config);
  const auto index = t.model.relation_index(t.data.test_graph);
  const auto tasks = with_candidates(t.data.test_graph, t.data.test_tasks, config);
  std::map<std::string, std::unique_ptr<TaskScorer>> scorers;
  for (const auto& task : tasks)
    scorers.emplace(task.id, std::make_unique<TaskScorer>(t.model, t.data.test_graph, index, task, config));
  const auto injected = evaluate_with_scores(
      tasks, [&](const FewShotTask& task, std::size_t q, EntityId e) { return scorers.at(task.id)->score(q, e); });
  EXPECT_EQ(injected.to_json(), live.to_json());
}

TEST(EvaluateSplit, ScoresArePureFunctionsOfQueryAndTail) {
  const auto t = synth_model();
  EvalConfig config;
  const auto index = t.model.relation_index(t.data.test_graph);
  const auto& task = t.data.test_tasks.front();
  const TaskScorer a(t.model, t.data.test_graph, index, task, config);
  const TaskScorer b(t.model, t.data.test_graph, index, task, config);
  const EntityId tail = task.queries.front().tail;
  const double first = a.score(0, tail);
  b.score(0, tail + 1);
  EXPECT_EQ(b.score(0, tail), first);
  EXPECT_GE(first, -1.0);
  EXPECT_LE(first, 1.0);
}

TEST(EvaluateSplit, ShotSweep) {
  const auto t = synth_model(5);
  for (std::size_t k : {1u, 3u, 5u}) {
    EvalConfig config;
    config.shots = k;
    const auto m = evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, config);
    EXPECT_GT(m.mrr, 0.0) << k;
    EXPECT_LE(m.mrr, 1.0) << k;
  }
  EvalConfig too_many;
  too_many.shots = 6;
  EXPECT_THROW(evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, too_many), ConfigError);
}

TEST(EvaluateSplit, SampleAveragingAndExpectedMask) {
  const auto t = synth_model();
  EvalConfig config;
  config.samples = 3;
  const auto index = t.model.relation_index(t.data.test_graph);
  const TaskScorer scorer(t.model, t.data.test_graph, index, t.data.test_tasks.front(), config);
  EXPECT_EQ(scorer.samples().size(), 3u);
  config.sample_mask = false;
  const auto a = evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, config);
  const auto b = evaluate_split(t.model, t.data.test_graph, t.data.test_tasks, config);
  EXPECT_EQ(a.to_json(), b.to_json());
}

}  // namespace
}  // namespace gsnp

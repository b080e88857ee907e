// SPDX-License-Identifier: Apache-2.0
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gsnp/error.hpp"
#include "gsnp/tasks.hpp"
#include "helpers.hpp"

namespace gsnp {
namespace {

struct Fixture {
  KnowledgeGraph kg;
  std::vector<Triple> relation_triples;
};

/// Ten entities on a ring of "r" edges plus a task relation "rq" with no edges.
Fixture ring_fixture(std::size_t n_task_triples = 4) {
  KnowledgeGraph::Builder b;
  for (int i = 0; i < 10; ++i) b.add("e" + std::to_string(i), "r", "e" + std::to_string((i + 1) % 10));
  const RelationId rq = b.add_relation("rq");
  auto kg = add_inverse_edges(std::move(b).build());
  Fixture f{std::move(kg), {}};
  for (std::size_t i = 0; i < n_task_triples; ++i)
    f.relation_triples.push_back(Triple{static_cast<EntityId>(i), rq, static_cast<EntityId>((i + 3) % 10)});
  return f;
}

TEST(SampleTask, CountsSupportAndQueries) {
  const auto f = ring_fixture(4);
  EpisodeRng rng(0);
  const auto task = sample_task(f.kg, f.relation_triples, 3, rng);
  EXPECT_EQ(task.support.size(), 3u);
  EXPECT_EQ(task.queries.size(), 1u);
  EXPECT_EQ(task.support_negatives.size(), 3u);
  EXPECT_EQ(task.query_negatives.size(), 1u);
  EXPECT_EQ(task.relation, "rq");
  EXPECT_EQ(task.id, "rq");
}

TEST(SampleTask, PartitionsTheRelationTriples) {
  const auto f = ring_fixture(8);
  SampleOptions opt;
  opt.max_queries = 2;
  EpisodeRng rng(1);
  const auto task = sample_task(f.kg, f.relation_triples, 3, rng, opt);
  EXPECT_EQ(task.queries.size(), 2u);
  std::multiset<Triple> all(task.support.begin(), task.support.end());
  all.insert(task.queries.begin(), task.queries.end());
  all.insert(task.other_positives.begin(), task.other_positives.end());
  EXPECT_EQ(all, std::multiset<Triple>(f.relation_triples.begin(), f.relation_triples.end()));
}

TEST(SampleTask, DeterministicPerSeedAndVariesAcrossSeeds) {
  const auto f = ring_fixture(8);
  EpisodeRng a(7);
  EpisodeRng b(7);
  const auto ta = sample_task(f.kg, f.relation_triples, 3, a);
  const auto tb = sample_task(f.kg, f.relation_triples, 3, b);
  EXPECT_EQ(ta.support, tb.support);
  EXPECT_EQ(ta.support_negatives, tb.support_negatives);
  EXPECT_EQ(ta.query_negatives, tb.query_negatives);
  std::set<std::set<Triple>> supports;
  for (std::uint64_t s = 0; s < 100; ++s) {
    EpisodeRng r(s);
    const auto t = sample_task(f.kg, f.relation_triples, 3, r);
    supports.insert({t.support.begin(), t.support.end()});
  }
  EXPECT_GT(supports.size(), 1u);
}

TEST(SampleTask, Errors) {
  const auto f = ring_fixture(3);
  EpisodeRng rng(0);
  EXPECT_THROW(sample_task(f.kg, f.relation_triples, 3, rng), DataError);
  EXPECT_THROW(sample_task(f.kg, f.relation_triples, 0, rng), ConfigError);
  auto mixed = ring_fixture(4).relation_triples;
  mixed.back().relation = 0;
  EXPECT_THROW(sample_task(f.kg, mixed, 2, rng), DataError);
}

TEST(CorruptTriple, ForcedChoice) {
  const auto kg = testing::graph_of({{"a", "r", "b"}, {"c", "r", "d"}});
  const Triple t = kg.resolve("a", "r", "b");
  const EntityId pool[] = {kg.entities().at("a"), kg.entities().at("b"), kg.entities().at("c")};
  const EntityId single[] = {kg.entities().at("d")};
  for (std::uint64_t s = 0; s < 20; ++s) {
    EpisodeRng rng(s);
    const auto n = corrupt_triple(kg, t, single, rng);
    EXPECT_TRUE(n == (Triple{kg.entities().at("d"), t.relation, t.tail}) ||
                n == (Triple{t.head, t.relation, kg.entities().at("d")}));
  }
  EpisodeRng rng(0);
  EXPECT_FALSE(kg.contains(corrupt_triple(kg, t, pool, rng)));
}

TEST(CorruptTriple, SingleEntityPool) {
  const auto kg = testing::graph_of({{"a", "r", "b"}});
  const Triple t = kg.resolve("a", "r", "b");
  const EntityId pool[] = {t.head};
  EpisodeRng rng(0);
  EXPECT_EQ(corrupt_triple(kg, t, pool, rng), (Triple{t.head, t.relation, t.head}));
  const std::vector<EntityId> empty;
  EXPECT_THROW(corrupt_triple(kg, t, empty, rng), DataError);
}

TEST(CorruptTriple, NeverReturnsAKnownTriple) {
  const auto kg = testing::random_graph(3, 10, 40, 2, false);
  const auto pool = all_entities(kg);
  EpisodeRng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto& t = kg.triple(static_cast<std::uint32_t>(rng.index(kg.num_triples())));
    const auto n = corrupt_triple(kg, t, pool, rng);
    ASSERT_FALSE(kg.contains(n));
    ASSERT_TRUE(n.head == t.head || n.tail == t.tail);
  }
}

TEST(CorruptTriple, RespectsTaskPositives) {
  const auto f = ring_fixture(4);
  TripleSet positives(f.relation_triples.begin(), f.relation_triples.end());
  const auto pool = all_entities(f.kg);
  EpisodeRng rng(2);
  for (int i = 0; i < 500; ++i) EXPECT_FALSE(positives.contains(corrupt_triple(f.kg, f.relation_triples[0], pool, rng, positives)));
}

TEST(EvalCandidates, ExactPoolReturnedWhole) {
  KnowledgeGraph::Builder b;
  for (int i = 0; i < 52; ++i) b.add_entity("e" + std::to_string(i));
  b.add("e0", "r", "e51");
  const auto kg = std::move(b).build();
  const auto pool = all_entities(kg);
  const Triple q{0, 0, 1};
  EpisodeRng rng(0);
  const auto c = build_eval_candidates(kg, q, pool, 50, rng);
  EXPECT_EQ(std::set<EntityId>(c.begin(), c.end()).size(), 50u);
  EXPECT_FALSE(std::set<EntityId>(c.begin(), c.end()).contains(51u));
  EXPECT_THROW(build_eval_candidates(kg, q, pool, 51, rng), DataError);
}

TEST(EvalCandidates, UniqueAndExcludeTrueTail) {
  const auto kg = testing::random_graph(9, 80, 200, 3, false);
  const auto pool = all_entities(kg);
  EpisodeRng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto& q = kg.triple(static_cast<std::uint32_t>(rng.index(kg.num_triples())));
    const auto c = build_eval_candidates(kg, q, pool, 50, rng);
    const std::set<EntityId> u(c.begin(), c.end());
    ASSERT_EQ(u.size(), c.size());
    ASSERT_FALSE(u.contains(q.tail));
    for (EntityId e : c) ASSERT_FALSE(kg.contains(Triple{q.head, q.relation, e}));
  }
}

TEST(TaskSeed, StablePerIdentifier) {
  EXPECT_EQ(task_seed(1, "concept:teamcoach"), task_seed(1, "concept:teamcoach"));
  EXPECT_NE(task_seed(1, "a"), task_seed(1, "b"));
  EXPECT_NE(task_seed(1, "a"), task_seed(2, "a"));
}

TEST(TaskRecords, JsonRoundTripAndResolve) {
  const auto f = ring_fixture(4);
  EpisodeRng rng(0);
  auto task = sample_task(f.kg, f.relation_triples, 2, rng);
  task.candidates = {{5, 6}, {7, 8}};
  const auto record = to_record(task, f.kg);
  const auto dir = testing::scratch_dir("records");
  const std::vector<TaskRecord> records{record};
  write_task_records(dir / "t.json", records);
  const auto back = read_task_records(dir / "t.json");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], record);
  const auto resolved = resolve_task(back[0], f.kg);
  EXPECT_EQ(resolved.support, task.support);
  EXPECT_EQ(resolved.queries, task.queries);
  EXPECT_EQ(resolved.candidates, task.candidates);
}

TEST(TaskRecords, MalformedInputs) {
  EXPECT_THROW(task_records_from_json(nlohmann::json::object(), "x"), DataError);
  const auto bad = nlohmann::json::parse(R"([{"relation": "rq", "support": [["a", "other", "b"]], "queries": []}])");
  EXPECT_THROW(task_records_from_json(bad, "x"), DataError);
  EXPECT_THROW(read_task_records("/nonexistent/tasks.json"), DataError);
  const auto f = ring_fixture(4);
  TaskRecord r{"t", "rq", {{"e0", "rq", "unknown"}}, {}, {}};
  EXPECT_THROW(resolve_task(r, f.kg), DataError);
}

}  // namespace
}  // namespace gsnp

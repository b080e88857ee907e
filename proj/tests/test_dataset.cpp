// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <gtest/gtest.h>

#include "gsnp/dataset.hpp"
#include "gsnp/error.hpp"
#include "helpers.hpp"

namespace gsnp {
namespace {

namespace fs = std::filesystem;

/// 100 triples: 88 on five background relations and six on each of tq1, tq2.
KnowledgeGraph toy_source(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  KnowledgeGraph::Builder b;
  auto ent = [&] { return "e" + std::to_string(rng() % 40); };
  auto add_until = [&](std::size_t target, auto relation) {
    while (seen.size() < target) {
      std::tuple<std::string, std::string, std::string> t{ent(), relation(), ent()};
      if (seen.insert(t).second) b.add(std::get<0>(t), std::get<1>(t), std::get<2>(t));
    }
  };
  add_until(88, [&] { return "rel" + std::to_string(rng() % 5); });
  add_until(94, [] { return std::string("tq1"); });
  add_until(100, [] { return std::string("tq2"); });
  return std::move(b).build();
}

std::set<std::string> entity_names(const KnowledgeGraph& g) {
  std::set<std::string> out;
  for (const auto& t : g.triples()) {
    out.insert(g.entities().name(t.head));
    out.insert(g.entities().name(t.tail));
  }
  return out;
}

std::set<std::tuple<std::string, std::string, std::string>> named_triples(const KnowledgeGraph& g) {
  std::set<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& t : g.triples())
    out.emplace(g.entities().name(t.head), g.relations().name(t.relation), g.entities().name(t.tail));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Prepare, HeldOutEntitiesAbsentFromBackground) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto source = toy_source(seed);
    ASSERT_EQ(source.num_triples(), 100u);
    SplitSpec split;
    split.test = {"tq1", "tq2"};
    PrepareOptions opt;
    opt.n_cand = 5;
    opt.seed = seed;
    const auto bundle = prepare_bundle(source, split, opt);
    const auto bg = entity_names(bundle.background);
    ASSERT_EQ(bundle.test.size(), 2u);
    for (const auto& rec : bundle.test)
      for (const auto* part : {&rec.support, &rec.queries})
        for (const auto& t : *part) {
          EXPECT_FALSE(bg.contains(t.head)) << t.head;
          EXPECT_FALSE(bg.contains(t.tail)) << t.tail;
        }
    for (const auto& t : bundle.background.triples()) EXPECT_NE(bundle.background.relations().name(t.relation)[0], 't');
    EXPECT_EQ(bundle.background.num_triples() + bundle.ind_test.num_triples(), 88u);
  }
}

TEST(Prepare, EmptySpecKeepsSourceGraph) {
  const auto source = toy_source(3);
  const auto bundle = prepare_bundle(source, {}, {});
  EXPECT_EQ(bundle.background, source);
  EXPECT_EQ(bundle.ind_test.num_triples(), 0u);
  EXPECT_TRUE(bundle.train.empty() && bundle.valid.empty() && bundle.test.empty());
}

TEST(Prepare, UnknownRelationIsDataError) {
  SplitSpec split;
  split.test = {"nope", "tq1"};
  try {
    prepare_bundle(toy_source(1), split, {});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
}

TEST(Prepare, QueryFractionAndCandidates) {
  SplitSpec split;
  split.test = {"tq1"};
  PrepareOptions opt;
  opt.n_cand = 7;
  opt.query_fraction = 0.5;
  const auto bundle = prepare_bundle(toy_source(2), split, opt);
  ASSERT_EQ(bundle.test.size(), 1u);
  EXPECT_EQ(bundle.test[0].support.size(), 3u);
  EXPECT_EQ(bundle.test[0].queries.size(), 2u);
  for (const auto& c : bundle.test[0].candidates) EXPECT_EQ(c.size(), 7u);
  opt.query_fraction = 0.0;
  EXPECT_THROW(prepare_bundle(toy_source(2), split, opt), ConfigError);
}

TEST(Statistics, TableLayout) {
  SplitSpec split;
  split.test = {"tq1", "tq2"};
  PrepareOptions opt;
  opt.n_cand = 5;
  const auto stats = format_statistics(prepare_bundle(toy_source(4), split, opt));
  std::istringstream lines(stats);
  std::string header, bg, test;
  std::getline(lines, header);
  std::getline(lines, bg);
  std::getline(lines, test);
  const auto rels = header.find("#rels");
  const auto ents = header.find("#entities");
  const auto edges = header.find("#edges");
  const auto tasks = header.find("#tasks");
  ASSERT_NE(rels, std::string::npos);
  EXPECT_LT(rels, ents);
  EXPECT_LT(ents, edges);
  EXPECT_LT(edges, tasks);
  EXPECT_EQ(bg.rfind("Ind-BG", 0), 0u);
  EXPECT_EQ(test.rfind("Ind-Test", 0), 0u);
  EXPECT_EQ(bg.size(), header.size());
  EXPECT_EQ(test.size(), header.size());
  EXPECT_EQ(test.substr(test.size() - 1), "2");
}

TEST(Bundle, WriteReadRoundTrip) {
  const auto bundle = synthesize_bundle({});
  const auto dir = testing::scratch_dir("bundle");
  write_bundle(dir, bundle);
  const auto back = read_bundle(dir);
  EXPECT_EQ(named_triples(back.background), named_triples(bundle.background));
  EXPECT_EQ(named_triples(back.ind_test), named_triples(bundle.ind_test));
  EXPECT_EQ(back.train, bundle.train);
  EXPECT_EQ(back.valid, bundle.valid);
  EXPECT_EQ(back.test, bundle.test);
  EXPECT_THROW(read_bundle(dir / "missing"), DataError);
}

TEST(SplitSpecFile, ParsesAndRejects) {
  const auto dir = testing::scratch_dir("split");
  std::ofstream(dir / "ok.json") << R"({"train": ["a"], "test": ["b", "c"]})";
  const auto spec = read_split_spec(dir / "ok.json");
  EXPECT_EQ(spec.train, std::vector<std::string>{"a"});
  EXPECT_TRUE(spec.valid.empty());
  EXPECT_EQ(spec.test.size(), 2u);
  std::ofstream(dir / "bad.json") << R"({"other": []})";
  EXPECT_THROW(read_split_spec(dir / "bad.json"), DataError);
  EXPECT_THROW(read_split_spec(dir / "none.json"), DataError);
}

TEST(Synth, EveryPositiveSubgraphContainsItsChain) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthOptions opt;
    opt.seed = seed;
    const auto data = assemble_dataset(synthesize_bundle(opt));
    auto audit = [&](const KnowledgeGraph& g, const std::vector<FewShotTask>& tasks) {
      for (const auto& task : tasks)
        for (const auto* part : {&task.support, &task.queries})
          for (const auto& t : *part) {
            const auto chain = planted_chain(g, t, opt.first_relation, opt.second_relation);
            ASSERT_EQ(chain.size(), 2u);
            const auto sub = enclosing_subgraph(g, t.head, t.tail, 2, t.relation);
            const std::set<Triple> edges(sub.edges.begin(), sub.edges.end());
            for (const auto& c : chain) EXPECT_TRUE(edges.contains(c));
          }
    };
    audit(data.train_graph, data.train_tasks);
    audit(data.test_graph, data.valid_tasks);
    audit(data.test_graph, data.test_tasks);
  }
}

TEST(Synth, TaskRelationLabelsNoEdge) {
  const auto data = assemble_dataset(synthesize_bundle({}));
  for (const auto* g : {&data.train_graph, &data.test_graph})
    for (const auto& t : g->triples()) EXPECT_NE(g->relations().name(t.relation).substr(0, 2), "rq");
}

TEST(Synth, SameSeedSameBytes) {
  SynthOptions opt;
  opt.seed = 5;
  const auto a = testing::scratch_dir("synth_a");
  const auto b = testing::scratch_dir("synth_b");
  const auto c = testing::scratch_dir("synth_c");
  write_bundle(a, synthesize_bundle(opt));
  write_bundle(b, synthesize_bundle(opt));
  opt.seed = 6;
  write_bundle(c, synthesize_bundle(opt));
  for (const char* f : {"bg.tsv", "tasks/train.json", "tasks/valid.json", "tasks/test.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  EXPECT_NE(slurp(a / "bg.tsv"), slurp(c / "bg.tsv"));
}

TEST(Synth, ZeroDistractorsLeavesOnlyChainEdges) {
  SynthOptions opt;
  opt.distractors = 0;
  const auto data = assemble_dataset(synthesize_bundle(opt));
  for (const auto& t : data.test_graph.triples()) {
    const auto& name = data.test_graph.relations().name(t.relation);
    EXPECT_TRUE(name.starts_with("r1") || name.starts_with("r2")) << name;
  }
}

TEST(Synth, DegenerateSizesRejected) {
  SynthOptions opt;
  opt.pairs = 0;
  EXPECT_THROW(synthesize_bundle(opt), ConfigError);
  opt = {};
  opt.entities = 10;
  EXPECT_THROW(synthesize_bundle(opt), ConfigError);
  opt = {};
  opt.pairs = 5;
  EXPECT_THROW(synthesize_bundle(opt), ConfigError);
  opt = {};
  opt.target_relation = "r1";
  EXPECT_THROW(synthesize_bundle(opt), ConfigError);
}

}  // namespace
}  // namespace gsnp

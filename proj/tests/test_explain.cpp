// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gsnp/dataset.hpp"
#include "gsnp/error.hpp"
#include "gsnp/explain.hpp"
#include "helpers.hpp"

namespace gsnp {
namespace {

/// Every statement is a quoted-id node or edge with the attributes the writer emits, and braces balance.
bool dot_well_formed(const std::string& dot) {
  const std::string id = R"("(?:[^"\\]|\\.)*")";
  const std::regex label("  label=" + id + ";");
  const std::regex node("  " + id + R"( \[shape=doublecircle\];)");
  const std::regex edge("  " + id + " -> " + id + R"( \[label=)" + id + R"(, style=(solid|dashed)\];)");
  std::istringstream in(dot);
  std::string line;
  if (!std::getline(in, line) || line != "digraph explanation {") return false;
  int depth = 1;
  while (std::getline(in, line)) {
    if (line == "}") {
      --depth;
      continue;
    }
    if (depth != 1) return false;
    if (!std::regex_match(line, label) && !std::regex_match(line, node) && !std::regex_match(line, edge)) return false;
  }
  return depth == 0;
}

std::set<std::tuple<std::string, std::string, std::string>> kept_set(const Explanation& e) {
  std::set<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& k : e.kept) out.emplace(k.triple.head, k.triple.relation, k.triple.tail);
  return out;
}

struct Fixture {
  KnowledgeGraph kg;
  EnclosingSubgraph sub;
  Triple query;
};

Fixture two_edge_fixture() {
  auto kg = testing::graph_of({{"h", "r1", "m"}, {"m", "r2", "t"}});
  auto sub = EnclosingSubgraph::from_edges(0, 2, 2, {kg.triples().begin(), kg.triples().end()});
  return {std::move(kg), std::move(sub), Triple{0, 0, 2}};
}

TEST(Partition, ThresholdSplitsEdges) {
  const auto f = two_edge_fixture();
  const double probs[] = {0.9, 0.3};
  const auto e = partition_edges(f.kg, f.sub, probs, f.query, {});
  ASSERT_EQ(e.kept.size(), 1u);
  ASSERT_EQ(e.dropped.size(), 1u);
  EXPECT_EQ(e.kept[0].triple.relation, "r1");
  EXPECT_EQ(e.kept[0].p, 0.9);
  EXPECT_EQ(e.dropped[0].triple.relation, "r2");
  EXPECT_EQ(e.threshold, 0.5);
  EXPECT_FALSE(e.empty_subgraph);
}

TEST(Partition, ThresholdIsInclusiveAndValidated) {
  const auto f = two_edge_fixture();
  const double probs[] = {0.5, 0.4999};
  const auto e = partition_edges(f.kg, f.sub, probs, f.query, {});
  EXPECT_EQ(e.kept.size(), 1u);
  EXPECT_THROW(partition_edges(f.kg, f.sub, probs, f.query, {0.0}), ConfigError);
  EXPECT_THROW(partition_edges(f.kg, f.sub, probs, f.query, {1.0}), ConfigError);
  const double short_probs[] = {0.5};
  EXPECT_THROW(partition_edges(f.kg, f.sub, short_probs, f.query, {}), ShapeError);
}

TEST(Partition, RaisingThresholdNeverGrowsKeptSet) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint64_t g = 0; g < 30; ++g) {
    const auto kg = testing::random_graph(g, 15, 40, 3);
    const auto sub = enclosing_subgraph(kg, 0, 1, 2);
    std::vector<double> probs(sub.num_edges());
    for (auto& p : probs) p = u(rng);
    std::vector<double> thresholds{0.05, 0.2, 0.5, 0.7, 0.9, 0.99};
    std::set<std::tuple<std::string, std::string, std::string>> previous;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      const auto e = partition_edges(kg, sub, probs, Triple{0, 0, 1}, {thresholds[i]});
      EXPECT_EQ(e.kept.size() + e.dropped.size(), sub.num_edges());
      const auto kept = kept_set(e);
      if (i > 0) EXPECT_TRUE(std::includes(previous.begin(), previous.end(), kept.begin(), kept.end()));
      for (const auto& k : e.kept) EXPECT_GE(k.p, thresholds[i]);
      for (const auto& d : e.dropped) EXPECT_LT(d.p, thresholds[i]);
      previous = kept;
    }
  }
}

TEST(Partition, TopKKeepsMostProbable) {
  const auto kg = testing::graph_of({{"a", "r", "b"}, {"b", "r", "c"}, {"a", "s", "c"}, {"c", "s", "b"}});
  const auto sub = EnclosingSubgraph::from_edges(0, 2, 2, {kg.triples().begin(), kg.triples().end()});
  const double probs[] = {0.6, 0.95, 0.2, 0.8};
  const auto e = partition_edges(kg, sub, probs, Triple{0, 0, 2}, {0.5, 2});
  ASSERT_EQ(e.kept.size(), 2u);
  EXPECT_EQ(e.kept[0].p, 0.95);
  EXPECT_EQ(e.kept[1].p, 0.8);
  EXPECT_EQ(e.dropped.size(), 2u);
}

TEST(Export, DotIsWellFormed) {
  auto kg = testing::graph_of({{"h \"x\"", "r\\1", "m"}, {"m", "r2", "t"}});
  const auto sub = EnclosingSubgraph::from_edges(0, 2, 2, {kg.triples().begin(), kg.triples().end()});
  const double probs[] = {0.9, 0.1};
  const auto e = partition_edges(kg, sub, probs, Triple{0, 0, 2}, {});
  const auto dot = to_dot(e);
  EXPECT_TRUE(dot_well_formed(dot)) << dot;
  EXPECT_NE(dot.find("style=solid"), std::string::npos);
  EXPECT_NE(dot.find("style=dashed"), std::string::npos);
  EXPECT_NE(dot.find("0.900"), std::string::npos);
  EXPECT_FALSE(dot_well_formed("digraph explanation {\n  a -> b;\n}\n"));
}

TEST(Export, EmptyExplanationHasOnlyTheTwoNodes) {
  Explanation e;
  e.query = {"h", "rq", "t"};
  e.empty_subgraph = true;
  const auto dot = to_dot(e);
  EXPECT_TRUE(dot_well_formed(dot));
  EXPECT_EQ(dot.find("->"), std::string::npos);
  EXPECT_NE(dot.find("\"h\" [shape=doublecircle]"), std::string::npos);
  EXPECT_NE(dot.find("\"t\" [shape=doublecircle]"), std::string::npos);
}

TEST(Export, StructuredTextRoundTripAndByteStable) {
  const auto f = two_edge_fixture();
  const double probs[] = {0.123456789012345, 0.3};
  auto e = partition_edges(f.kg, f.sub, probs, f.query, {0.1});
  e.task_id = "concept:teamcoach";
  e.seed = 42;
  EXPECT_EQ(explanation_from_json(explanation_to_json(e)), e);
  const auto dir = testing::scratch_dir("explain");
  export_explanation(e, ExplainFormat::structured_text, dir / "a.json");
  export_explanation(e, ExplainFormat::structured_text, dir / "b.json");
  export_explanation(e, ExplainFormat::dot, dir / "a.dot");
  EXPECT_EQ(read_explanation(dir / "a.json"), e);
  std::ifstream a(dir / "a.json"), b(dir / "b.json");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  const auto j = nlohmann::json::parse(sa.str());
  for (const char* key : {"query", "kept", "dropped", "threshold", "task_id", "seed"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_THROW(export_explanation(e, ExplainFormat::dot, dir / "missing" / "x.dot"), DataError);
  EXPECT_THROW(read_explanation(dir / "none.json"), DataError);
  EXPECT_THROW(explanation_from_json(nlohmann::json::array()), DataError);
}

TEST(Extract, DeterministicAndCoversSubgraph) {
  const auto data = assemble_dataset(synthesize_bundle({}));
  const Model model(ModelConfig{6, 4, 2}, data.edge_relations(), 3);
  const auto index = model.relation_index(data.test_graph);
  const auto& task = data.test_tasks.front();
  const auto& q = task.queries.front();
  EvalConfig eval;
  eval.seed = 5;
  const auto a = extract_explanation(model, data.test_graph, index, task, q, eval);
  const auto b = extract_explanation(model, data.test_graph, index, task, q, eval);
  EXPECT_EQ(a, b);
  const auto sub = enclosing_subgraph(data.test_graph, q.head, q.tail, eval.hop, q.relation);
  EXPECT_EQ(a.kept.size() + a.dropped.size(), sub.num_edges());
  EXPECT_EQ(a.task_id, task.id);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_EQ(to_dot(a), to_dot(b));
}

TEST(Extract, EmptySubgraphIsFlagged) {
  const auto data = assemble_dataset(synthesize_bundle({}));
  const Model model(ModelConfig{6, 4, 2}, data.edge_relations(), 3);
  const auto index = model.relation_index(data.test_graph);
  const auto& task = data.test_tasks.front();
  const auto& graph = data.test_graph;
  const Triple q{task.queries.front().head, task.relation_id(), task.queries.front().head};
  const auto sub = enclosing_subgraph(graph, q.head, q.tail, 0, q.relation);
  ASSERT_TRUE(sub.edges.empty());
  EvalConfig eval;
  eval.hop = 0;
  const auto e = extract_explanation(model, graph, index, task, q, eval);
  EXPECT_TRUE(e.empty_subgraph);
  EXPECT_TRUE(e.kept.empty() && e.dropped.empty());
  EXPECT_TRUE(dot_well_formed(to_dot(e)));
}

TEST(Precision, KeptPrecisionAndCoverage) {
  Explanation e;
  e.kept = {{{"a", "r1", "b"}, 0.9}, {{"x", "s", "y"}, 0.8}};
  const NamedTriple relevant[] = {{"a", "r1", "b"}, {"b", "r2", "c"}};
  EXPECT_EQ(kept_precision(e, relevant), 0.5);
  EXPECT_EQ(kept_coverage(e, relevant), 0.5);
  EXPECT_EQ(kept_precision(Explanation{}, relevant), 0.0);
  EXPECT_EQ(kept_coverage(e, {}), 1.0);
}

}  // namespace
}  // namespace gsnp

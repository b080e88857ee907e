// SPDX-License-Identifier: Apache-2.0
#include "gsnp/explain.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsnp/encoder.hpp"
#include "gsnp/error.hpp"
#include "gsnp/predictor.hpp"

namespace gsnp {

namespace {

NamedTriple named(const KnowledgeGraph& graph, const Triple& t) {
  return {graph.entities().name(t.head), graph.relations().name(t.relation), graph.entities().name(t.tail)};
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + '"';
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

nlohmann::json triple_json(const NamedTriple& t) { return nlohmann::json::array({t.head, t.relation, t.tail}); }

NamedTriple triple_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("explanation: a triple must be a [head, relation, tail] array");
  return {j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

nlohmann::json edges_json(const std::vector<WeightedEdge>& edges) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : edges) out.push_back({{"triple", triple_json(e.triple)}, {"p", e.p}});
  return out;
}

std::vector<WeightedEdge> edges_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("explanation: edge lists must be arrays");
  std::vector<WeightedEdge> out;
  for (const auto& e : j) out.push_back({triple_from_json(e.at("triple")), e.at("p").get<double>()});
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

Explanation partition_edges(const KnowledgeGraph& graph, const EnclosingSubgraph& sub, std::span<const double> probs,
                            const Triple& query, const ExplainOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0))
    throw ConfigError("explanation threshold must lie in (0, 1)");
  if (probs.size() != sub.num_edges())
    throw ShapeError("partition_edges: " + std::to_string(probs.size()) + " probabilities for " +
                     std::to_string(sub.num_edges()) + " edges");
  std::vector<bool> keep(sub.num_edges(), false);
  std::vector<std::size_t> above;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] >= options.threshold) above.push_back(i);
  if (options.top_k > 0 && above.size() > options.top_k) {
    std::stable_sort(above.begin(), above.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    above.resize(options.top_k);
  }
  for (std::size_t i : above) keep[i] = true;

  Explanation exp;
  exp.query = named(graph, query);
  exp.threshold = options.threshold;
  exp.empty_subgraph = sub.num_edges() == 0;
  for (std::size_t i = 0; i < sub.num_edges(); ++i)
    (keep[i] ? exp.kept : exp.dropped).push_back({named(graph, sub.edges[i]), probs[i]});
  return exp;
}

Explanation extract_explanation(const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                                const FewShotTask& task, const Triple& query, const EvalConfig& eval,
                                const ExplainOptions& options) {
  const TaskPrior prior = encode_task_prior(model, graph, index, task, eval);
  const auto sub = enclosing_subgraph(graph, query.head, query.tail, eval.hop, query.relation);
  std::vector<double> probs;
  if (sub.num_edges() > 0) {
    Tape tape;
    tape.set_grad_enabled(false);
    const auto enc = encode_subgraph(tape, model, sub, index);
    const Tensor p = fuse_hypothesis(tape, model, enc.final_edge_states, tape.constant(prior.mu));
    probs.assign(p.value().data(), p.value().data() + p.value().size());
  }
  Explanation exp = partition_edges(graph, sub, probs, query, options);
  exp.task_id = task.id;
  exp.seed = eval.seed;
  return exp;
}

std::string to_dot(const Explanation& exp) {
  std::ostringstream out;
  out << "digraph explanation {\n";
  out << "  label=" << quote(exp.query.head + " " + exp.query.relation + " " + exp.query.tail) << ";\n";
  out << "  " << quote(exp.query.head) << " [shape=doublecircle];\n";
  if (exp.query.tail != exp.query.head) out << "  " << quote(exp.query.tail) << " [shape=doublecircle];\n";
  for (const auto& e : exp.kept)
    out << "  " << quote(e.triple.head) << " -> " << quote(e.triple.tail)
        << " [label=" << quote(e.triple.relation + " " + fixed3(e.p)) << ", style=solid];\n";
  for (const auto& e : exp.dropped)
    out << "  " << quote(e.triple.head) << " -> " << quote(e.triple.tail)
        << " [label=" << quote(e.triple.relation + " " + fixed3(e.p)) << ", style=dashed];\n";
  out << "}\n";
  return out.str();
}

nlohmann::json explanation_to_json(const Explanation& exp) {
  return {{"query", triple_json(exp.query)},
          {"kept", edges_json(exp.kept)},
          {"dropped", edges_json(exp.dropped)},
          {"threshold", exp.threshold},
          {"task_id", exp.task_id},
          {"seed", exp.seed},
          {"empty_subgraph", exp.empty_subgraph}};
}

Explanation explanation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("explanation: expected a JSON object");
  try {
    Explanation exp;
    exp.query = triple_from_json(j.at("query"));
    exp.kept = edges_from_json(j.at("kept"));
    exp.dropped = edges_from_json(j.at("dropped"));
    exp.threshold = j.at("threshold").get<double>();
    exp.task_id = j.at("task_id").get<std::string>();
    exp.seed = j.at("seed").get<std::uint64_t>();
    exp.empty_subgraph = j.value("empty_subgraph", exp.kept.empty() && exp.dropped.empty());
    return exp;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("explanation: ") + e.what());
  }
}

void export_explanation(const Explanation& exp, ExplainFormat format, const std::filesystem::path& path) {
  if (format == ExplainFormat::dot) {
    write_file(path, to_dot(exp));
  } else {
    write_file(path, explanation_to_json(exp).dump(2) + "\n");
  }
}

Explanation read_explanation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return explanation_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

double kept_precision(const Explanation& exp, std::span<const NamedTriple> relevant) {
  if (exp.kept.empty()) return 0.0;
  const auto hits = std::count_if(exp.kept.begin(), exp.kept.end(), [&](const WeightedEdge& e) {
    return std::find(relevant.begin(), relevant.end(), e.triple) != relevant.end();
  });
  return static_cast<double>(hits) / static_cast<double>(exp.kept.size());
}

double kept_coverage(const Explanation& exp, std::span<const NamedTriple> relevant) {
  if (relevant.empty()) return 1.0;
  const auto hits = std::count_if(relevant.begin(), relevant.end(), [&](const NamedTriple& t) {
    return std::any_of(exp.kept.begin(), exp.kept.end(), [&](const WeightedEdge& e) { return e.triple == t; });
  });
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

}  // namespace gsnp

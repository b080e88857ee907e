// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsnp/evaluator.hpp"
#include "gsnp/graph.hpp"
#include "gsnp/model.hpp"
#include "gsnp/tasks.hpp"

namespace gsnp {

inline constexpr double kDefaultExplainThreshold = 0.5;

struct WeightedEdge {
  NamedTriple triple;
  double p = 0.0;
  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Hard subgraph of one query: edges with p >= threshold are kept, the rest
/// dropped, both in subgraph edge order.
struct Explanation {
  NamedTriple query;
  std::vector<WeightedEdge> kept;
  std::vector<WeightedEdge> dropped;
  double threshold = kDefaultExplainThreshold;
  std::string task_id;
  std::uint64_t seed = 0;
  /// Set when the query subgraph has no edges.
  bool empty_subgraph = false;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

struct ExplainOptions {
  double threshold = kDefaultExplainThreshold;
  /// When nonzero, only the top_k most probable edges above the threshold are kept.
  std::size_t top_k = 0;
};

/// Edge probabilities for the query's enclosing subgraph under z = mu of the
/// task prior. `eval` supplies the seed, hop and support size for the prior.
Explanation extract_explanation(const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                                const FewShotTask& task, const Triple& query, const EvalConfig& eval,
                                const ExplainOptions& options = {});

/// Thresholds precomputed probabilities; `probs` follows `sub.edges`.
Explanation partition_edges(const KnowledgeGraph& graph, const EnclosingSubgraph& sub, std::span<const double> probs,
                            const Triple& query, const ExplainOptions& options);

enum class ExplainFormat { dot, structured_text };

std::string to_dot(const Explanation& exp);
nlohmann::json explanation_to_json(const Explanation& exp);
Explanation explanation_from_json(const nlohmann::json& j);

void export_explanation(const Explanation& exp, ExplainFormat format, const std::filesystem::path& path);
Explanation read_explanation(const std::filesystem::path& path);

/// Fraction of kept edges found in `relevant`; 0 when nothing is kept.
double kept_precision(const Explanation& exp, std::span<const NamedTriple> relevant);
/// Fraction of `relevant` edges that were kept; 1 when `relevant` is empty.
double kept_coverage(const Explanation& exp, std::span<const NamedTriple> relevant);

}  // namespace gsnp

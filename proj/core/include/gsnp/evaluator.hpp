// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsnp/graph.hpp"
#include "gsnp/model.hpp"
#include "gsnp/tasks.hpp"

namespace gsnp {

struct RankingResult {
  Triple query;
  std::size_t rank = 0;
  /// Score of the true tail first, then one per candidate.
  std::vector<double> scores;
};

struct TaskMetrics {
  std::string task_id;
  std::string relation;
  double mrr = 0.0;
  double hit1 = 0.0;
  double hit5 = 0.0;
  double hit10 = 0.0;
  std::size_t n_queries = 0;
};

struct MetricsReport {
  double mrr = 0.0;
  double hit1 = 0.0;
  double hit5 = 0.0;
  double hit10 = 0.0;
  std::size_t n_queries = 0;
  std::vector<TaskMetrics> per_task;

  nlohmann::json to_json() const;
  /// Tab-separated rows: one per task, then an ALL row.
  std::string to_table() const;
};

/// 1 + #candidates scoring strictly higher + floor(#ties / 2).
std::size_t rank_from_scores(double true_score, std::span<const double> candidate_scores);
RankingResult rank_with_scores(const Triple& query, std::vector<double> scores);

/// Throws DataError for an empty list.
TaskMetrics compute_task_metrics(std::span<const RankingResult> results);
MetricsReport compute_metrics(std::span<const RankingResult> results);

struct EvalConfig {
  /// Support triples used per task; 0 keeps them all.
  std::size_t shots = 0;
  /// Prior samples whose scores are averaged.
  std::size_t samples = 1;
  /// Sample the relaxed mask (seeded) instead of using the probabilities.
  bool sample_mask = true;
  std::uint64_t seed = 0;
  std::size_t negatives_per_support = 1;
  int hop = 2;
  double temperature = 1.0;
  /// Candidates drawn for queries whose task carries none.
  std::size_t n_cand = 50;
};

/// Prior hypothesis of an evaluation task: the support cut to `shots`,
/// deterministic support negatives and the prior mean and scale.
struct TaskPrior {
  FewShotTask task;
  Matrix mu;
  Matrix sigma;
};

TaskPrior encode_task_prior(const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                            const FewShotTask& task, const EvalConfig& config);

/// Scores (head, relation, tail) for the queries of one task. Scores are a
/// pure function of (task, query index, tail): z samples are seeded by the
/// task id and mask noise by (task, query, tail).
class TaskScorer {
 public:
  TaskScorer(const Model& model, const KnowledgeGraph& graph, const RelationIndex& index, const FewShotTask& task,
             const EvalConfig& config);

  const FewShotTask& task() const noexcept { return prior_.task; }
  const TaskPrior& prior() const noexcept { return prior_; }
  const std::vector<Matrix>& samples() const noexcept { return z_; }

  double score(std::size_t query_index, EntityId tail) const;

 private:
  const Model& model_;
  const KnowledgeGraph& graph_;
  const RelationIndex& index_;
  EvalConfig config_;
  TaskPrior prior_;
  std::vector<Matrix> z_;
};

/// Ranks the true tail of query `query_index` against `candidates`.
RankingResult rank_query(const TaskScorer& scorer, std::size_t query_index, std::span<const EntityId> candidates);

/// Fills in missing candidate pools (seeded per task and query).
std::vector<FewShotTask> with_candidates(const KnowledgeGraph& graph, std::span<const FewShotTask> tasks,
                                         const EvalConfig& config);

using ScoreTable = std::function<double(const FewShotTask& task, std::size_t query_index, EntityId tail)>;

/// Metrics from an arbitrary scorer; every task must carry candidates.
MetricsReport evaluate_with_scores(std::span<const FewShotTask> tasks, const ScoreTable& scores);

MetricsReport evaluate_split(const Model& model, const KnowledgeGraph& graph, std::span<const FewShotTask> tasks,
                             const EvalConfig& config);

}  // namespace gsnp

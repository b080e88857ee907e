// SPDX-License-Identifier: Apache-2.0
#include "gsnp/evaluator.hpp"

#include <iomanip>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsnp/encoder.hpp"
#include "gsnp/error.hpp"
#include "gsnp/hypothesis.hpp"
#include "gsnp/predictor.hpp"

namespace gsnp {

std::size_t rank_from_scores(double true_score, std::span<const double> candidate_scores) {
  std::size_t greater = 0;
  std::size_t ties = 0;
  for (double s : candidate_scores) {
    if (s > true_score) {
      ++greater;
    } else if (s == true_score) {
      ++ties;
    }
  }
  return 1 + greater + ties / 2;
}

RankingResult rank_with_scores(const Triple& query, std::vector<double> scores) {
  if (scores.empty()) throw DataError("rank_with_scores: no score for the true tail");
  RankingResult r;
  r.query = query;
  r.rank = rank_from_scores(scores.front(), std::span<const double>(scores).subspan(1));
  r.scores = std::move(scores);
  return r;
}

TaskMetrics compute_task_metrics(std::span<const RankingResult> results) {
  if (results.empty()) throw DataError("compute_metrics: no ranking results");
  TaskMetrics m;
  for (const auto& r : results) {
    if (r.rank == 0) throw DataError("ranks are 1-based");
    m.mrr += 1.0 / static_cast<double>(r.rank);
    m.hit1 += r.rank <= 1 ? 1.0 : 0.0;
    m.hit5 += r.rank <= 5 ? 1.0 : 0.0;
    m.hit10 += r.rank <= 10 ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(results.size());
  m.mrr /= n;
  m.hit1 /= n;
  m.hit5 /= n;
  m.hit10 /= n;
  m.n_queries = results.size();
  return m;
}

MetricsReport compute_metrics(std::span<const RankingResult> results) {
  const TaskMetrics all = compute_task_metrics(results);
  MetricsReport report;
  report.mrr = all.mrr;
  report.hit1 = all.hit1;
  report.hit5 = all.hit5;
  report.hit10 = all.hit10;
  report.n_queries = all.n_queries;
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : per_task)
    tasks.push_back({{"task_id", t.task_id},
                     {"relation", t.relation},
                     {"mrr", t.mrr},
                     {"hit1", t.hit1},
                     {"hit5", t.hit5},
                     {"hit10", t.hit10},
                     {"n_queries", t.n_queries}});
  return {{"mrr", mrr}, {"hit1", hit1}, {"hit5", hit5}, {"hit10", hit10}, {"n_queries", n_queries}, {"per_task", tasks}};
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "task\trelation\tn_queries\tmrr\thit1\thit5\thit10\n";
  for (const auto& t : per_task)
    out << t.task_id << '\t' << t.relation << '\t' << t.n_queries << '\t' << t.mrr << '\t' << t.hit1 << '\t' << t.hit5
        << '\t' << t.hit10 << '\n';
  out << "ALL\t-\t" << n_queries << '\t' << mrr << '\t' << hit1 << '\t' << hit5 << '\t' << hit10 << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

TaskPrior encode_task_prior(const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                            const FewShotTask& task, const EvalConfig& config) {
  TaskPrior prior;
  prior.task = task;
  auto& t = prior.task;
  if (t.support.empty()) throw DataError("task '" + t.id + "' has no support triples");
  if (config.shots > 0) {
    if (config.shots > t.support.size())
      throw ConfigError("task '" + t.id + "' has " + std::to_string(t.support.size()) + " support triples, " +
                        std::to_string(config.shots) + " requested");
    t.other_positives.insert(t.other_positives.end(), t.support.begin() + static_cast<std::ptrdiff_t>(config.shots),
                             t.support.end());
    t.support.resize(config.shots);
  }
  SampleOptions options;
  options.negatives_per_support = config.negatives_per_support;
  options.query_negatives = false;
  EpisodeRng rng(task_seed(config.seed, t.id));
  attach_negatives(graph, t, rng, options);

  Tape tape;
  tape.set_grad_enabled(false);
  std::vector<LabeledEmbedding> inputs;
  auto encode = [&](const Triple& x, int label) {
    const auto sub = enclosing_subgraph(graph, x.head, x.tail, config.hop, x.relation);
    inputs.push_back({encode_subgraph(tape, model, sub, index).embedding, label});
  };
  for (const auto& s : t.support) encode(s, 1);
  for (const auto& s : t.support_negatives) encode(s, 0);
  const auto dist = encode_hypothesis(tape, model, inputs, HypothesisSource::prior);
  prior.mu = dist.mu.value();
  prior.sigma = dist.sigma.value();
  return prior;
}

TaskScorer::TaskScorer(const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                       const FewShotTask& task, const EvalConfig& config)
    : model_(model), graph_(graph), index_(index), config_(config),
      prior_(encode_task_prior(model, graph, index, task, config)) {
  if (config.samples == 0) throw ConfigError("evaluation needs at least one hypothesis sample");
  NoiseStream noise(task_seed(config.seed, prior_.task.id));
  for (std::size_t s = 0; s < config.samples; ++s) {
    Matrix eps(prior_.mu.rows(), prior_.mu.cols());
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = noise.normal();
    z_.push_back(prior_.mu + prior_.sigma.cwiseProduct(eps));
  }
}

double TaskScorer::score(std::size_t query_index, EntityId tail) const {
  const Triple& q = prior_.task.queries.at(query_index);
  const auto sub = enclosing_subgraph(graph_, q.head, tail, config_.hop, q.relation);
  Tape tape;
  tape.set_grad_enabled(false);
  const auto enc = encode_subgraph(tape, model_, sub, index_);
  NoiseStream noise(mix_seed(task_seed(config_.seed, prior_.task.id), (std::uint64_t{query_index} << 32) ^ tail));
  double total = 0.0;
  for (const auto& zv : z_) {
    const Tensor z = tape.constant(zv);
    const Tensor probs = fuse_hypothesis(tape, model_, enc.final_edge_states, z);
    const EdgeMask mask = config_.sample_mask ? sample_mask(probs, config_.temperature, noise) : expected_mask(probs);
    total += gsnp::score(tape, model_, apply_mask(sub, mask), index_, z).item();
  }
  return total / static_cast<double>(z_.size());
}

RankingResult rank_query(const TaskScorer& scorer, std::size_t query_index, std::span<const EntityId> candidates) {
  const Triple& q = scorer.task().queries.at(query_index);
  std::vector<double> scores;
  scores.reserve(candidates.size() + 1);
  scores.push_back(scorer.score(query_index, q.tail));
  for (EntityId c : candidates) {
    if (c == q.tail) throw DataError("candidate pool contains the true tail of " + std::to_string(query_index));
    scores.push_back(scorer.score(query_index, c));
  }
  return rank_with_scores(q, std::move(scores));
}

std::vector<FewShotTask> with_candidates(const KnowledgeGraph& graph, std::span<const FewShotTask> tasks,
                                         const EvalConfig& config) {
  std::vector<FewShotTask> out(tasks.begin(), tasks.end());
  std::vector<EntityId> pool;
  for (auto& t : out) {
    if (!t.candidates.empty()) continue;
    if (pool.empty()) pool = all_entities(graph);
    const auto positives = t.positives();
    for (std::size_t q = 0; q < t.queries.size(); ++q) {
      EpisodeRng rng(task_seed(config.seed, t.id + "#" + std::to_string(q)));
      t.candidates.push_back(build_eval_candidates(graph, t.queries[q], pool, config.n_cand, rng, positives));
    }
  }
  return out;
}

namespace {

MetricsReport evaluate_tasks(std::span<const FewShotTask> tasks,
                             const std::function<RankingResult(std::size_t task, std::size_t query)>& rank) {
  MetricsReport report;
  std::vector<RankingResult> all;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    if (t.candidates.size() != t.queries.size())
      throw DataError("task '" + t.id + "' lacks a candidate pool for every query");
    std::vector<RankingResult> results;
    for (std::size_t q = 0; q < t.queries.size(); ++q) results.push_back(rank(i, q));
    if (results.empty()) continue;
    TaskMetrics m = compute_task_metrics(results);
    m.task_id = t.id;
    m.relation = t.relation;
    report.per_task.push_back(m);
    all.insert(all.end(), results.begin(), results.end());
  }
  const auto overall = compute_metrics(all);
  report.mrr = overall.mrr;
  report.hit1 = overall.hit1;
  report.hit5 = overall.hit5;
  report.hit10 = overall.hit10;
  report.n_queries = overall.n_queries;
  return report;
}

}  // namespace

MetricsReport evaluate_with_scores(std::span<const FewShotTask> tasks, const ScoreTable& scores) {
  return evaluate_tasks(tasks, [&](std::size_t i, std::size_t q) {
    const auto& t = tasks[i];
    std::vector<double> s{scores(t, q, t.queries[q].tail)};
    for (EntityId c : t.candidates[q]) s.push_back(scores(t, q, c));
    return rank_with_scores(t.queries[q], std::move(s));
  });
}

MetricsReport evaluate_split(const Model& model, const KnowledgeGraph& graph, std::span<const FewShotTask> tasks,
                             const EvalConfig& config) {
  const auto prepared = with_candidates(graph, tasks, config);
  const auto index = model.relation_index(graph);
  std::unique_ptr<TaskScorer> scorer;
  std::size_t current = prepared.size();
  return evaluate_tasks(prepared, [&](std::size_t i, std::size_t q) {
    if (i != current) {
      scorer = std::make_unique<TaskScorer>(model, graph, index, prepared[i], config);
      current = i;
    }
    return rank_query(*scorer, q, prepared[i].candidates[q]);
  });
}

}  // namespace gsnp

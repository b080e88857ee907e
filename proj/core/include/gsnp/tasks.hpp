// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsnp/graph.hpp"
#include "gsnp/random.hpp"

namespace gsnp {

using TripleSet = std::unordered_set<Triple, TripleHash>;

/// One few-shot episode for a single relation.
struct FewShotTask {
  std::string id;
  std::string relation;
  std::vector<Triple> support;
  /// n_neg corruptions per support triple, grouped by support triple.
  std::vector<Triple> support_negatives;
  std::vector<Triple> queries;
  /// One corruption per query (training only).
  std::vector<Triple> query_negatives;
  /// Candidate tails per query (evaluation only).
  std::vector<std::vector<EntityId>> candidates;
  /// Positives of the relation left out of support and queries.
  std::vector<Triple> other_positives;

  std::size_t shots() const noexcept { return support.size(); }
  /// Support, queries and any other known positives of the relation.
  TripleSet positives() const;
  /// Id of the task relation in the graph its triples were resolved against.
  RelationId relation_id() const;
};

struct SampleOptions {
  std::size_t negatives_per_support = 1;
  /// Cap on queries kept after the support split; 0 keeps all.
  std::size_t max_queries = 0;
  bool query_negatives = true;
};

/// Shuffles `relation_triples` with `rng`; the first K become support and
/// the rest queries. Negatives come from the local negative pool with a
/// fallback to every entity. Throws DataError for fewer than K + 1 triples.
FewShotTask sample_task(const KnowledgeGraph& kg, std::span<const Triple> relation_triples, std::size_t K,
                        EpisodeRng& rng, const SampleOptions& options = {});

/// Replaces the head or the tail (fair coin) by a pool entity so that the
/// result is neither in `kg` nor in `positives`. When the chosen side has no
/// valid replacement the other side is used; throws DataError if neither has one.
Triple corrupt_triple(const KnowledgeGraph& kg, const Triple& triple, std::span<const EntityId> pool,
                      EpisodeRng& rng, const TripleSet& positives = {});

/// `n_cand` distinct tails e from `pool` with e != query.tail and
/// (head, relation, e) neither in `kg` nor in `positives`, in draw order.
/// Throws DataError if fewer than n_cand qualify.
std::vector<EntityId> build_eval_candidates(const KnowledgeGraph& kg, const Triple& query,
                                            std::span<const EntityId> pool, std::size_t n_cand, EpisodeRng& rng,
                                            const TripleSet& positives = {});

/// Entities within two hops of any endpoint of `triples`, ascending.
std::vector<EntityId> local_negative_pool(const KnowledgeGraph& kg, std::span<const Triple> triples, int hops = 2);
std::vector<EntityId> all_entities(const KnowledgeGraph& kg);

/// Adds support negatives (and, if requested, query negatives) in place.
void attach_negatives(const KnowledgeGraph& kg, FewShotTask& task, EpisodeRng& rng, const SampleOptions& options);

/// Stable 64-bit hash of a task id, used to seed per-task streams.
std::uint64_t task_seed(std::uint64_t seed, const std::string& task_id);

// Task files hold a JSON array of records with keys relation, support,
// queries and optionally candidates and id. Triples are [head, relation, tail]
// name lists.

struct NamedTriple {
  std::string head;
  std::string relation;
  std::string tail;
  friend bool operator==(const NamedTriple&, const NamedTriple&) = default;
};

struct TaskRecord {
  std::string id;
  std::string relation;
  std::vector<NamedTriple> support;
  std::vector<NamedTriple> queries;
  std::vector<std::vector<std::string>> candidates;
  friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

std::vector<TaskRecord> read_task_records(const std::filesystem::path& path);
std::vector<TaskRecord> task_records_from_json(const nlohmann::json& j, const std::string& source);
void write_task_records(const std::filesystem::path& path, std::span<const TaskRecord> records);
nlohmann::json task_records_to_json(std::span<const TaskRecord> records);

/// Resolves names against `kg`; throws DataError on unknown names or on a
/// triple whose relation differs from the record's.
FewShotTask resolve_task(const TaskRecord& record, const KnowledgeGraph& kg);
TaskRecord to_record(const FewShotTask& task, const KnowledgeGraph& kg);

}  // namespace gsnp

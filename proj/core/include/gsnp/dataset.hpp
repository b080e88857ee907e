// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gsnp/graph.hpp"
#include "gsnp/tasks.hpp"

namespace gsnp {

/// On-disk bundle: bg.tsv, optional ind_test.tsv and tasks/{train,valid,test}.json.
struct Bundle {
  KnowledgeGraph background;
  KnowledgeGraph ind_test;
  std::vector<TaskRecord> train;
  std::vector<TaskRecord> valid;
  std::vector<TaskRecord> test;
};

Bundle read_bundle(const std::filesystem::path& dir);
/// Writes every file of the bundle; ind_test.tsv only when it has triples.
void write_bundle(const std::filesystem::path& dir, const Bundle& bundle);

/// Bundle resolved into graphs with inverse edges. Both graphs share one
/// vocabulary, so ids are interchangeable: `train_graph` holds the
/// background triples, `test_graph` the background merged with ind_test.
/// Task entities and relations are interned even without incident triples.
struct Dataset {
  KnowledgeGraph train_graph;
  KnowledgeGraph test_graph;
  std::vector<FewShotTask> train_tasks;
  std::vector<FewShotTask> valid_tasks;
  std::vector<FewShotTask> test_tasks;

  /// Relations labelling at least one edge of either graph.
  std::vector<std::string> edge_relations() const;
  /// Support and query triples of the training tasks, grouped by relation.
  std::map<RelationId, std::vector<Triple>> train_relation_triples() const;
};

Dataset assemble_dataset(const Bundle& bundle);
Dataset load_dataset(const std::filesystem::path& dir);

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;

  bool empty() const { return train.empty() && valid.empty() && test.empty(); }
};

/// JSON object with optional arrays "train", "valid", "test" of relation names.
SplitSpec read_split_spec(const std::filesystem::path& path);

struct PrepareOptions {
  std::size_t shots = 3;
  std::size_t n_cand = 50;
  /// Fraction of each held-out task's queries kept (at least one).
  double query_fraction = 1.0;
  std::uint64_t seed = 0;
};

/// Removes every entity of the valid/test tasks and its one-hop neighbours
/// from the source to form the background; triples touching removed
/// entities form ind_test. Task-relation triples label no edge in either
/// graph. Throws DataError for split relations missing from the source.
Bundle prepare_bundle(const KnowledgeGraph& source, const SplitSpec& split, const PrepareOptions& options);

/// Rows in the layout of a dataset statistics table:
/// #rels, #entities, #edges, #tasks for Ind-BG and Ind-Test.
std::string format_statistics(const Bundle& bundle);

struct SynthOptions {
  std::size_t entities = 60;
  std::size_t pairs = 20;
  std::size_t distractors = 40;
  std::size_t distractor_relations = 3;
  std::string first_relation = "r1";
  std::string second_relation = "r2";
  std::string target_relation = "rq";
  std::size_t valid_queries = 3;
  std::size_t test_queries = 5;
  std::size_t shots = 3;
  std::size_t n_cand = 10;
  std::uint64_t seed = 0;
};

/// Planted-rule bundle: (h, r1, m) and (m, r2, t) for every planted pair,
/// random distractor edges on separate relations, and tasks of the target
/// relation, which holds exactly for the planted pairs. Throws ConfigError
/// for degenerate sizes.
Bundle synthesize_bundle(const SynthOptions& options);

/// Planted chain (h, r1, m), (m, r2, t) of a target pair, looked up in `kg`.
std::vector<Triple> planted_chain(const KnowledgeGraph& kg, const Triple& target, const std::string& first_relation,
                                  const std::string& second_relation);

}  // namespace gsnp

// SPDX-License-Identifier: Apache-2.0
#include "gsnp/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "gsnp/error.hpp"

namespace gsnp {

TripleSet FewShotTask::positives() const {
  TripleSet out(support.begin(), support.end());
  out.insert(queries.begin(), queries.end());
  out.insert(other_positives.begin(), other_positives.end());
  return out;
}

RelationId FewShotTask::relation_id() const {
  if (!support.empty()) return support.front().relation;
  if (!queries.empty()) return queries.front().relation;
  throw DataError("task '" + id + "' has no triples");
}

std::vector<EntityId> all_entities(const KnowledgeGraph& kg) {
  std::vector<EntityId> out(kg.num_entities());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<EntityId>(i);
  return out;
}

std::vector<EntityId> local_negative_pool(const KnowledgeGraph& kg, std::span<const Triple> triples, int hops) {
  std::set<EntityId> pool;
  std::set<EntityId> centers;
  for (const auto& t : triples) {
    centers.insert(t.head);
    centers.insert(t.tail);
  }
  for (EntityId c : centers)
    for (const auto& [e, d] : bfs_ball(kg, c, hops)) pool.insert(e);
  return {pool.begin(), pool.end()};
}

namespace {

bool rejected(const KnowledgeGraph& kg, const Triple& t, const TripleSet& positives) {
  return kg.contains(t) || positives.contains(t);
}

std::vector<Triple> side_candidates(const KnowledgeGraph& kg, const Triple& triple, std::span<const EntityId> pool,
                                    const TripleSet& positives, bool replace_head) {
  std::vector<Triple> out;
  for (EntityId e : pool) {
    Triple c = triple;
    (replace_head ? c.head : c.tail) = e;
    if (!rejected(kg, c, positives) && c != triple) out.push_back(c);
  }
  return out;
}

}  // namespace

Triple corrupt_triple(const KnowledgeGraph& kg, const Triple& triple, std::span<const EntityId> pool,
                      EpisodeRng& rng, const TripleSet& positives) {
  const bool head_first = rng.coin();
  auto options = side_candidates(kg, triple, pool, positives, head_first);
  if (options.empty()) options = side_candidates(kg, triple, pool, positives, !head_first);
  if (options.empty()) throw DataError("negative pool exhausted for " + kg.describe(triple));
  return options[rng.index(options.size())];
}

std::vector<EntityId> build_eval_candidates(const KnowledgeGraph& kg, const Triple& query,
                                            std::span<const EntityId> pool, std::size_t n_cand, EpisodeRng& rng,
                                            const TripleSet& positives) {
  std::vector<EntityId> valid;
  std::set<EntityId> seen;
  for (EntityId e : pool) {
    if (e == query.tail || !seen.insert(e).second) continue;
    if (!rejected(kg, Triple{query.head, query.relation, e}, positives)) valid.push_back(e);
  }
  if (valid.size() < n_cand)
    throw DataError("only " + std::to_string(valid.size()) + " candidate tails available for " +
                    kg.describe(query) + ", need " + std::to_string(n_cand));
  for (std::size_t i = 0; i < n_cand; ++i) std::swap(valid[i], valid[i + rng.index(valid.size() - i)]);
  valid.resize(n_cand);
  return valid;
}

void attach_negatives(const KnowledgeGraph& kg, FewShotTask& task, EpisodeRng& rng, const SampleOptions& options) {
  std::vector<Triple> all = task.support;
  all.insert(all.end(), task.queries.begin(), task.queries.end());
  const auto local = local_negative_pool(kg, all);
  const auto positives = task.positives();
  std::vector<EntityId> everything;
  auto corrupt = [&](const Triple& t) {
    try {
      return corrupt_triple(kg, t, local, rng, positives);
    } catch (const DataError&) {
      if (everything.empty()) everything = all_entities(kg);
      return corrupt_triple(kg, t, everything, rng, positives);
    }
  };
  task.support_negatives.clear();
  for (const auto& s : task.support)
    for (std::size_t j = 0; j < options.negatives_per_support; ++j) task.support_negatives.push_back(corrupt(s));
  task.query_negatives.clear();
  if (options.query_negatives)
    for (const auto& q : task.queries) task.query_negatives.push_back(corrupt(q));
}

FewShotTask sample_task(const KnowledgeGraph& kg, std::span<const Triple> relation_triples, std::size_t K,
                        EpisodeRng& rng, const SampleOptions& options) {
  if (K == 0) throw ConfigError("shot count K must be at least 1");
  if (relation_triples.size() < K + 1)
    throw DataError("relation has " + std::to_string(relation_triples.size()) + " triples, need at least " +
                    std::to_string(K + 1));
  std::vector<Triple> pool(relation_triples.begin(), relation_triples.end());
  const RelationId r = pool.front().relation;
  for (const auto& t : pool)
    if (t.relation != r) throw DataError("sample_task: triples mix relations");
  rng.shuffle(pool);

  FewShotTask task;
  task.relation = kg.relations().name(r);
  task.id = task.relation;
  task.support.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(K));
  std::size_t end = pool.size();
  if (options.max_queries > 0) end = std::min(end, K + options.max_queries);
  task.queries.assign(pool.begin() + static_cast<std::ptrdiff_t>(K), pool.begin() + static_cast<std::ptrdiff_t>(end));
  task.other_positives.assign(pool.begin() + static_cast<std::ptrdiff_t>(end), pool.end());
  attach_negatives(kg, task, rng, options);
  return task;
}

std::uint64_t task_seed(std::uint64_t seed, const std::string& task_id) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : task_id) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return mix_seed(seed, h);
}

// ---------------------------------------------------------------------------

namespace {

NamedTriple named_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw DataError(where + ": triple must be [head, relation, tail]");
  return {j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

nlohmann::json named_to_json(const NamedTriple& t) { return nlohmann::json::array({t.head, t.relation, t.tail}); }

}  // namespace

std::vector<TaskRecord> task_records_from_json(const nlohmann::json& j, const std::string& source) {
  if (!j.is_array()) throw DataError(source + ": expected an array of task records");
  std::vector<TaskRecord> out;
  try {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& rec = j[i];
      const std::string where = source + " record " + std::to_string(i);
      TaskRecord r;
      r.relation = rec.at("relation").get<std::string>();
      r.id = rec.contains("id") ? rec.at("id").get<std::string>() : r.relation;
      for (const auto& t : rec.at("support")) r.support.push_back(named_from_json(t, where));
      for (const auto& t : rec.at("queries")) r.queries.push_back(named_from_json(t, where));
      if (rec.contains("candidates")) {
        for (const auto& list : rec.at("candidates")) r.candidates.push_back(list.get<std::vector<std::string>>());
        if (r.candidates.size() != r.queries.size())
          throw DataError(where + ": candidates must list one pool per query");
      }
      for (const auto* part : {&r.support, &r.queries})
        for (const auto& t : *part)
          if (t.relation != r.relation) throw DataError(where + ": triple relation '" + t.relation + "' differs from '" + r.relation + "'");
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  return out;
}

std::vector<TaskRecord> read_task_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open task file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return task_records_from_json(j, path.string());
}

nlohmann::json task_records_to_json(std::span<const TaskRecord> records) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json rec;
    rec["id"] = r.id;
    rec["relation"] = r.relation;
    rec["support"] = nlohmann::json::array();
    for (const auto& t : r.support) rec["support"].push_back(named_to_json(t));
    rec["queries"] = nlohmann::json::array();
    for (const auto& t : r.queries) rec["queries"].push_back(named_to_json(t));
    if (!r.candidates.empty()) rec["candidates"] = r.candidates;
    out.push_back(std::move(rec));
  }
  return out;
}

void write_task_records(const std::filesystem::path& path, std::span<const TaskRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write task file " + path.string());
  out << task_records_to_json(records).dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

FewShotTask resolve_task(const TaskRecord& record, const KnowledgeGraph& kg) {
  FewShotTask task;
  task.id = record.id;
  task.relation = record.relation;
  auto resolve = [&](const NamedTriple& t) { return kg.resolve(t.head, t.relation, t.tail); };
  for (const auto& t : record.support) task.support.push_back(resolve(t));
  for (const auto& t : record.queries) task.queries.push_back(resolve(t));
  for (const auto& list : record.candidates) {
    std::vector<EntityId> ids;
    for (const auto& name : list) ids.push_back(kg.entities().at(name));
    task.candidates.push_back(std::move(ids));
  }
  return task;
}

TaskRecord to_record(const FewShotTask& task, const KnowledgeGraph& kg) {
  TaskRecord r;
  r.id = task.id;
  r.relation = task.relation;
  auto named = [&](const Triple& t) {
    return NamedTriple{kg.entities().name(t.head), kg.relations().name(t.relation), kg.entities().name(t.tail)};
  };
  for (const auto& t : task.support) r.support.push_back(named(t));
  for (const auto& t : task.queries) r.queries.push_back(named(t));
  for (const auto& list : task.candidates) {
    std::vector<std::string> names;
    for (EntityId e : list) names.push_back(kg.entities().name(e));
    r.candidates.push_back(std::move(names));
  }
  return r;
}

}  // namespace gsnp

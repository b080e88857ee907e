// SPDX-License-Identifier: Apache-2.0
#include "gsnp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gsnp/error.hpp"
#include "gsnp/random.hpp"

namespace gsnp {

namespace fs = std::filesystem;

namespace {

constexpr const char* kBackgroundFile = "bg.tsv";
constexpr const char* kIndTestFile = "ind_test.tsv";
constexpr const char* kSplits[] = {"train", "valid", "test"};

std::vector<TaskRecord> read_split(const fs::path& dir, const char* split) {
  const fs::path p = dir / "tasks" / (std::string(split) + ".json");
  if (!fs::exists(p)) return {};
  return read_task_records(p);
}

void intern_record(KnowledgeGraph::Builder& b, const TaskRecord& r) {
  b.add_relation(r.relation);
  for (const auto* part : {&r.support, &r.queries})
    for (const auto& t : *part) {
      b.add_entity(t.head);
      b.add_entity(t.tail);
    }
  for (const auto& list : r.candidates)
    for (const auto& e : list) b.add_entity(e);
}

}  // namespace

Bundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset bundle " + dir.string() + " is not a directory");
  Bundle b;
  b.background = load_triples(dir / kBackgroundFile);
  if (fs::exists(dir / kIndTestFile) && fs::file_size(dir / kIndTestFile) > 0)
    b.ind_test = load_triples(dir / kIndTestFile);
  b.train = read_split(dir, "train");
  b.valid = read_split(dir, "valid");
  b.test = read_split(dir, "test");
  return b;
}

void write_bundle(const fs::path& dir, const Bundle& bundle) {
  std::error_code ec;
  fs::create_directories(dir / "tasks", ec);
  if (ec) throw DataError("cannot create " + (dir / "tasks").string() + ": " + ec.message());
  write_triples(dir / kBackgroundFile, bundle.background);
  if (bundle.ind_test.num_triples() > 0) {
    write_triples(dir / kIndTestFile, bundle.ind_test);
  } else {
    fs::remove(dir / kIndTestFile, ec);
  }
  const std::vector<TaskRecord>* parts[] = {&bundle.train, &bundle.valid, &bundle.test};
  for (std::size_t i = 0; i < 3; ++i)
    write_task_records(dir / "tasks" / (std::string(kSplits[i]) + ".json"), *parts[i]);
}

std::vector<std::string> Dataset::edge_relations() const {
  std::vector<bool> used(test_graph.num_relations(), false);
  for (const auto* g : {&train_graph, &test_graph})
    for (const auto& t : g->triples()) used[t.relation] = true;
  std::vector<std::string> out;
  for (std::size_t r = 0; r < used.size(); ++r)
    if (used[r]) out.push_back(test_graph.relations().name(static_cast<RelationId>(r)));
  return out;
}

std::map<RelationId, std::vector<Triple>> Dataset::train_relation_triples() const {
  std::map<RelationId, std::vector<Triple>> out;
  std::unordered_set<Triple, TripleHash> seen;
  for (const auto& task : train_tasks)
    for (const auto* part : {&task.support, &task.queries})
      for (const auto& t : *part)
        if (seen.insert(t).second) out[t.relation].push_back(t);
  return out;
}

Dataset assemble_dataset(const Bundle& bundle) {
  KnowledgeGraph::Builder full;
  for (const auto* g : {&bundle.background, &bundle.ind_test}) {
    for (const auto& name : g->entities().names()) full.add_entity(name);
    for (const auto& name : g->relations().names()) full.add_relation(name);
  }
  for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (const auto& r : *split) intern_record(full, r);
  // Entities and relations are now all interned; copy the vocabularies
  // before adding triples so both graphs share ids.
  KnowledgeGraph::Builder bg = full;
  auto add_all = [](KnowledgeGraph::Builder& b, const KnowledgeGraph& g) {
    for (const auto& t : g.triples())
      b.add(g.entities().name(t.head), g.relations().name(t.relation), g.entities().name(t.tail));
  };
  add_all(full, bundle.background);
  add_all(full, bundle.ind_test);
  add_all(bg, bundle.background);

  Dataset d;
  d.test_graph = add_inverse_edges(std::move(full).build());
  d.train_graph = add_inverse_edges(std::move(bg).build());
  for (const auto& r : bundle.train) d.train_tasks.push_back(resolve_task(r, d.train_graph));
  for (const auto& r : bundle.valid) d.valid_tasks.push_back(resolve_task(r, d.test_graph));
  for (const auto& r : bundle.test) d.test_tasks.push_back(resolve_task(r, d.test_graph));
  return d;
}

Dataset load_dataset(const fs::path& dir) { return assemble_dataset(read_bundle(dir)); }

SplitSpec read_split_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split spec " + path.string());
  SplitSpec spec;
  try {
    nlohmann::json j;
    in >> j;
    if (!j.is_object()) throw DataError(path.string() + ": split spec must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "train") {
        spec.train = value.get<std::vector<std::string>>();
      } else if (key == "valid") {
        spec.valid = value.get<std::vector<std::string>>();
      } else if (key == "test") {
        spec.test = value.get<std::vector<std::string>>();
      } else {
        throw DataError(path.string() + ": unknown split '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------

namespace {

NamedTriple named(const KnowledgeGraph& kg, const Triple& t) {
  return {kg.entities().name(t.head), kg.relations().name(t.relation), kg.entities().name(t.tail)};
}

std::vector<std::string> candidate_names(const KnowledgeGraph& kg, const std::vector<EntityId>& ids) {
  std::vector<std::string> out;
  for (EntityId e : ids) out.push_back(kg.entities().name(e));
  return out;
}

}  // namespace

Bundle prepare_bundle(const KnowledgeGraph& source, const SplitSpec& split, const PrepareOptions& options) {
  if (options.shots == 0) throw ConfigError("prepare: shots must be at least 1");
  if (!(options.query_fraction > 0.0 && options.query_fraction <= 1.0))
    throw ConfigError("prepare: query fraction must lie in (0, 1]");

  std::map<std::string, RelationId> task_relations;
  std::vector<std::string> unknown;
  for (const auto* list : {&split.train, &split.valid, &split.test})
    for (const auto& name : *list) {
      auto id = source.relations().find(name);
      if (!id) {
        unknown.push_back(name);
      } else {
        task_relations.emplace(name, *id);
      }
    }
  if (!unknown.empty()) {
    std::string msg = "split spec names relations absent from the source graph:";
    for (const auto& u : unknown) msg += " " + u;
    throw DataError(msg);
  }
  std::set<RelationId> task_ids;
  for (const auto& [n, id] : task_relations) task_ids.insert(id);
  std::set<RelationId> held_out;
  for (const auto* list : {&split.valid, &split.test})
    for (const auto& name : *list) held_out.insert(task_relations.at(name));

  std::map<RelationId, std::vector<Triple>> by_relation;
  std::vector<bool> removed(source.num_entities(), false);
  for (const auto& t : source.triples()) {
    if (task_ids.contains(t.relation)) by_relation[t.relation].push_back(t);
    if (held_out.contains(t.relation)) removed[t.head] = removed[t.tail] = true;
  }
  std::vector<bool> task_entity = removed;
  for (const auto& t : source.triples()) {
    if (task_entity[t.head]) removed[t.tail] = true;
    if (task_entity[t.tail]) removed[t.head] = true;
  }

  KnowledgeGraph::Builder bg;
  KnowledgeGraph::Builder ind;
  for (const auto& t : source.triples()) {
    if (task_ids.contains(t.relation)) continue;
    const auto n = named(source, t);
    if (removed[t.head] || removed[t.tail]) {
      ind.add(n.head, n.relation, n.tail);
    } else {
      bg.add(n.head, n.relation, n.tail);
    }
  }

  Bundle bundle;
  bundle.background = std::move(bg).build();
  bundle.ind_test = std::move(ind).build();

  // Candidate tails come from the test-time universe, i.e. the whole source.
  const auto pool = all_entities(source);
  EpisodeRng master(options.seed);
  std::uint64_t stream = 0;
  auto make_records = [&](const std::vector<std::string>& names, bool evaluation) {
    std::vector<TaskRecord> records;
    for (const auto& name : names) {
      const RelationId r = task_relations.at(name);
      std::vector<Triple> triples;
      for (const auto& t : by_relation[r])
        if (evaluation || (!removed[t.head] && !removed[t.tail])) triples.push_back(t);
      if (triples.size() < options.shots + 1)
        throw DataError("relation '" + name + "' keeps " + std::to_string(triples.size()) +
                        " usable triples, need at least " + std::to_string(options.shots + 1));
      EpisodeRng rng = master.split(stream++);
      rng.shuffle(triples);
      TaskRecord rec;
      rec.id = name;
      rec.relation = name;
      for (std::size_t i = 0; i < options.shots; ++i) rec.support.push_back(named(source, triples[i]));
      std::size_t n_queries = triples.size() - options.shots;
      if (evaluation && options.query_fraction < 1.0)
        n_queries = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.query_fraction * static_cast<double>(n_queries))));
      const TripleSet positives(by_relation[r].begin(), by_relation[r].end());
      for (std::size_t i = 0; i < n_queries; ++i) {
        const Triple& q = triples[options.shots + i];
        rec.queries.push_back(named(source, q));
        if (evaluation)
          rec.candidates.push_back(
              candidate_names(source, build_eval_candidates(source, q, pool, options.n_cand, rng, positives)));
      }
      records.push_back(std::move(rec));
    }
    return records;
  };
  bundle.train = make_records(split.train, false);
  bundle.valid = make_records(split.valid, true);
  bundle.test = make_records(split.test, true);
  return bundle;
}

std::string format_statistics(const Bundle& bundle) {
  auto count_row = [](const KnowledgeGraph& g, const std::vector<TaskRecord>* tasks) {
    std::set<std::string> rels(g.relations().names().begin(), g.relations().names().end());
    std::set<std::string> ents;
    for (const auto& t : g.triples()) {
      ents.insert(g.entities().name(t.head));
      ents.insert(g.entities().name(t.tail));
    }
    if (tasks)
      for (const auto& r : *tasks) {
        rels.insert(r.relation);
        for (const auto* part : {&r.support, &r.queries})
          for (const auto& t : *part) {
            ents.insert(t.head);
            ents.insert(t.tail);
          }
      }
    std::ostringstream row;
    row << std::setw(8) << rels.size() << std::setw(12) << ents.size() << std::setw(10) << g.num_triples()
        << std::setw(8) << (tasks ? std::to_string(tasks->size()) : std::string("-"));
    return row.str();
  };
  std::ostringstream out;
  out << std::left << std::setw(10) << "" << std::right << std::setw(8) << "#rels" << std::setw(12) << "#entities"
      << std::setw(10) << "#edges" << std::setw(8) << "#tasks" << '\n';
  out << std::left << std::setw(10) << "Ind-BG" << std::right << count_row(bundle.background, nullptr) << '\n';
  out << std::left << std::setw(10) << "Ind-Test" << std::right << count_row(bundle.ind_test, &bundle.test) << '\n';
  out << "tasks: train " << bundle.train.size() << ", valid " << bundle.valid.size() << ", test "
      << bundle.test.size() << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

Bundle synthesize_bundle(const SynthOptions& o) {
  if (o.pairs == 0) throw ConfigError("synth: at least one planted pair is required");
  if (o.entities < 3 * o.pairs)
    throw ConfigError("synth: " + std::to_string(o.pairs) + " planted pairs need " + std::to_string(3 * o.pairs) +
                      " entities, got " + std::to_string(o.entities));
  if (o.shots == 0) throw ConfigError("synth: shots must be at least 1");
  if (o.test_queries == 0) throw ConfigError("synth: at least one test query is required");
  if (o.pairs < o.valid_queries + o.test_queries + o.shots + 1)
    throw ConfigError("synth: " + std::to_string(o.pairs) + " pairs cannot cover " + std::to_string(o.shots) +
                      " shots, a training query and " + std::to_string(o.valid_queries + o.test_queries) +
                      " held-out queries");
  if (o.distractors > 0 && o.distractor_relations == 0)
    throw ConfigError("synth: distractor edges need at least one distractor relation");
  const std::set<std::string> names{o.first_relation, o.second_relation, o.target_relation};
  if (names.size() != 3) throw ConfigError("synth: chain and target relations must be distinct");

  EpisodeRng rng(o.seed);
  const int width = static_cast<int>(std::to_string(o.entities - 1).size());
  std::vector<std::string> entities;
  for (std::size_t i = 0; i < o.entities; ++i) {
    std::ostringstream s;
    s << 'e' << std::setw(width) << std::setfill('0') << i;
    entities.push_back(s.str());
  }
  std::vector<std::size_t> order(o.entities);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  KnowledgeGraph::Builder b;
  for (const auto& e : entities) b.add_entity(e);
  b.add_relation(o.first_relation);
  b.add_relation(o.second_relation);
  std::vector<std::string> distractor_names;
  for (std::size_t i = 0; i < o.distractor_relations && o.distractors > 0; ++i) {
    distractor_names.push_back("d" + std::to_string(i + 1));
    if (names.contains(distractor_names.back())) throw ConfigError("synth: relation name clash with distractors");
    b.add_relation(distractor_names.back());
  }
  std::vector<NamedTriple> targets;
  for (std::size_t p = 0; p < o.pairs; ++p) {
    const auto& h = entities[order[3 * p]];
    const auto& m = entities[order[3 * p + 1]];
    const auto& t = entities[order[3 * p + 2]];
    b.add(h, o.first_relation, m);
    b.add(m, o.second_relation, t);
    targets.push_back({h, o.target_relation, t});
  }
  const std::size_t max_distractors = o.entities * (o.entities - 1) * distractor_names.size();
  if (o.distractors > max_distractors) throw ConfigError("synth: too many distractor edges for the entity count");
  std::size_t added = 0;
  while (added < o.distractors) {
    const auto a = rng.index(o.entities);
    const auto c = rng.index(o.entities);
    if (a == c) continue;
    const auto& rel = distractor_names[rng.index(distractor_names.size())];
    if (b.add(entities[a], rel, entities[c])) ++added;
  }
  Bundle bundle;
  bundle.background = std::move(b).build();
  const auto& kg = bundle.background;

  // Self-audit: the chain must hold for exactly the planted pairs.
  std::set<std::pair<EntityId, EntityId>> chained;
  const RelationId r1 = kg.relations().at(o.first_relation);
  const RelationId r2 = kg.relations().at(o.second_relation);
  for (const auto& x : kg.triples()) {
    if (x.relation != r1) continue;
    for (std::uint32_t i : kg.incident(x.tail)) {
      const Triple& y = kg.triple(i);
      if (y.relation == r2 && y.head == x.tail) chained.emplace(x.head, y.tail);
    }
  }
  std::set<std::pair<EntityId, EntityId>> planted;
  for (const auto& t : targets) planted.emplace(kg.entities().at(t.head), kg.entities().at(t.tail));
  if (chained != planted) throw Error("synth: generated chain set differs from the planted pairs");

  const std::size_t n_train = o.pairs - o.valid_queries - o.test_queries;
  std::vector<NamedTriple> train(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(n_train));
  TaskRecord tr;
  tr.id = "train:" + o.target_relation;
  tr.relation = o.target_relation;
  tr.support.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(o.shots));
  tr.queries.assign(train.begin() + static_cast<std::ptrdiff_t>(o.shots), train.end());
  bundle.train.push_back(tr);

  // Candidate checks need the target relation interned; it labels no edge.
  KnowledgeGraph::Builder cb;
  for (const auto& e : kg.entities().names()) cb.add_entity(e);
  for (const auto& r : kg.relations().names()) cb.add_relation(r);
  cb.add_relation(o.target_relation);
  const KnowledgeGraph universe = std::move(cb).build();
  TripleSet positives;
  for (const auto& t : targets) positives.insert(universe.resolve(t.head, t.relation, t.tail));
  const auto pool = all_entities(universe);

  auto held_out = [&](const std::string& split, std::size_t begin, std::size_t count) {
    TaskRecord rec;
    rec.id = split + ":" + o.target_relation;
    rec.relation = o.target_relation;
    rec.support.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(o.shots));
    EpisodeRng crng = rng.split(begin);
    for (std::size_t i = begin; i < begin + count; ++i) {
      rec.queries.push_back(targets[i]);
      const Triple q = universe.resolve(targets[i].head, targets[i].relation, targets[i].tail);
      rec.candidates.push_back(candidate_names(universe, build_eval_candidates(universe, q, pool, o.n_cand, crng, positives)));
    }
    return rec;
  };
  if (o.valid_queries > 0) bundle.valid.push_back(held_out("valid", n_train, o.valid_queries));
  bundle.test.push_back(held_out("test", n_train + o.valid_queries, o.test_queries));
  return bundle;
}

std::vector<Triple> planted_chain(const KnowledgeGraph& kg, const Triple& target, const std::string& first_relation,
                                  const std::string& second_relation) {
  const auto r1 = kg.relations().find(first_relation);
  const auto r2 = kg.relations().find(second_relation);
  std::vector<Triple> out;
  if (!r1 || !r2) return out;
  for (std::uint32_t i : kg.incident(target.head)) {
    const Triple& x = kg.triple(i);
    if (x.relation != *r1 || x.head != target.head) continue;
    const Triple y{x.tail, *r2, target.tail};
    if (kg.contains(y)) {
      out.push_back(x);
      out.push_back(y);
    }
  }
  return out;
}

}  // namespace gsnp

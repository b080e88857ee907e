// SPDX-License-Identifier: Apache-2.0
#include "gsnp/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gsnp/error.hpp"

namespace gsnp {

std::uint32_t Vocabulary::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::at(std::string_view name) const {
  auto id = find(name);
  if (!id) throw DataError("unknown name '" + std::string(name) + "'");
  return *id;
}

// ---------------------------------------------------------------------------

RelationId KnowledgeGraph::Builder::add_relation(std::string_view name) {
  RelationId r = relations_.intern(name);
  if (r >= inverse_of_.size()) {
    inverse_of_.resize(r + 1, -1);
    is_inverse_.resize(r + 1, false);
  }
  return r;
}

RelationId KnowledgeGraph::Builder::add_inverse_relation(RelationId forward) {
  if (forward >= relations_.size()) throw DataError("inverse of unknown relation id");
  if (inverse_of_[forward] >= 0) return static_cast<RelationId>(inverse_of_[forward]);
  std::string name = relations_.name(forward) + std::string(kInverseSuffix);
  if (relations_.find(name)) throw DataError("relation name '" + name + "' clashes with an inverse id");
  RelationId inv = add_relation(name);
  inverse_of_[forward] = inv;
  inverse_of_[inv] = forward;
  is_inverse_[inv] = true;
  return inv;
}

bool KnowledgeGraph::Builder::add(std::string_view head, std::string_view relation, std::string_view tail) {
  EntityId h = add_entity(head);
  RelationId r = add_relation(relation);
  EntityId t = add_entity(tail);
  return add(Triple{h, r, t});
}

bool KnowledgeGraph::Builder::add(const Triple& t) {
  if (t.head >= entities_.size() || t.tail >= entities_.size() || t.relation >= relations_.size())
    throw DataError("triple references an id outside the vocabularies");
  if (!seen_.insert(t).second) return false;
  triples_.push_back(t);
  return true;
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  KnowledgeGraph g;
  g.entities_ = std::move(entities_);
  g.relations_ = std::move(relations_);
  g.triples_ = std::move(triples_);
  g.lookup_ = std::move(seen_);
  g.inverse_of_ = std::move(inverse_of_);
  g.is_inverse_ = std::move(is_inverse_);
  g.inverse_of_.resize(g.relations_.size(), -1);
  g.is_inverse_.resize(g.relations_.size(), false);
  g.has_inverses_ = std::find(g.is_inverse_.begin(), g.is_inverse_.end(), true) != g.is_inverse_.end();

  // CSR incidence: one entry per endpoint.
  const std::size_t n = g.entities_.size();
  std::vector<std::uint32_t> degree(n, 0);
  for (const auto& t : g.triples_) {
    ++degree[t.head];
    ++degree[t.tail];
  }
  g.incidence_offsets_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) g.incidence_offsets_[v + 1] = g.incidence_offsets_[v] + degree[v];
  g.incidence_.resize(g.incidence_offsets_[n]);
  std::vector<std::uint32_t> cursor(g.incidence_offsets_.begin(), g.incidence_offsets_.end() - 1);
  for (std::uint32_t i = 0; i < g.triples_.size(); ++i) {
    const auto& t = g.triples_[i];
    g.incidence_[cursor[t.head]++] = i;
    g.incidence_[cursor[t.tail]++] = i;
  }
  return g;
}

std::span<const std::uint32_t> KnowledgeGraph::incident(EntityId e) const {
  if (e >= entities_.size()) throw DataError("unknown entity id " + std::to_string(e));
  return {incidence_.data() + incidence_offsets_[e], incidence_offsets_[e + 1] - incidence_offsets_[e]};
}

std::optional<RelationId> KnowledgeGraph::inverse_of(RelationId r) const {
  if (r >= inverse_of_.size() || inverse_of_[r] < 0) return std::nullopt;
  return static_cast<RelationId>(inverse_of_[r]);
}

std::size_t KnowledgeGraph::num_forward_relations() const {
  return static_cast<std::size_t>(std::count(is_inverse_.begin(), is_inverse_.end(), false));
}

Triple KnowledgeGraph::resolve(std::string_view head, std::string_view relation, std::string_view tail) const {
  auto h = entities_.find(head);
  if (!h) throw DataError("unknown entity '" + std::string(head) + "'");
  auto t = entities_.find(tail);
  if (!t) throw DataError("unknown entity '" + std::string(tail) + "'");
  auto r = relations_.find(relation);
  if (!r) throw DataError("unknown relation '" + std::string(relation) + "'");
  return {*h, *r, *t};
}

std::string KnowledgeGraph::describe(const Triple& t) const {
  return "(" + entities_.name(t.head) + ", " + relations_.name(t.relation) + ", " + entities_.name(t.tail) + ")";
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line, TripleFormat format) {
  std::vector<std::string_view> fields;
  if (format == TripleFormat::tab_separated) {
    std::size_t start = 0;
    while (true) {
      auto pos = line.find('\t', start);
      fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return fields;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

}  // namespace

KnowledgeGraph parse_triples(std::istream& in, const std::string& source_name, TripleFormat format) {
  KnowledgeGraph::Builder builder;
  std::string line;
  std::size_t lineno = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, format);
    if (fields.size() != 3) {
      throw ParseError(source_name, lineno, "expected 3 fields (head, relation, tail), found " +
                                                std::to_string(fields.size()));
    }
    for (auto f : fields)
      if (f.empty()) throw ParseError(source_name, lineno, "empty field");
    builder.add(fields[0], fields[1], fields[2]);
    ++records;
  }
  if (records == 0) throw DataError(source_name + ": no triples");
  return std::move(builder).build();
}

KnowledgeGraph load_triples(const std::filesystem::path& path, TripleFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file " + path.string());
  return parse_triples(in, path.string(), format);
}

void write_triples(std::ostream& out, const KnowledgeGraph& kg) {
  for (const auto& t : kg.triples()) {
    if (kg.is_inverse(t.relation)) continue;
    out << kg.entities().name(t.head) << '\t' << kg.relations().name(t.relation) << '\t'
        << kg.entities().name(t.tail) << '\n';
  }
}

void write_triples(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_triples(out, kg);
  if (!out) throw DataError("write failed for " + path.string());
}

KnowledgeGraph merge_graphs(const KnowledgeGraph& bg, const KnowledgeGraph& test) {
  KnowledgeGraph::Builder b;
  auto copy_forward = [&b](const KnowledgeGraph& g) {
    for (const auto& name : g.entities().names()) b.add_entity(name);
    for (RelationId r = 0; r < g.num_relations(); ++r)
      if (!g.is_inverse(r)) b.add_relation(g.relations().name(r));
    for (const auto& t : g.triples()) {
      if (g.is_inverse(t.relation)) continue;
      b.add(g.entities().name(t.head), g.relations().name(t.relation), g.entities().name(t.tail));
    }
  };
  copy_forward(bg);
  copy_forward(test);
  KnowledgeGraph merged = std::move(b).build();
  if (bg.has_inverse_relations() && test.has_inverse_relations()) return add_inverse_edges(merged);
  return merged;
}

KnowledgeGraph add_inverse_edges(const KnowledgeGraph& kg) {
  if (kg.has_inverse_relations()) throw DataError("graph already carries inverse relations");
  KnowledgeGraph::Builder b;
  for (const auto& name : kg.entities().names()) b.add_entity(name);
  for (const auto& name : kg.relations().names()) b.add_relation(name);
  const auto forward = static_cast<RelationId>(kg.num_relations());
  for (RelationId r = 0; r < forward; ++r) b.add_inverse_relation(r);
  for (const auto& t : kg.triples()) b.add(t);
  for (const auto& t : kg.triples()) b.add(Triple{t.tail, forward + t.relation, t.head});
  return std::move(b).build();
}

// ---------------------------------------------------------------------------

std::unordered_map<EntityId, int> bfs_ball(const KnowledgeGraph& kg, EntityId v, int k) {
  if (!kg.has_entity(v)) throw DataError("unknown entity id " + std::to_string(v));
  if (k < 0) throw ConfigError("hop count must be non-negative");
  std::unordered_map<EntityId, int> dist{{v, 0}};
  std::deque<EntityId> frontier{v};
  while (!frontier.empty()) {
    EntityId u = frontier.front();
    frontier.pop_front();
    int du = dist[u];
    if (du == k) continue;
    for (auto ti : kg.incident(u)) {
      const auto& t = kg.triple(ti);
      EntityId w = t.head == u ? t.tail : t.head;
      if (dist.emplace(w, du + 1).second) frontier.push_back(w);
    }
  }
  return dist;
}

namespace {

template <typename InBall>
std::vector<std::uint32_t> triples_inside(const KnowledgeGraph& kg, const std::vector<EntityId>& members,
                                          InBall in_ball) {
  std::vector<std::uint32_t> out;
  for (EntityId u : members) {
    for (auto ti : kg.incident(u)) {
      const auto& t = kg.triple(ti);
      // Count each triple once: from its head, or from its tail when the head is outside.
      if (t.head == u) {
        if (in_ball(t.tail)) out.push_back(ti);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<std::uint32_t> k_hop_triple_indices(const KnowledgeGraph& kg, EntityId v, int k) {
  auto ball = bfs_ball(kg, v, k);
  std::vector<EntityId> members;
  members.reserve(ball.size());
  for (const auto& [e, d] : ball) members.push_back(e);
  return triples_inside(kg, members, [&](EntityId e) { return ball.contains(e); });
}

std::vector<Triple> k_hop_neighbors(const KnowledgeGraph& kg, EntityId v, int k) {
  std::vector<Triple> out;
  for (auto i : k_hop_triple_indices(kg, v, k)) out.push_back(kg.triple(i));
  return out;
}

EnclosingSubgraph EnclosingSubgraph::from_edges(EntityId head, EntityId tail, int hop, std::vector<Triple> edges) {
  EnclosingSubgraph sub;
  sub.head = head;
  sub.tail = tail;
  sub.hop = hop;
  sub.empty = edges.empty();
  std::vector<EntityId> others;
  for (const auto& e : edges) {
    for (EntityId x : {e.head, e.tail})
      if (x != head && x != tail) others.push_back(x);
  }
  std::sort(others.begin(), others.end());
  others.erase(std::unique(others.begin(), others.end()), others.end());
  sub.nodes.push_back(head);
  if (tail != head) sub.nodes.push_back(tail);
  sub.nodes.insert(sub.nodes.end(), others.begin(), others.end());
  sub.head_index = 0;
  sub.tail_index = tail == head ? 0 : 1;

  auto local = [&](EntityId x) -> std::uint32_t {
    if (x == head) return sub.head_index;
    if (x == tail) return sub.tail_index;
    auto it = std::lower_bound(others.begin(), others.end(), x);
    return static_cast<std::uint32_t>((tail == head ? 1 : 2) + (it - others.begin()));
  };
  sub.edge_source.reserve(edges.size());
  sub.edge_target.reserve(edges.size());
  for (const auto& e : edges) {
    sub.edge_source.push_back(local(e.head));
    sub.edge_target.push_back(local(e.tail));
  }
  sub.edges = std::move(edges);
  return sub;
}

EnclosingSubgraph EnclosingSubgraph::reordered(std::span<const std::size_t> order) const {
  if (order.size() != edges.size()) throw ShapeError("edge permutation has the wrong length");
  std::vector<Triple> permuted;
  permuted.reserve(edges.size());
  for (auto i : order) permuted.push_back(edges.at(i));
  return from_edges(head, tail, hop, std::move(permuted));
}

EnclosingSubgraph enclosing_subgraph(const KnowledgeGraph& kg, EntityId h, EntityId t, int k,
                                     std::optional<RelationId> target_relation) {
  if (!kg.has_entity(h)) throw DataError("unknown head entity id " + std::to_string(h));
  if (!kg.has_entity(t)) throw DataError("unknown tail entity id " + std::to_string(t));
  auto ball_h = bfs_ball(kg, h, k);
  auto ball_t = bfs_ball(kg, t, k);
  // A triple lies in both k-hop triple sets iff both its endpoints lie in both balls.
  std::vector<EntityId> common;
  for (const auto& [e, d] : ball_h)
    if (ball_t.contains(e)) common.push_back(e);
  auto in_both = [&](EntityId e) { return ball_h.contains(e) && ball_t.contains(e); };
  auto indices = triples_inside(kg, common, in_both);

  std::optional<Triple> excluded, excluded_inverse;
  if (target_relation) {
    excluded = Triple{h, *target_relation, t};
    if (auto inv = kg.inverse_of(*target_relation)) excluded_inverse = Triple{t, *inv, h};
  }
  std::vector<Triple> edges;
  edges.reserve(indices.size());
  for (auto i : indices) {
    const auto& tr = kg.triple(i);
    if ((excluded && tr == *excluded) || (excluded_inverse && tr == *excluded_inverse)) continue;
    edges.push_back(tr);
  }
  return EnclosingSubgraph::from_edges(h, t, k, std::move(edges));
}

}  // namespace gsnp

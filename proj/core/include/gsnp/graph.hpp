// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gsnp {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head{};
  RelationId relation{};
  EntityId tail{};

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = (std::uint64_t{t.head} << 32) ^ t.tail;
    h ^= std::uint64_t{t.relation} * 0x9E3779B97F4A7C15ull;
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
  }
};

/// String interning with ids assigned in first-appearance order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  /// Throws DataError when the name is unknown.
  std::uint32_t at(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Suffix given to the synthetic inverse of a forward relation.
inline constexpr std::string_view kInverseSuffix = "^-1";

/// Immutable directed multigraph of (head, relation, tail) triples.
///
/// Triples are deduplicated and keep their first-appearance order. The
/// incidence index lists each triple once per endpoint, so a self-loop is
/// listed twice for its entity.
class KnowledgeGraph {
 public:
  class Builder {
   public:
    EntityId add_entity(std::string_view name) { return entities_.intern(name); }
    RelationId add_relation(std::string_view name);
    /// Registers `forward`'s synthetic inverse and pairs the two.
    RelationId add_inverse_relation(RelationId forward);
    /// Returns false if the triple was already present.
    bool add(std::string_view head, std::string_view relation, std::string_view tail);
    bool add(const Triple& t);

    KnowledgeGraph build() &&;

   private:
    friend class KnowledgeGraph;
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    std::unordered_set<Triple, TripleHash> seen_;
    std::vector<std::int64_t> inverse_of_;
    std::vector<bool> is_inverse_;
  };

  KnowledgeGraph() = default;

  const Vocabulary& entities() const noexcept { return entities_; }
  const Vocabulary& relations() const noexcept { return relations_; }
  std::span<const Triple> triples() const noexcept { return triples_; }
  const Triple& triple(std::uint32_t index) const { return triples_.at(index); }

  std::size_t num_entities() const noexcept { return entities_.size(); }
  std::size_t num_relations() const noexcept { return relations_.size(); }
  std::size_t num_triples() const noexcept { return triples_.size(); }

  bool contains(const Triple& t) const { return lookup_.contains(t); }
  bool has_entity(EntityId e) const noexcept { return e < entities_.size(); }

  /// Indices of the triples touching `e`.
  std::span<const std::uint32_t> incident(EntityId e) const;

  bool has_inverse_relations() const noexcept { return has_inverses_; }
  bool is_inverse(RelationId r) const { return is_inverse_.at(r); }
  /// Paired relation (forward <-> inverse), if inverses were added.
  std::optional<RelationId> inverse_of(RelationId r) const;
  std::size_t num_forward_relations() const;

  /// Resolves names against the vocabularies; throws DataError if unknown.
  Triple resolve(std::string_view head, std::string_view relation, std::string_view tail) const;
  std::string describe(const Triple& t) const;

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.entities_ == b.entities_ && a.relations_ == b.relations_ && a.triples_ == b.triples_;
  }

 private:
  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> lookup_;
  std::vector<std::uint32_t> incidence_offsets_;
  std::vector<std::uint32_t> incidence_;
  std::vector<std::int64_t> inverse_of_;
  std::vector<bool> is_inverse_;
  bool has_inverses_ = false;
};

enum class TripleFormat {
  tab_separated,        ///< `head\trelation\ttail`
  whitespace_separated  ///< any run of blanks between the three fields
};

KnowledgeGraph load_triples(const std::filesystem::path& path,
                            TripleFormat format = TripleFormat::tab_separated);
KnowledgeGraph parse_triples(std::istream& in, const std::string& source_name,
                             TripleFormat format = TripleFormat::tab_separated);

/// Writes forward triples only, tab separated, in stored order.
void write_triples(const std::filesystem::path& path, const KnowledgeGraph& kg);
void write_triples(std::ostream& out, const KnowledgeGraph& kg);

/// Union under name identity. Ids of `bg` are preserved; `test` names that
/// are new get appended. Inverse edges, if both inputs had them, are rebuilt.
KnowledgeGraph merge_graphs(const KnowledgeGraph& bg, const KnowledgeGraph& test);

/// Adds (t, r^-1, h) for every (h, r, t). Throws DataError if already done.
KnowledgeGraph add_inverse_edges(const KnowledgeGraph& kg);

/// Entities within undirected distance <= k of v, with their distances.
std::unordered_map<EntityId, int> bfs_ball(const KnowledgeGraph& kg, EntityId v, int k);

/// Indices (ascending) of triples whose endpoints both lie within distance k of v.
std::vector<std::uint32_t> k_hop_triple_indices(const KnowledgeGraph& kg, EntityId v, int k);
std::vector<Triple> k_hop_neighbors(const KnowledgeGraph& kg, EntityId v, int k);

/// Intersection of the k-hop triple sets of a head and a tail entity.
///
/// Nodes are ordered head, tail (when distinct), then the remaining entities
/// ascending. Edges follow graph storage order, so extraction is
/// deterministic. `head` and `tail` are always nodes even with no edges.
struct EnclosingSubgraph {
  EntityId head{};
  EntityId tail{};
  int hop = 0;
  bool empty = true;
  std::vector<EntityId> nodes;
  std::vector<Triple> edges;
  // Local node index of each edge's endpoints.
  std::vector<std::uint32_t> edge_source;
  std::vector<std::uint32_t> edge_target;
  std::uint32_t head_index = 0;
  std::uint32_t tail_index = 0;

  std::size_t num_nodes() const noexcept { return nodes.size(); }
  std::size_t num_edges() const noexcept { return edges.size(); }

  /// Builds the node set and local indexing around a given edge list.
  static EnclosingSubgraph from_edges(EntityId head, EntityId tail, int hop, std::vector<Triple> edges);
  /// Same subgraph with edges reordered by `order` (a permutation).
  EnclosingSubgraph reordered(std::span<const std::size_t> order) const;
};

/// Extracts G(h,t). When `target_relation` is given, the triple
/// (h, target, t) and its inverse are left out.
EnclosingSubgraph enclosing_subgraph(const KnowledgeGraph& kg, EntityId h, EntityId t, int k,
                                     std::optional<RelationId> target_relation = std::nullopt);

}  // namespace gsnp

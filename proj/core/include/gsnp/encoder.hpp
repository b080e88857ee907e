// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "gsnp/autodiff.hpp"
#include "gsnp/graph.hpp"
#include "gsnp/model.hpp"

namespace gsnp {

/// States of one message-passing step. `edge_states` holds e_r for every
/// subgraph edge, `node_states` the aggregated a_v and `flagged_node_states`
/// a_v || 1(v=h) || 1(v=t).
struct LayerStates {
  Tensor edge_states;
  Tensor node_states;
  Tensor flagged_node_states;
};

/// Output of encode_subgraph: the embedding e || a_h || a_t and the final
/// edge states it was pooled from.
struct SubgraphEncoding {
  Tensor embedding;
  Tensor final_edge_states;
};

struct EncodeCounter {
  std::size_t unmasked = 0;
  std::size_t masked = 0;
};

/// N x 2 head/tail indicator matrix in the subgraph's node order.
Matrix node_flags(const EnclosingSubgraph& sub);

/// Edge states from the relation table; node states zero with head/tail
/// flags. Throws DataError when an edge's relation has no table row.
LayerStates init_edge_features(Tape& tape, const EnclosingSubgraph& sub, const Tensor& table,
                               const RelationIndex& index);

/// One relation message-passing step. Node states aggregate the incoming
/// edge states (scaled by `mask` when given) and each edge (v, r, u) maps
/// e_v || e_u || e_r through relu(. W + b). Throws ShapeError on mismatched
/// dimensions.
LayerStates message_passing_layer(const EnclosingSubgraph& sub, const LayerStates& states, const Tensor& W,
                                  const Tensor& b, const Tensor* mask = nullptr);

/// Runs all layers and pools the (masked) final edge states with max-pool.
/// An edgeless subgraph yields a zero embedding. `mask` is an E x 1 soft mask.
SubgraphEncoding encode_subgraph(Tape& tape, const Model& model, const EnclosingSubgraph& sub,
                                 const RelationIndex& index, const Tensor* mask = nullptr,
                                 EncodeCounter* counter = nullptr);

}  // namespace gsnp

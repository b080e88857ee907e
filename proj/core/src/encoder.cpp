// SPDX-License-Identifier: Apache-2.0
#include "gsnp/encoder.hpp"

#include "gsnp/error.hpp"

namespace gsnp {

Matrix node_flags(const EnclosingSubgraph& sub) {
  Matrix flags = Matrix::Zero(static_cast<Eigen::Index>(sub.num_nodes()), 2);
  flags(sub.head_index, 0) = 1.0;
  flags(sub.tail_index, 1) = 1.0;
  return flags;
}

LayerStates init_edge_features(Tape& tape, const EnclosingSubgraph& sub, const Tensor& table,
                               const RelationIndex& index) {
  std::vector<std::uint32_t> rows;
  rows.reserve(sub.num_edges());
  for (const auto& e : sub.edges) {
    if (e.relation >= index.rows.size() || index.rows[e.relation] == RelationIndex::kMissing) {
      const std::string name = e.relation < index.names.size() ? index.names[e.relation] : std::to_string(e.relation);
      throw DataError("relation '" + name + "' has no entry in the relation table");
    }
    rows.push_back(static_cast<std::uint32_t>(index.rows[e.relation]));
  }
  const auto n = static_cast<Eigen::Index>(sub.num_nodes());
  LayerStates states;
  states.edge_states = gather_rows(table, rows);
  states.node_states = tape.constant(Matrix::Zero(n, table.cols()));
  const Tensor parts[] = {states.node_states, tape.constant(node_flags(sub))};
  states.flagged_node_states = concat_cols(parts);
  return states;
}

namespace {

Tensor masked(const Tensor& edge_states, const Tensor* mask) {
  return mask ? scale_rows(edge_states, *mask) : edge_states;
}

Tensor aggregate_nodes(const EnclosingSubgraph& sub, const Tensor& edge_states) {
  return incidence_sum(edge_states, sub.edge_source, sub.edge_target, static_cast<Eigen::Index>(sub.num_nodes()));
}

}  // namespace

LayerStates message_passing_layer(const EnclosingSubgraph& sub, const LayerStates& states, const Tensor& W,
                                  const Tensor& b, const Tensor* mask) {
  Tape& tape = *states.edge_states.tape();
  const Tensor e = masked(states.edge_states, mask);
  const Eigen::Index d = e.cols();
  if (W.rows() != 3 * d + 4 || W.cols() != d)
    throw ShapeError("message_passing_layer: weight " + shape_of(W.value()) + " does not fit edge width " +
                     std::to_string(d));
  LayerStates out;
  out.node_states = aggregate_nodes(sub, e);
  const Tensor flag_parts[] = {out.node_states, tape.constant(node_flags(sub))};
  out.flagged_node_states = concat_cols(flag_parts);
  const Tensor edge_parts[] = {gather_rows(out.flagged_node_states, sub.edge_source),
                               gather_rows(out.flagged_node_states, sub.edge_target), e};
  out.edge_states = relu(linear(concat_cols(edge_parts), W, b));
  return out;
}

SubgraphEncoding encode_subgraph(Tape& tape, const Model& model, const EnclosingSubgraph& sub,
                                 const RelationIndex& index, const Tensor* mask, EncodeCounter* counter) {
  if (mask && mask->rows() != static_cast<Eigen::Index>(sub.num_edges()))
    throw ShapeError("mask has " + std::to_string(mask->rows()) + " entries for " + std::to_string(sub.num_edges()) +
                     " edges");
  if (counter) ++(mask ? counter->masked : counter->unmasked);
  const auto& config = model.config();
  LayerStates states = init_edge_features(tape, sub, model.param(tape, pname::kRelationTable), index);
  for (int l = 0; l < config.layers; ++l)
    states = message_passing_layer(sub, states, model.param(tape, pname::layer_weight(l)),
                                   model.param(tape, pname::layer_bias(l)), mask);

  const Tensor final_states = masked(states.edge_states, mask);
  const Tensor nodes = aggregate_nodes(sub, final_states);
  const Tensor pooled =
      sub.num_edges() == 0 ? tape.constant(Matrix::Zero(1, config.d_edge)) : max_pool_rows(final_states);
  const std::uint32_t h[] = {sub.head_index};
  const std::uint32_t t[] = {sub.tail_index};
  const Tensor parts[] = {pooled, gather_rows(nodes, h), gather_rows(nodes, t)};
  return {concat_cols(parts), states.edge_states};
}

}  // namespace gsnp

// SPDX-License-Identifier: Apache-2.0
#include "gsnp/predictor.hpp"

#include "gsnp/error.hpp"

namespace gsnp {

Tensor fuse_hypothesis(Tape& tape, const Model& model, const Tensor& edge_states, const Tensor& z) {
  const Tensor projected = model.affine_map(tape, pname::kProjection, z);
  if (projected.cols() != edge_states.cols())
    throw ShapeError("fuse_hypothesis: projected z " + shape_of(projected.value()) + " vs edge states " +
                     shape_of(edge_states.value()));
  return sigmoid(model.mlp(tape, pname::kFusion, add(edge_states, projected)));
}

EdgeMask sample_mask(const Tensor& probs, double temperature, NoiseStream& noise) {
  return {probs, gumbel_sigmoid(logit(probs, kLogitBound), temperature, noise), temperature};
}

EdgeMask expected_mask(const Tensor& probs) { return {probs, probs, 0.0}; }

MaskedSubgraph apply_mask(const EnclosingSubgraph& sub, const Tensor& soft_mask) {
  if (soft_mask.rows() != static_cast<Eigen::Index>(sub.num_edges()) || soft_mask.cols() != 1)
    throw ShapeError("apply_mask: mask " + shape_of(soft_mask.value()) + " for " + std::to_string(sub.num_edges()) +
                     " edges");
  return {&sub, soft_mask};
}

MaskedSubgraph apply_mask(const EnclosingSubgraph& sub, const EdgeMask& mask) {
  return apply_mask(sub, mask.soft_mask);
}

Tensor project_embedding(Tape& tape, const Model& model, const Tensor& embedding) {
  return model.affine_map(tape, pname::kHead, embedding);
}

Tensor score(Tape& tape, const Model& model, const MaskedSubgraph& masked, const RelationIndex& index,
             const Tensor& z, EncodeCounter* counter) {
  if (!masked.base) throw Error("score: masked subgraph has no base");
  const auto enc = encode_subgraph(tape, model, *masked.base, index, &masked.mask, counter);
  return cosine(project_embedding(tape, model, enc.embedding), z);
}

}  // namespace gsnp

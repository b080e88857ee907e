// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gsnp/autodiff.hpp"
#include "gsnp/encoder.hpp"
#include "gsnp/graph.hpp"
#include "gsnp/model.hpp"

namespace gsnp {

inline constexpr double kLogitBound = 30.0;

/// Per-edge existence probabilities (E x 1) and the relaxed mask sampled from them.
struct EdgeMask {
  Tensor probs;
  Tensor soft_mask;
  double temperature = 1.0;
};

struct MaskedSubgraph {
  const EnclosingSubgraph* base = nullptr;
  Tensor mask;
};

/// p = sigmoid(mlp(e_r + project(z))) per edge. `edge_states` is E x d_edge
/// and `z` is 1 x d_z.
Tensor fuse_hypothesis(Tape& tape, const Model& model, const Tensor& edge_states, const Tensor& z);

/// Binary-concrete sample per edge on the logit of p, clamped to +-30.
EdgeMask sample_mask(const Tensor& probs, double temperature, NoiseStream& noise);
/// Uses p itself as the soft mask.
EdgeMask expected_mask(const Tensor& probs);

/// Throws ShapeError when the mask length differs from the edge count.
MaskedSubgraph apply_mask(const EnclosingSubgraph& sub, const EdgeMask& mask);
MaskedSubgraph apply_mask(const EnclosingSubgraph& sub, const Tensor& soft_mask);

/// Maps a subgraph embedding to d_z.
Tensor project_embedding(Tape& tape, const Model& model, const Tensor& embedding);

/// cosine(project(encode(masked)), z), 0 when either side has zero norm.
Tensor score(Tape& tape, const Model& model, const MaskedSubgraph& masked, const RelationIndex& index,
             const Tensor& z, EncodeCounter* counter = nullptr);

}  // namespace gsnp

// SPDX-License-Identifier: Apache-2.0
#include "gsnp/hypothesis.hpp"

#include <vector>

#include "gsnp/error.hpp"

namespace gsnp {

Tensor context_repr(Tape& tape, const Model& model, std::span<const LabeledEmbedding> inputs) {
  if (inputs.empty()) throw DataError("context_repr: no labeled embeddings");
  std::vector<Tensor> rows;
  rows.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.label != 0 && in.label != 1) throw DataError("context labels must be 0 or 1");
    const Tensor parts[] = {in.embedding, tape.constant(Matrix::Constant(1, 1, in.label))};
    rows.push_back(concat_cols(parts));
  }
  return model.mlp(tape, pname::kContext, concat_rows(rows));
}

Tensor context_repr(Tape& tape, const Model& model, const Tensor& embedding, int label) {
  const LabeledEmbedding in[] = {{embedding, label}};
  return context_repr(tape, model, in);
}

Tensor aggregate(std::span<const Tensor> contexts) {
  if (contexts.empty()) throw DataError("aggregate: empty context list");
  return scale(sum(contexts), 1.0 / static_cast<double>(contexts.size()));
}

HypothesisDistribution distribution_params(Tape& tape, const Model& model, const Tensor& zbar,
                                           HypothesisSource source) {
  const Tensor chi = relu(model.mlp(tape, pname::kChi, zbar));
  HypothesisDistribution dist;
  dist.mu = model.mlp(tape, pname::kMu, chi);
  const Tensor gate = clamp(sigmoid(model.mlp(tape, pname::kSigma, chi)), 0.0, kSigmaGateMax);
  dist.sigma = affine(gate, 1.0 - kSigmaFloor, kSigmaFloor);
  dist.source = source;
  return dist;
}

HypothesisSample sample_hypothesis(const HypothesisDistribution& dist, NoiseStream& noise) {
  HypothesisSample s;
  s.z = gaussian_reparam(dist.mu, dist.sigma, noise, &s.epsilon);
  return s;
}

HypothesisSample sample_hypothesis(const HypothesisDistribution& dist, const Matrix& epsilon) {
  return {gaussian_reparam(dist.mu, dist.sigma, epsilon), epsilon};
}

HypothesisDistribution encode_hypothesis(Tape& tape, const Model& model, std::span<const LabeledEmbedding> inputs,
                                         HypothesisSource source) {
  if (inputs.empty()) throw DataError("encode_hypothesis: no labeled embeddings");
  const Tensor contexts = context_repr(tape, model, inputs);
  return distribution_params(tape, model, mean_rows(contexts), source);
}

}  // namespace gsnp

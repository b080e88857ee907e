// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "gsnp/autodiff.hpp"
#include "gsnp/model.hpp"

namespace gsnp {

enum class HypothesisSource { prior, posterior };

/// Diagonal Gaussian over the latent hypothesis z; mu and sigma are 1 x d_z.
struct HypothesisDistribution {
  Tensor mu;
  Tensor sigma;
  HypothesisSource source = HypothesisSource::prior;
};

struct HypothesisSample {
  Tensor z;
  Matrix epsilon;
};

struct LabeledEmbedding {
  Tensor embedding;
  int label = 1;
};

inline constexpr double kSigmaFloor = 0.1;
/// Keeps sigma strictly below 1 when the sigmoid saturates in double precision.
inline constexpr double kSigmaGateMax = 1.0 - 1e-12;

/// c = mlp(embedding || label) for each row; returns n x d_z.
Tensor context_repr(Tape& tape, const Model& model, std::span<const LabeledEmbedding> inputs);
Tensor context_repr(Tape& tape, const Model& model, const Tensor& embedding, int label);

/// Mean of the context representations, summed in list order.
Tensor aggregate(std::span<const Tensor> contexts);

/// chi = relu(mlp(zbar)); mu = mlp(chi); sigma = 0.1 + 0.9 * sigmoid(mlp(chi)),
/// so sigma lies in [0.1, 1).
HypothesisDistribution distribution_params(Tape& tape, const Model& model, const Tensor& zbar,
                                           HypothesisSource source = HypothesisSource::prior);

HypothesisSample sample_hypothesis(const HypothesisDistribution& dist, NoiseStream& noise);
HypothesisSample sample_hypothesis(const HypothesisDistribution& dist, const Matrix& epsilon);

/// context_repr, aggregate and distribution_params in sequence. Throws
/// DataError for an empty input.
HypothesisDistribution encode_hypothesis(Tape& tape, const Model& model, std::span<const LabeledEmbedding> inputs,
                                         HypothesisSource source);

}  // namespace gsnp

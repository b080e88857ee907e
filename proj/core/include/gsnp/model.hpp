// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsnp/autodiff.hpp"
#include "gsnp/graph.hpp"
#include "gsnp/params.hpp"

namespace gsnp {

struct ModelConfig {
  int d_edge = 128;
  int d_z = 100;
  int layers = 3;

  void validate() const;
  /// Width of a subgraph embedding e || a_h || a_t.
  int embedding_dim() const { return 3 * d_edge; }
};

/// Maps a graph's relation ids onto rows of the relation table.
struct RelationIndex {
  static constexpr std::int64_t kMissing = -1;
  std::vector<std::int64_t> rows;
  std::vector<std::string> names;  // graph relation names, for error messages
};

/// Names of the relations that label at least one triple of `kg`, in id order.
std::vector<std::string> edge_relation_names(const KnowledgeGraph& kg);

namespace pname {
inline constexpr const char* kRelationTable = "encoder.relation_table";
std::string layer_weight(int l);
std::string layer_bias(int l);
inline constexpr const char* kContext = "encoder.context";
inline constexpr const char* kChi = "encoder.chi";
inline constexpr const char* kMu = "encoder.mu";
inline constexpr const char* kSigma = "encoder.sigma";
inline constexpr const char* kHead = "predictor.head";
inline constexpr const char* kProjection = "extractor.z_projection";
inline constexpr const char* kFusion = "extractor.fusion";
}  // namespace pname

/// Parameters of the whole pipeline. Encoder (theta): relation table,
/// message-passing layers, context/chi/mu/sigma MLPs. Predictor (phi): the
/// head mapping subgraph embeddings to d_z. Extractor (psi): the z projection
/// and the edge-probability MLP.
class Model {
 public:
  Model(const ModelConfig& config, std::vector<std::string> relation_names, std::uint64_t seed);
  /// Wraps an existing store; throws DataError if names or shapes disagree.
  Model(const ModelConfig& config, std::vector<std::string> relation_names, ParameterStore store);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& params() noexcept { return store_; }
  const ParameterStore& params() const noexcept { return store_; }
  const std::vector<std::string>& relation_names() const noexcept { return relation_names_; }

  RelationIndex relation_index(const KnowledgeGraph& kg) const;

  /// Binds `name` on the tape.
  Tensor param(Tape& tape, const std::string& name) const { return tape.parameter(store_, name); }
  /// Two-layer perceptron registered under `prefix`: linear, relu, linear.
  Tensor mlp(Tape& tape, const std::string& prefix, const Tensor& x) const;
  Tensor affine_map(Tape& tape, const std::string& prefix, const Tensor& x) const;

  nlohmann::json metadata() const;
  static Model from_checkpoint(const ParameterStore& store, const nlohmann::json& metadata);

 private:
  void register_all(std::uint64_t seed);
  void add_linear(const std::string& prefix, ParamGroup group, int in, int out, std::uint64_t seed);
  void add_mlp(const std::string& prefix, ParamGroup group, int in, int hidden, int out, std::uint64_t seed);

  ModelConfig config_;
  std::vector<std::string> relation_names_;
  ParameterStore store_;
};

}  // namespace gsnp

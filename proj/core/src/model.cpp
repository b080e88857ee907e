// SPDX-License-Identifier: Apache-2.0
#include "gsnp/model.hpp"

#include <unordered_map>

#include <nlohmann/json.hpp>

#include "gsnp/error.hpp"
#include "gsnp/random.hpp"

namespace gsnp {

void ModelConfig::validate() const {
  if (d_edge <= 0 || d_z <= 0) throw ConfigError("dimensions d_edge and d_z must be positive");
  if (layers < 1) throw ConfigError("layers must be at least 1");
}

std::vector<std::string> edge_relation_names(const KnowledgeGraph& kg) {
  std::vector<bool> used(kg.num_relations(), false);
  for (const auto& t : kg.triples()) used[t.relation] = true;
  std::vector<std::string> out;
  for (std::size_t r = 0; r < used.size(); ++r)
    if (used[r]) out.push_back(kg.relations().name(static_cast<RelationId>(r)));
  return out;
}

namespace pname {
std::string layer_weight(int l) { return "encoder.layer" + std::to_string(l) + ".W"; }
std::string layer_bias(int l) { return "encoder.layer" + std::to_string(l) + ".b"; }
}  // namespace pname

Model::Model(const ModelConfig& config, std::vector<std::string> relation_names, std::uint64_t seed)
    : config_(config), relation_names_(std::move(relation_names)) {
  config_.validate();
  register_all(seed);
}

Model::Model(const ModelConfig& config, std::vector<std::string> relation_names, ParameterStore store)
    : config_(config), relation_names_(std::move(relation_names)) {
  config_.validate();
  register_all(0);
  for (const auto& expected : store_.all()) {
    if (!store.contains(expected.name)) throw DataError("checkpoint lacks parameter '" + expected.name + "'");
    const auto& got = store.get(expected.name);
    if (got.value.rows() != expected.value.rows() || got.value.cols() != expected.value.cols())
      throw DataError("checkpoint parameter '" + expected.name + "' is " + shape_of(got.value) + ", expected " +
                      shape_of(expected.value));
    if (got.group != expected.group) throw DataError("checkpoint parameter '" + expected.name + "' has the wrong group");
  }
  if (store.all().size() != store_.all().size()) throw DataError("checkpoint has unexpected extra parameters");
  store_ = std::move(store);
}

void Model::add_linear(const std::string& prefix, ParamGroup group, int in, int out, std::uint64_t seed) {
  store_.add(prefix + ".W", group, uniform_init(in, out, static_cast<std::size_t>(in), mix_seed(seed, 0)));
  store_.add(prefix + ".b", group, uniform_init(1, out, static_cast<std::size_t>(in), mix_seed(seed, 1)));
}

void Model::add_mlp(const std::string& prefix, ParamGroup group, int in, int hidden, int out, std::uint64_t seed) {
  add_linear(prefix + ".0", group, in, hidden, mix_seed(seed, 10));
  add_linear(prefix + ".1", group, hidden, out, mix_seed(seed, 11));
}

void Model::register_all(std::uint64_t seed) {
  const int d = config_.d_edge;
  const int dz = config_.d_z;
  const int emb = config_.embedding_dim();
  std::uint64_t k = 0;
  auto next = [&] { return mix_seed(seed, k++); };

  store_.add(pname::kRelationTable, ParamGroup::encoder,
             uniform_init(static_cast<Eigen::Index>(relation_names_.size()), d, static_cast<std::size_t>(d), next()));
  for (int l = 0; l < config_.layers; ++l) {
    const int in = 2 * (d + 2) + d;
    const auto s = next();
    store_.add(pname::layer_weight(l), ParamGroup::encoder, uniform_init(in, d, static_cast<std::size_t>(in), mix_seed(s, 0)));
    store_.add(pname::layer_bias(l), ParamGroup::encoder, uniform_init(1, d, static_cast<std::size_t>(in), mix_seed(s, 1)));
  }
  add_mlp(pname::kContext, ParamGroup::encoder, emb + 1, dz, dz, next());
  add_mlp(pname::kChi, ParamGroup::encoder, dz, dz, dz, next());
  add_mlp(pname::kMu, ParamGroup::encoder, dz, dz, dz, next());
  add_mlp(pname::kSigma, ParamGroup::encoder, dz, dz, dz, next());
  add_linear(pname::kHead, ParamGroup::predictor, emb, dz, next());
  add_linear(pname::kProjection, ParamGroup::extractor, dz, d, next());
  add_mlp(pname::kFusion, ParamGroup::extractor, d, d, 1, next());
}

RelationIndex Model::relation_index(const KnowledgeGraph& kg) const {
  std::unordered_map<std::string, std::int64_t> row;
  for (std::size_t i = 0; i < relation_names_.size(); ++i) row.emplace(relation_names_[i], static_cast<std::int64_t>(i));
  RelationIndex index;
  index.names = kg.relations().names();
  index.rows.assign(kg.num_relations(), RelationIndex::kMissing);
  for (std::size_t r = 0; r < kg.num_relations(); ++r) {
    auto it = row.find(index.names[r]);
    if (it != row.end()) index.rows[r] = it->second;
  }
  return index;
}

Tensor Model::affine_map(Tape& tape, const std::string& prefix, const Tensor& x) const {
  return linear(x, param(tape, prefix + ".W"), param(tape, prefix + ".b"));
}

Tensor Model::mlp(Tape& tape, const std::string& prefix, const Tensor& x) const {
  return affine_map(tape, prefix + ".1", relu(affine_map(tape, prefix + ".0", x)));
}

nlohmann::json Model::metadata() const {
  return {{"d_edge", config_.d_edge},
          {"d_z", config_.d_z},
          {"layers", config_.layers},
          {"relations", relation_names_}};
}

Model Model::from_checkpoint(const ParameterStore& store, const nlohmann::json& metadata) {
  try {
    const auto& m = metadata.at("model");
    ModelConfig config;
    config.d_edge = m.at("d_edge").get<int>();
    config.d_z = m.at("d_z").get<int>();
    config.layers = m.at("layers").get<int>();
    return Model(config, m.at("relations").get<std::vector<std::string>>(), store);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
}

}  // namespace gsnp

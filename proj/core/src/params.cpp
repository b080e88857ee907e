// SPDX-License-Identifier: Apache-2.0
#include "gsnp/params.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "gsnp/error.hpp"
#include "gsnp/random.hpp"

namespace gsnp {

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::predictor: return "predictor";
    case ParamGroup::extractor: return "extractor";
  }
  return "?";
}

ParamGroup param_group_from_string(std::string_view s) {
  if (s == "encoder") return ParamGroup::encoder;
  if (s == "predictor") return ParamGroup::predictor;
  if (s == "extractor") return ParamGroup::extractor;
  throw DataError("unknown parameter group '" + std::string(s) + "'");
}

Parameter& ParameterStore::add(std::string name, ParamGroup group, Matrix init) {
  if (index_.contains(name)) throw ConfigError("parameter '" + name + "' registered twice");
  index_.emplace(name, params_.size());
  Parameter p;
  p.name = std::move(name);
  p.group = group;
  p.first_moment = Matrix::Zero(init.rows(), init.cols());
  p.second_moment = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw DataError("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter& ParameterStore::get(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

std::vector<std::string> ParameterStore::names(ParamGroup group) const {
  std::vector<std::string> out;
  for (const auto& p : params_)
    if (p.group == group) out.push_back(p.name);
  return out;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_all() {
  for (auto& p : params_) {
    p.value.setZero();
    p.first_moment.setZero();
    p.second_moment.setZero();
  }
}

void adam_step(ParameterStore& store, const GradientMap& grads, const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
  const std::uint64_t t = store.step() + 1;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (auto& p : store.all()) {
    auto it = grads.find(p.name);
    if (it == grads.end()) {
      p.first_moment *= config.beta1;
      p.second_moment *= config.beta2;
      continue;
    }
    const Matrix& g = it->second;
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols())
      throw ShapeError("gradient for '" + p.name + "' has the wrong shape");
    p.first_moment = config.beta1 * p.first_moment + (1.0 - config.beta1) * g;
    p.second_moment = config.beta2 * p.second_moment + (1.0 - config.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = p.first_moment / correction1;
    const Matrix v_hat = p.second_moment / correction2;
    p.value.array() -= config.lr * m_hat.array() / (v_hat.array().sqrt() + config.epsilon);
  }
  store.set_step(t);
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  EpisodeRng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  return m;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json flatten(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Matrix unflatten(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols)
    throw DataError("checkpoint field '" + what + "' does not match its shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[k++].get<double>();
  return m;
}

}  // namespace

nlohmann::json checkpoint_to_json(const ParameterStore& store, const nlohmann::json& metadata) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : store.all()) {
    params.push_back({{"name", p.name},
                      {"group", std::string(to_string(p.group))},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"value", flatten(p.value)},
                      {"m", flatten(p.first_moment)},
                      {"v", flatten(p.second_moment)}});
  }
  return {{"format", "gsnp-checkpoint"},
          {"version", kCheckpointVersion},
          {"step", store.step()},
          {"metadata", metadata},
          {"parameters", std::move(params)}};
}

ParameterStore checkpoint_from_json(const nlohmann::json& j, nlohmann::json* metadata) {
  try {
    if (j.at("format").get<std::string>() != "gsnp-checkpoint") throw DataError("not a gsnp checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    ParameterStore store;
    for (const auto& p : j.at("parameters")) {
      const auto name = p.at("name").get<std::string>();
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      auto& param = store.add(name, param_group_from_string(p.at("group").get<std::string>()),
                              unflatten(p.at("value"), rows, cols, name));
      param.first_moment = unflatten(p.at("m"), rows, cols, name + ".m");
      param.second_moment = unflatten(p.at("v"), rows, cols, name + ".v");
    }
    store.set_step(j.at("step").get<std::uint64_t>());
    if (metadata) *metadata = j.value("metadata", nlohmann::json::object());
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(store, metadata).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

ParameterStore load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j, metadata);
}

}  // namespace gsnp

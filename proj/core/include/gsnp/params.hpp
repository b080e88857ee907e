// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace gsnp {

using Matrix = Eigen::MatrixXd;

/// Owner of a parameter: encoder (theta), predictor/decoder (phi) or
/// extractor (psi).
enum class ParamGroup { encoder, predictor, extractor };

std::string_view to_string(ParamGroup g);
ParamGroup param_group_from_string(std::string_view s);

struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::encoder;
  Matrix value;
  Matrix first_moment;
  Matrix second_moment;
};

using GradientMap = std::map<std::string, Matrix>;

/// Named trainable tensors with their Adam state. Iteration follows
/// registration order.
class ParameterStore {
 public:
  /// Throws ConfigError on a duplicate name.
  Parameter& add(std::string name, ParamGroup group, Matrix init);

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  std::vector<Parameter>& all() noexcept { return params_; }
  const std::vector<Parameter>& all() const noexcept { return params_; }
  std::vector<std::string> names(ParamGroup group) const;
  std::size_t num_scalars() const;

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  /// Sets every value and optimizer moment to zero.
  void zero_all();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update. Parameters missing from `grads` keep
/// their values but their moments still decay.
void adam_step(ParameterStore& store, const GradientMap& grads, const AdamConfig& config);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a seeded engine.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in, std::uint64_t seed);

inline constexpr int kCheckpointVersion = 1;

/// Checkpoint layout: {"format", "version", "step", "metadata", "parameters": [...]}
/// where each parameter carries name, group, rows, cols, value, m, v (row-major).
nlohmann::json checkpoint_to_json(const ParameterStore& store, const nlohmann::json& metadata);
ParameterStore checkpoint_from_json(const nlohmann::json& j, nlohmann::json* metadata = nullptr);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const nlohmann::json& metadata);
ParameterStore load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace gsnp

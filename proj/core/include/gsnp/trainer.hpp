// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsnp/autodiff.hpp"
#include "gsnp/dataset.hpp"
#include "gsnp/evaluator.hpp"
#include "gsnp/hypothesis.hpp"
#include "gsnp/model.hpp"
#include "gsnp/tasks.hpp"

namespace gsnp {

struct TrainConfig {
  double lr = 1e-5;
  double margin = 1.0;
  double tau = 0.7;
  std::size_t K = 3;
  std::size_t n_neg = 1;
  std::size_t T = 1;
  double temperature = 1.0;
  double w_z = 1.0;
  double w_mask = 1.0;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  int hop = 2;
  int d_edge = 128;
  int d_z = 100;
  int layers = 3;

  /// Hard cap on episodes; 0 means max_epochs passes over the training relations.
  std::size_t max_episodes = 0;
  std::size_t batch_size = 1;
  /// Queries kept per training episode; 0 keeps all.
  std::size_t max_queries = 0;
  std::size_t valid_every = 50;
  std::size_t patience = 10;
  std::size_t n_cand = 50;
  std::size_t eval_samples = 1;
  bool eval_sample_mask = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t threads = 1;

  void validate() const;
  ModelConfig model_config() const;
  AdamConfig adam() const;
  EvalConfig eval_config() const;

  /// Sets one key from its text form; throws ConfigError on an unknown key
  /// or an unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Flat `key = value` text (blank lines and '#' comments allowed). Every
  /// unknown key is listed in the thrown ConfigError.
  static TrainConfig parse(std::istream& in, const std::string& source);
  static TrainConfig load(const std::filesystem::path& path);
  std::string to_text() const;
  nlohmann::json to_json() const;
  static std::vector<std::string> keys();
};

struct LossReport {
  double total = 0.0;
  double ranking = 0.0;
  double kl_z = 0.0;
  double kl_mask = 0.0;
  double w_z = 1.0;
  double w_mask = 1.0;
  std::string relation;
  std::size_t K = 0;
  std::size_t support_edges = 0;
  std::size_t query_edges = 0;
  /// Unmasked encodes of support-side and query-side subgraphs.
  std::size_t support_encodes = 0;
  std::size_t query_encodes = 0;
  /// Masked re-encodes, T per scored query-side subgraph.
  std::size_t masked_encodes = 0;
  /// Query-side subgraphs scored: queries plus their negatives.
  std::size_t m_scored = 0;
  /// Edge count n and tau of the mask prior; the additive constant c(n, tau)
  /// is left out of the loss.
  std::size_t mask_edges = 0;
  double tau = 0.7;

  std::size_t encoder_invocations() const noexcept { return support_encodes + query_encodes; }
  nlohmann::json to_json() const;
};

/// Closed-form KL(q || p) between diagonal Gaussians, summed over coordinates.
/// Throws NumericError for a non-positive sigma.
double gaussian_kl(const Matrix& mu_q, const Matrix& sigma_q, const Matrix& mu_p, const Matrix& sigma_p);
Tensor gaussian_kl(const HypothesisDistribution& q, const HypothesisDistribution& p);

/// Sum over edges of KL(Bern(p) || Bern(tau)) with 0 log 0 = 0. Throws
/// ConfigError unless 0 < tau < 1.
double mask_kl(const Matrix& probs, double tau);
Tensor mask_kl(const Tensor& probs, double tau);

/// Sum over pairs of max(0, gamma + s_neg - s_pos). Throws DataError for an
/// empty or unequal pairing.
Tensor margin_ranking_loss(std::span<const Tensor> pos, std::span<const Tensor> neg, double gamma);

struct EpisodeResult {
  Tensor total;
  Tensor ranking;
  Tensor kl_z;
  Tensor kl_mask;
  LossReport report;
};

/// Assembles the episode objective: subgraphs for every task triple, prior
/// from support and support negatives, posterior adding labeled queries and
/// query negatives, T posterior samples each masking and scoring every
/// query-side subgraph. With no queries the ranking and mask terms are zero.
EpisodeResult episode_loss(Tape& tape, const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                           const FewShotTask& task, const TrainConfig& config, NoiseStream& noise);

struct ValidationRound {
  std::size_t episode = 0;
  double ranking = 0.0;
  double kl_z = 0.0;
  double kl_mask = 0.0;
  /// Negative when there is no validation split.
  double val_mrr = -1.0;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  /// Receives one JSON line per validation round.
  std::ostream* metrics = nullptr;
  std::function<void(std::size_t episode, const LossReport&)> on_episode;
};

struct TrainResult {
  Model model;
  std::vector<ValidationRound> rounds;
  std::size_t episodes = 0;
  std::size_t best_episode = 0;
  double best_val_mrr = -1.0;

  nlohmann::json checkpoint_metadata(const TrainConfig& config) const;
};

/// Episodic training with Adam, validation every `valid_every` episodes and
/// early stopping on validation MRR after `patience` rounds without gain.
/// Ties on validation MRR go to the round with the lower mean ranking term.
/// The returned model holds the best validated parameters. Throws
/// NumericError with episode details on a non-finite loss.
TrainResult train(const Dataset& data, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace gsnp

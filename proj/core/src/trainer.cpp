// SPDX-License-Identifier: Apache-2.0
#include "gsnp/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsnp/encoder.hpp"
#include "gsnp/error.hpp"
#include "gsnp/predictor.hpp"

namespace gsnp {

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
  std::function<nlohmann::json(const TrainConfig&)> json;
};

template <typename T>
Field field(T TrainConfig::*member) {
  Field f;
  f.set = [member](TrainConfig& c, const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(key, text);
    } else {
      c.*member = parse_number<T>(key, text);
    }
  };
  f.get = [member](const TrainConfig& c) {
    if constexpr (std::is_same_v<T, bool>) {
      return std::string(c.*member ? "true" : "false");
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_double(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  f.json = [member](const TrainConfig& c) { return nlohmann::json(c.*member); };
  return f;
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"lr", field(&TrainConfig::lr)},
      {"margin", field(&TrainConfig::margin)},
      {"tau", field(&TrainConfig::tau)},
      {"K", field(&TrainConfig::K)},
      {"n_neg", field(&TrainConfig::n_neg)},
      {"T", field(&TrainConfig::T)},
      {"temperature", field(&TrainConfig::temperature)},
      {"w_z", field(&TrainConfig::w_z)},
      {"w_mask", field(&TrainConfig::w_mask)},
      {"max_epochs", field(&TrainConfig::max_epochs)},
      {"seed", field(&TrainConfig::seed)},
      {"hop", field(&TrainConfig::hop)},
      {"d_edge", field(&TrainConfig::d_edge)},
      {"d_z", field(&TrainConfig::d_z)},
      {"layers", field(&TrainConfig::layers)},
      {"max_episodes", field(&TrainConfig::max_episodes)},
      {"batch_size", field(&TrainConfig::batch_size)},
      {"max_queries", field(&TrainConfig::max_queries)},
      {"valid_every", field(&TrainConfig::valid_every)},
      {"patience", field(&TrainConfig::patience)},
      {"n_cand", field(&TrainConfig::n_cand)},
      {"eval_samples", field(&TrainConfig::eval_samples)},
      {"eval_sample_mask", field(&TrainConfig::eval_sample_mask)},
      {"beta1", field(&TrainConfig::beta1)},
      {"beta2", field(&TrainConfig::beta2)},
      {"adam_eps", field(&TrainConfig::adam_eps)},
      {"threads", field(&TrainConfig::threads)},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return &f;
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(lr > 0.0)) problems.push_back("lr must be positive");
  if (!(margin > 0.0)) problems.push_back("margin must be positive");
  if (!(tau > 0.0 && tau < 1.0)) problems.push_back("tau must lie in (0, 1)");
  if (K < 1) problems.push_back("K must be at least 1");
  if (n_neg < 1) problems.push_back("n_neg must be at least 1");
  if (T < 1) problems.push_back("T must be at least 1");
  if (!(temperature > 0.0)) problems.push_back("temperature must be positive");
  if (!(w_z >= 0.0) || !(w_mask >= 0.0)) problems.push_back("kl weights must be non-negative");
  if (hop < 1) problems.push_back("hop must be at least 1");
  if (d_edge < 1 || d_z < 1 || layers < 1) problems.push_back("d_edge, d_z and layers must be positive");
  if (batch_size < 1) problems.push_back("batch_size must be at least 1");
  if (valid_every < 1) problems.push_back("valid_every must be at least 1");
  if (eval_samples < 1) problems.push_back("eval_samples must be at least 1");
  if (threads < 1) problems.push_back("threads must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) problems.push_back("beta1 and beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) problems.push_back("adam_eps must be positive");
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

ModelConfig TrainConfig::model_config() const { return {d_edge, d_z, layers}; }

AdamConfig TrainConfig::adam() const { return {lr, beta1, beta2, adam_eps}; }

EvalConfig TrainConfig::eval_config() const {
  EvalConfig e;
  e.shots = K;
  e.samples = eval_samples;
  e.sample_mask = eval_sample_mask;
  e.seed = seed;
  e.negatives_per_support = n_neg;
  e.hop = hop;
  e.temperature = temperature;
  e.n_cand = n_cand;
  return e;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key: " + key);
  f->set(*this, key, trim(value));
}

TrainConfig TrainConfig::parse(std::istream& in, const std::string& source) {
  TrainConfig c;
  std::vector<std::string> unknown;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    if (!find_field(key)) {
      unknown.push_back(key);
      continue;
    }
    c.set(key, body.substr(eq + 1));
  }
  if (!unknown.empty()) {
    std::string msg = source + ": unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, f] : fields()) j[k] = f.json(*this);
  return j;
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

nlohmann::json LossReport::to_json() const {
  return {{"total", total},
          {"ranking", ranking},
          {"kl_z", kl_z},
          {"kl_mask", kl_mask},
          {"relation", relation},
          {"K", K},
          {"support_edges", support_edges},
          {"query_edges", query_edges},
          {"support_encodes", support_encodes},
          {"query_encodes", query_encodes},
          {"masked_encodes", masked_encodes},
          {"m_scored", m_scored},
          {"mask_edges", mask_edges},
          {"tau", tau}};
}

// ---------------------------------------------------------------------------
// Loss terms

namespace {

void check_sigma(const Matrix& s, const char* which) {
  if ((s.array() <= 0.0).any() || !s.allFinite())
    throw NumericError(std::string("gaussian_kl: ") + which + " sigma must be strictly positive");
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("mask_kl: tau must lie in (0, 1)");
}

double xlogy_ratio(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); }

}  // namespace

double gaussian_kl(const Matrix& mu_q, const Matrix& sigma_q, const Matrix& mu_p, const Matrix& sigma_p) {
  if (mu_q.size() != sigma_q.size() || mu_q.size() != mu_p.size() || mu_q.size() != sigma_p.size())
    throw ShapeError("gaussian_kl: dimensions differ");
  check_sigma(sigma_q, "posterior");
  check_sigma(sigma_p, "prior");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mu_q.size(); ++i) {
    const double d = mu_q(i) - mu_p(i);
    kl += std::log(sigma_p(i) / sigma_q(i)) + (sigma_q(i) * sigma_q(i) + d * d) / (2.0 * sigma_p(i) * sigma_p(i)) - 0.5;
  }
  return kl;
}

Tensor gaussian_kl(const HypothesisDistribution& q, const HypothesisDistribution& p) {
  Matrix out(1, 1);
  out(0, 0) = gaussian_kl(q.mu.value(), q.sigma.value(), p.mu.value(), p.sigma.value());
  const Tensor parents[] = {q.mu, q.sigma, p.mu, p.sigma};
  const Tensor mq = q.mu, sq = q.sigma, mp = p.mu, sp = p.sigma;
  return q.mu.tape()->record(std::move(out), parents, [mq, sq, mp, sp](Tape& t, const Matrix& g, const Matrix&) {
    const double up = g(0, 0);
    const auto& a = mq.value().array();
    const auto& s = sq.value().array();
    const auto& b = mp.value().array();
    const auto& r = sp.value().array();
    const Eigen::ArrayXXd diff = a - b;
    const Eigen::ArrayXXd var_p = r * r;
    t.accumulate(mq, (up * diff / var_p).matrix());
    t.accumulate(mp, (-up * diff / var_p).matrix());
    t.accumulate(sq, (up * (-1.0 / s + s / var_p)).matrix());
    t.accumulate(sp, (up * (1.0 / r - (s * s + diff * diff) / (var_p * r))).matrix());
  });
}

double mask_kl(const Matrix& probs, double tau) {
  check_tau(tau);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs(i);
    if (!(p >= 0.0 && p <= 1.0)) throw NumericError("mask_kl: probability outside [0, 1]");
    kl += xlogy_ratio(p, tau) + xlogy_ratio(1.0 - p, 1.0 - tau);
  }
  return kl;
}

Tensor mask_kl(const Tensor& probs, double tau) {
  Matrix out(1, 1);
  out(0, 0) = mask_kl(probs.value(), tau);
  const Tensor parents[] = {probs};
  const double logit_tau = std::log(tau / (1.0 - tau));
  return probs.tape()->record(std::move(out), parents, [probs, logit_tau](Tape& t, const Matrix& g, const Matrix&) {
    const Eigen::ArrayXXd p = probs.value().array().max(1e-12).min(1.0 - 1e-12);
    t.accumulate(probs, (g(0, 0) * ((p / (1.0 - p)).log() - logit_tau)).matrix());
  });
}

Tensor margin_ranking_loss(std::span<const Tensor> pos, std::span<const Tensor> neg, double gamma) {
  if (pos.empty() || pos.size() != neg.size())
    throw DataError("margin_ranking_loss: need equally many positive and negative scores, got " +
                    std::to_string(pos.size()) + " and " + std::to_string(neg.size()));
  Tape& tape = *pos.front().tape();
  const Tensor p = concat_rows(pos);
  const Tensor n = concat_rows(neg);
  (void)tape;
  return sum_all(relu(affine(sub(n, p), 1.0, gamma)));
}

// ---------------------------------------------------------------------------
// Episode

EpisodeResult episode_loss(Tape& tape, const Model& model, const KnowledgeGraph& graph, const RelationIndex& index,
                           const FewShotTask& task, const TrainConfig& config, NoiseStream& noise) {
  if (task.support.empty()) throw DataError("task '" + task.id + "' has no support triples");
  if (task.query_negatives.size() != task.queries.size())
    throw DataError("task '" + task.id + "' needs one negative per query");
  EpisodeResult out;
  LossReport& rep = out.report;
  rep.relation = task.relation;
  rep.K = task.support.size();
  rep.w_z = config.w_z;
  rep.w_mask = config.w_mask;
  rep.tau = config.tau;

  auto extract = [&](const Triple& t) { return enclosing_subgraph(graph, t.head, t.tail, config.hop, t.relation); };
  EncodeCounter support_counter;
  EncodeCounter query_counter;
  std::vector<LabeledEmbedding> context;
  auto add_support = [&](const Triple& t, int label) {
    const auto sub = extract(t);
    rep.support_edges += sub.num_edges();
    context.push_back({encode_subgraph(tape, model, sub, index, nullptr, &support_counter).embedding, label});
  };
  for (const auto& t : task.support) add_support(t, 1);
  for (const auto& t : task.support_negatives) add_support(t, 0);

  std::vector<LabeledEmbedding> posterior_inputs = context;
  std::vector<EnclosingSubgraph> query_subs;
  std::vector<Tensor> query_states;
  query_subs.reserve(2 * task.queries.size());
  auto add_query = [&](const Triple& t, int label) {
    query_subs.push_back(extract(t));
    rep.query_edges += query_subs.back().num_edges();
    const auto enc = encode_subgraph(tape, model, query_subs.back(), index, nullptr, &query_counter);
    posterior_inputs.push_back({enc.embedding, label});
    query_states.push_back(enc.final_edge_states);
  };
  for (std::size_t i = 0; i < task.queries.size(); ++i) {
    add_query(task.queries[i], 1);
    add_query(task.query_negatives[i], 0);
  }

  const auto prior = encode_hypothesis(tape, model, context, HypothesisSource::prior);
  const auto posterior = encode_hypothesis(tape, model, posterior_inputs, HypothesisSource::posterior);
  out.kl_z = gaussian_kl(posterior, prior);

  if (query_subs.empty()) {
    out.ranking = tape.constant(Matrix::Zero(1, 1));
    out.kl_mask = tape.constant(Matrix::Zero(1, 1));
  } else {
    std::vector<Tensor> ranking_terms;
    std::vector<Tensor> mask_terms;
    for (std::size_t s = 0; s < config.T; ++s) {
      const Tensor z = sample_hypothesis(posterior, noise).z;
      std::vector<Tensor> pos;
      std::vector<Tensor> neg;
      std::vector<Tensor> kls;
      for (std::size_t j = 0; j < query_subs.size(); ++j) {
        const Tensor probs = fuse_hypothesis(tape, model, query_states[j], z);
        const EdgeMask mask = sample_mask(probs, config.temperature, noise);
        (j % 2 == 0 ? pos : neg).push_back(score(tape, model, apply_mask(query_subs[j], mask), index, z, &query_counter));
        kls.push_back(mask_kl(probs, config.tau));
      }
      ranking_terms.push_back(margin_ranking_loss(pos, neg, config.margin));
      mask_terms.push_back(sum(kls));
    }
    const double inv_t = 1.0 / static_cast<double>(config.T);
    out.ranking = scale(sum(ranking_terms), inv_t);
    out.kl_mask = scale(sum(mask_terms), inv_t);
  }
  out.total = add(add(out.ranking, scale(out.kl_z, config.w_z)), scale(out.kl_mask, config.w_mask));

  rep.total = out.total.item();
  rep.ranking = out.ranking.item();
  rep.kl_z = out.kl_z.item();
  rep.kl_mask = out.kl_mask.item();
  rep.support_encodes = support_counter.unmasked;
  rep.query_encodes = query_counter.unmasked;
  rep.masked_encodes = query_counter.masked;
  rep.m_scored = query_subs.size();
  rep.mask_edges = rep.query_edges;
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

nlohmann::json ValidationRound::to_json() const {
  nlohmann::json j = {{"episode", episode}, {"ranking", ranking}, {"kl_z", kl_z}, {"kl_mask", kl_mask}};
  j["val_mrr"] = val_mrr < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(val_mrr);
  return j;
}

nlohmann::json TrainResult::checkpoint_metadata(const TrainConfig& config) const {
  return {{"model", model.metadata()},
          {"config", config.to_json()},
          {"episodes", episodes},
          {"best_episode", best_episode},
          {"best_val_mrr", best_val_mrr < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(best_val_mrr)}};
}

namespace {

struct EpisodeOutcome {
  LossReport report;
  GradientMap grads;
};

EpisodeOutcome run_episode(const Model& model, const Dataset& data, const RelationIndex& index,
                           const std::vector<Triple>& triples, const TrainConfig& config, std::size_t episode) {
  EpisodeRng rng = EpisodeRng(config.seed).split(episode);
  SampleOptions options;
  options.negatives_per_support = config.n_neg;
  options.max_queries = config.max_queries;
  const FewShotTask task = sample_task(data.train_graph, triples, config.K, rng, options);
  NoiseStream noise(mix_seed(config.seed, 0x45504953ull + episode));
  Tape tape;
  auto result = episode_loss(tape, model, data.train_graph, index, task, config, noise);
  if (!std::isfinite(result.report.total)) {
    const auto& r = result.report;
    throw NumericError("non-finite loss at episode " + std::to_string(episode) + " (relation " + r.relation +
                       ", K=" + std::to_string(r.K) + ", support edges " + std::to_string(r.support_edges) +
                       ", query edges " + std::to_string(r.query_edges) + "): ranking " + std::to_string(r.ranking) +
                       ", kl_z " + std::to_string(r.kl_z) + ", kl_mask " + std::to_string(r.kl_mask));
  }
  tape.backward(result.total);
  return {result.report, tape.parameter_gradients()};
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  TrainResult result{Model(config.model_config(), data.edge_relations(), mix_seed(config.seed, 1)), {}, 0, 0, -1.0};
  Model& model = result.model;
  const RelationIndex index = model.relation_index(data.train_graph);
  const auto by_relation = data.train_relation_triples();
  if (by_relation.empty()) throw DataError("no training tasks");
  std::vector<const std::vector<Triple>*> relations;
  for (const auto& [r, triples] : by_relation) relations.push_back(&triples);

  std::size_t budget = config.max_epochs * relations.size();
  if (config.max_episodes > 0) budget = std::min(budget, config.max_episodes);
  const EvalConfig eval = config.eval_config();
  const AdamConfig adam = config.adam();

  EpisodeRng order_rng = EpisodeRng(config.seed).split(0xFFFFFFFFull);
  std::vector<std::size_t> order(relations.size());
  std::optional<ParameterStore> best;
  std::size_t stale = 0;
  double best_ranking = std::numeric_limits<double>::infinity();
  ValidationRound pending;
  std::size_t since_round = 0;

  auto validate = [&](std::size_t episode) {
    ValidationRound round = pending;
    round.episode = episode;
    if (since_round > 0) {
      round.ranking /= static_cast<double>(since_round);
      round.kl_z /= static_cast<double>(since_round);
      round.kl_mask /= static_cast<double>(since_round);
    }
    bool gain = true;
    bool replace = true;
    if (!data.valid_tasks.empty()) {
      round.val_mrr = evaluate_split(model, data.test_graph, data.valid_tasks, eval).mrr;
      gain = round.val_mrr > result.best_val_mrr;
      replace = gain || (round.val_mrr == result.best_val_mrr && round.ranking < best_ranking);
    }
    if (replace) {
      best = model.params();
      best_ranking = round.ranking;
      result.best_episode = episode;
      result.best_val_mrr = round.val_mrr;
    }
    stale = gain ? 0 : stale + 1;
    result.rounds.push_back(round);
    if (hooks.metrics) *hooks.metrics << round.to_json().dump() << '\n';
    pending = {};
    since_round = 0;
    return data.valid_tasks.empty() || stale < config.patience;
  };

  std::size_t episode = 0;
  bool keep_going = budget > 0;
  while (keep_going && episode < budget) {
    const std::size_t batch = std::min(config.batch_size, budget - episode);
    std::vector<std::size_t> ids;
    std::vector<const std::vector<Triple>*> picks;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t e = episode + b;
      if (e % relations.size() == 0) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);
      }
      ids.push_back(e + 1);
      picks.push_back(relations[order[e % relations.size()]]);
    }
    std::vector<EpisodeOutcome> outcomes(batch);
    if (config.threads > 1 && batch > 1) {
      for (std::size_t start = 0; start < batch; start += config.threads) {
        std::vector<std::future<EpisodeOutcome>> jobs;
        for (std::size_t b = start; b < std::min(batch, start + config.threads); ++b)
          jobs.push_back(std::async(std::launch::async, run_episode, std::cref(model), std::cref(data),
                                    std::cref(index), std::cref(*picks[b]), std::cref(config), ids[b]));
        for (std::size_t b = start; b < start + jobs.size(); ++b) outcomes[b] = jobs[b - start].get();
      }
    } else {
      for (std::size_t b = 0; b < batch; ++b) outcomes[b] = run_episode(model, data, index, *picks[b], config, ids[b]);
    }

    GradientMap grads = std::move(outcomes.front().grads);
    for (std::size_t b = 1; b < batch; ++b)
      for (auto& [name, g] : outcomes[b].grads) grads.at(name) += g;
    if (batch > 1)
      for (auto& [name, g] : grads) g /= static_cast<double>(batch);
    adam_step(model.params(), grads, adam);

    for (std::size_t b = 0; b < batch; ++b) {
      const auto& r = outcomes[b].report;
      pending.ranking += r.ranking;
      pending.kl_z += r.kl_z;
      pending.kl_mask += r.kl_mask;
      ++since_round;
      if (hooks.on_episode) hooks.on_episode(ids[b], r);
    }
    const std::size_t before = episode;
    episode += batch;
    const bool crossed = episode / config.valid_every > before / config.valid_every;
    if (crossed || episode == budget) keep_going = validate(episode);
  }
  result.episodes = episode;
  if (best) model.params() = *best;
  return result;
}

}  // namespace gsnp

#include "redist/players/imitation.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace redist::players {

namespace {

void append_sequences(const EpisodeRecord& episode, std::vector<PlayerSequence>& out) {
  const PlayerVector& e = episode.profile.endowments();
  for (const BlockRecord& block : episode.blocks) {
    if (static_cast<int>(block.rounds.size()) != kBlockRounds) continue;
    for (int seat = 0; seat < kPlayers; ++seat) {
      PlayerSequence seq;
      seq.endowment = e[static_cast<std::size_t>(seat)];
      const RoundRecord* previous = nullptr;
      for (const RoundRecord& r : block.rounds) {
        seq.observations.push_back(build_player_observation(e, seat, previous));
        seq.targets.push_back(static_cast<int>(std::lround(r.contributions[static_cast<std::size_t>(seat)])));
        previous = &r;
      }
      out.push_back(std::move(seq));
    }
  }
}

struct StepBatch {
  std::vector<nn::Tensor> inputs;  // per step, B×16
  std::vector<std::vector<std::size_t>> targets;
  nn::Tensor mask;
};

StepBatch assemble(const std::vector<const PlayerSequence*>& batch) {
  if (batch.empty()) throw std::invalid_argument("imitation: empty minibatch");
  const std::size_t steps = batch.front()->observations.size();
  StepBatch out;
  std::vector<double> endowments;
  for (const auto* seq : batch) {
    if (seq->observations.size() != steps) throw std::invalid_argument("imitation: ragged sequences");
    endowments.push_back(seq->endowment);
  }
  out.mask = contribution_mask(endowments);
  for (std::size_t t = 0; t < steps; ++t) {
    nn::Tensor x(batch.size(), kObservationSize);
    std::vector<std::size_t> y(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& obs = batch[b]->observations[t];
      for (std::size_t f = 0; f < kObservationSize; ++f) x(b, f) = obs[f];
      const int target = batch[b]->targets[t];
      if (target < 0 || target > batch[b]->endowment) throw std::invalid_argument("imitation: target outside [0, e]");
      y[b] = static_cast<std::size_t>(target);
    }
    out.inputs.push_back(std::move(x));
    out.targets.push_back(std::move(y));
  }
  return out;
}

}  // namespace

std::vector<PlayerSequence> extract_sequences(const std::vector<EpisodeRecord>& corpus) {
  std::vector<PlayerSequence> out;
  for (const auto& ep : corpus) append_sequences(ep, out);
  if (out.empty()) throw std::invalid_argument("corpus holds no complete 10-round block");
  return out;
}

double uniform_cross_entropy(const std::vector<PlayerSequence>& data) {
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& seq : data) {
    total += std::log(seq.endowment + 1.0) * static_cast<double>(seq.targets.size());
    steps += seq.targets.size();
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

double sequence_cross_entropy(const VirtualPlayerModel& model, const std::vector<PlayerSequence>& data) {
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::vector<const PlayerSequence*> chunk;
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) chunk.push_back(&data[i]);
    const StepBatch sb = assemble(chunk);
    nn::Graph g;
    const nn::BoundParams bound = nn::bind_frozen(g, model.params());
    nn::LstmState state = model.initial_state(g, chunk.size());
    for (std::size_t t = 0; t < sb.inputs.size(); ++t) {
      nn::Var logp = nn::masked_log_softmax(model.step(bound, g.constant(sb.inputs[t]), state), sb.mask);
      for (std::size_t b = 0; b < chunk.size(); ++b) total -= logp.value()(b, sb.targets[t][b]);
      steps += chunk.size();
    }
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

nn::Var imitation_loss(nn::Graph& graph, const VirtualPlayerModel& model, const nn::BoundParams& bound,
                       const std::vector<const PlayerSequence*>& batch, const ImitationConfig& config) {
  using namespace nn;
  const StepBatch sb = assemble(batch);
  LstmState state = model.initial_state(graph, batch.size());
  Var ce;
  Var entropy;
  for (std::size_t t = 0; t < sb.inputs.size(); ++t) {
    Var logits = model.step(bound, graph.constant(sb.inputs[t]), state);
    Var logp = masked_log_softmax(logits, sb.mask);
    Var p = masked_softmax(logits, sb.mask);
    Var step_ce = -sum(pick(logp, sb.targets[t]));
    Var step_entropy = -sum(p * logp);
    ce = ce.valid() ? ce + step_ce : step_ce;
    entropy = entropy.valid() ? entropy + step_entropy : step_entropy;
  }
  const double n = static_cast<double>(batch.size() * sb.inputs.size());
  Var loss = ce * (1.0 / n) - entropy * (config.entropy_weight / n);
  if (config.l2_weight > 0) {
    for (const Var& v : bound.vars) loss = loss + sum(square(v)) * config.l2_weight;
  }
  return loss;
}

ImitationResult train_virtual_players(const std::vector<EpisodeRecord>& corpus, const ImitationConfig& config,
                                      std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("imitation: empty corpus");
  if (config.batch < 1 || config.updates < 0) throw std::invalid_argument("imitation: bad batch or update count");
  const Rng root(seed);

  std::vector<PlayerSequence> train;
  std::vector<PlayerSequence> validation;
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    Rng split = root.derive("split").derive(n);
    append_sequences(corpus[n], split.uniform() < config.validation_fraction ? validation : train);
  }
  if (train.empty()) throw std::invalid_argument("imitation: corpus holds no complete 10-round block");
  if (validation.empty()) validation = train;

  Rng init = root.derive("init");
  VirtualPlayerModel model = VirtualPlayerModel::create(init);
  nn::Adam adam(config.adam, model.params());
  Rng sampler = root.derive("minibatch");

  ImitationResult result{model, sequence_cross_entropy(model, validation), uniform_cross_entropy(validation), 0, {}};
  const int eval_every = std::max(1, config.eval_every);
  for (int u = 1; u <= config.updates; ++u) {
    std::vector<const PlayerSequence*> batch;
    batch.reserve(static_cast<std::size_t>(config.batch));
    for (int b = 0; b < config.batch; ++b)
      batch.push_back(&train[static_cast<std::size_t>(sampler.uniform_int(0, static_cast<int>(train.size()) - 1))]);

    nn::Graph g;
    const nn::BoundParams bound = nn::bind(g, model.params());
    nn::Var loss = imitation_loss(g, model, bound, batch, config);
    if (!std::isfinite(loss.value().item())) throw std::runtime_error("imitation: non-finite loss at update " + std::to_string(u));
    g.backward(loss);
    adam.step(model.params(), bound.grads());
    result.training_loss.push_back(loss.value().item());

    if (u % eval_every == 0 || u == config.updates) {
      const double ce = sequence_cross_entropy(model, validation);
      if (ce < result.validation_ce) {
        result.validation_ce = ce;
        result.model = model;
        result.best_update = u;
      }
    }
  }
  return result;
}

ImitationConfig ImitationConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys = {"updates",     "batch",      "entropy_weight", "l2_weight",
                                             "validation_fraction", "eval_every", "adam"};
  if (!j.is_object()) throw std::invalid_argument("imitation config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!keys.contains(key)) throw std::invalid_argument("unknown imitation config key '" + key + "'");
  ImitationConfig c;
  try {
    c.updates = j.value("updates", c.updates);
    c.batch = j.value("batch", c.batch);
    c.entropy_weight = j.value("entropy_weight", c.entropy_weight);
    c.l2_weight = j.value("l2_weight", c.l2_weight);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.eval_every = j.value("eval_every", c.eval_every);
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      c.adam.learning_rate = a.value("learning_rate", c.adam.learning_rate);
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("imitation config: ") + e.what());
  }
  if (c.updates < 0 || c.batch < 1 || c.eval_every < 1 || !(c.validation_fraction > 0 && c.validation_fraction < 1))
    throw std::invalid_argument("imitation config: need updates ≥ 0, batch ≥ 1, eval_every ≥ 1, 0 < validation_fraction < 1");
  return c;
}

nlohmann::json ImitationConfig::to_json() const {
  return {{"updates", updates},
          {"batch", batch},
          {"entropy_weight", entropy_weight},
          {"l2_weight", l2_weight},
          {"validation_fraction", validation_fraction},
          {"eval_every", eval_every},
          {"adam",
           {{"learning_rate", adam.learning_rate},
            {"beta1", adam.beta1},
            {"beta2", adam.beta2},
            {"epsilon", adam.epsilon}}}};
}

}  // namespace redist::players

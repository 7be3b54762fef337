#include "redist/players/virtual_player.hpp"

#include <cmath>

namespace redist::players {

namespace {

std::size_t rotated(int seat, std::size_t offset) {
  return (static_cast<std::size_t>(seat) + offset) % kPlayers;
}

}  // namespace

PlayerObservation build_player_observation(const PlayerVector& endowments, int seat, const RoundRecord* previous) {
  PlayerObservation obs{};
  for (std::size_t j = 0; j < kPlayers; ++j) {
    const std::size_t other = rotated(seat, j);
    const double e = endowments[other];
    if (e <= 0) throw DomainError("player observation: zero endowment in seat " + std::to_string(other));
    obs[j] = e / 10.0;
    if (previous != nullptr) {
      const double c = previous->contributions[other];
      obs[kPlayers + j] = c / 10.0;
      obs[2 * kPlayers + j] = c / e;
      obs[3 * kPlayers + j] = previous->payouts[other] / 10.0;
    }
  }
  return obs;
}

nn::Tensor contribution_mask(std::span<const double> endowments) {
  nn::Tensor mask(endowments.size(), kActions);
  for (std::size_t r = 0; r < endowments.size(); ++r) {
    const double e = endowments[r];
    if (!(e >= 0 && e <= kMaxEndowment)) throw DomainError("contribution mask: endowment out of range");
    for (std::size_t a = 0; a < kActions; ++a) mask(r, a) = static_cast<double>(a) <= e ? 1.0 : 0.0;
  }
  return mask;
}

VirtualPlayerModel::VirtualPlayerModel(nn::ParamSet params) : params_(std::move(params)) {
  input_ = nn::Linear::attach(params_, "input");
  lstm_ = nn::Lstm::attach(params_, "lstm");
  output_ = nn::Linear::attach(params_, "output");
  if (input_.in != kObservationSize || input_.out != kEmbedding || lstm_.in != kEmbedding ||
      lstm_.hidden != kHidden || output_.in != kHidden || output_.out != kActions) {
    throw nn::FormatError("player model: layer shapes do not match 16-64-16-11");
  }
}

VirtualPlayerModel VirtualPlayerModel::create(Rng& rng) {
  nn::ParamSet p;
  nn::Linear::create(p, "input", kObservationSize, kEmbedding, rng);
  nn::Lstm::create(p, "lstm", kEmbedding, kHidden, rng);
  nn::Linear::create(p, "output", kHidden, kActions, rng);
  return VirtualPlayerModel(std::move(p));
}

VirtualPlayerModel VirtualPlayerModel::from_params(nn::ParamSet params) {
  try {
    return VirtualPlayerModel(std::move(params));
  } catch (const nn::FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw nn::FormatError(std::string("player model: ") + e.what());
  }
}

VirtualPlayerModel VirtualPlayerModel::from_json(const nlohmann::json& doc) {
  return from_params(nn::weights_from_json(doc, kPlayerTypeTag));
}

nlohmann::json VirtualPlayerModel::to_json() const { return nn::weights_to_json(params_, kPlayerTypeTag); }

nn::Var VirtualPlayerModel::step(const nn::BoundParams& bound, nn::Var x, nn::LstmState& state) const {
  nn::Var embedded = nn::tanh(input_(bound, x));
  state = lstm_.step(bound, embedded, state);
  return output_(bound, state.h);
}

int sample_categorical(std::span<const double> probabilities, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last = 0;
  for (std::size_t a = 0; a < probabilities.size(); ++a) {
    if (probabilities[a] <= 0.0) continue;
    last = static_cast<int>(a);
    cumulative += probabilities[a];
    if (u < cumulative) return last;
  }
  return last;
}

PlayerAction virtual_player_act(const VirtualPlayerModel& model, const PlayerObservation& obs, double endowment,
                                const RecurrentState& state, Rng& rng) {
  nn::Graph g;
  const nn::BoundParams bound = nn::bind_frozen(g, model.params());
  nn::LstmState s{g.constant(state.h), g.constant(state.c)};
  nn::Var logits = model.step(bound, g.constant(nn::Tensor::row(obs)), s);
  const double e[] = {endowment};
  const nn::Tensor& logp = nn::masked_log_softmax(logits, contribution_mask(e)).value();

  PlayerAction out;
  for (std::size_t a = 0; a < kActions; ++a) out.probabilities[a] = static_cast<double>(a) <= endowment ? std::exp(logp[a]) : 0.0;
  out.contribution = sample_categorical(out.probabilities, rng);
  out.log_prob = logp[static_cast<std::size_t>(out.contribution)];
  out.state = {s.h.value(), s.c.value()};
  return out;
}

void VirtualPlayer::begin_block(const EndowmentProfile&, int) { state_ = RecurrentState{}; }

double VirtualPlayer::contribute(const RoundContext& ctx, Rng& rng) {
  const double e = (*ctx.profile)[ctx.seat];
  const PlayerObservation obs = build_player_observation(ctx.profile->endowments(), ctx.seat, ctx.previous);
  PlayerAction act = virtual_player_act(*model_, obs, e, state_, rng);
  state_ = std::move(act.state);
  return act.contribution;
}

BatchRollout rollout_batch(nn::Graph& graph, const VirtualPlayerModel& model, const nn::BoundParams& bound,
                           const nn::Tensor& endowments, const BatchPayoutFn& payout, int rounds,
                           std::span<Rng> rngs, int first_scored_round) {
  using namespace nn;
  const std::size_t batch = endowments.rows();
  if (endowments.cols() != kPlayers) throw ShapeError("rollout: endowments must be Bx4");
  if (rngs.size() != batch) throw std::invalid_argument("rollout: need one random stream per episode");
  const std::size_t n = batch * kPlayers;

  // Row k·B + b holds seat k of episode b; columns are rotated so the focal seat is first.
  std::array<std::vector<std::size_t>, kPlayers> rotation;
  for (std::size_t k = 0; k < kPlayers; ++k)
    for (std::size_t j = 0; j < kPlayers; ++j) rotation[k].push_back((k + j) % kPlayers);

  Tensor e_rows(n, kPlayers);
  std::vector<double> own_e(n);
  Tensor inv_e(batch, kPlayers);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < kPlayers; ++k) {
      inv_e(b, k) = 1.0 / endowments(b, k);
      own_e[k * batch + b] = endowments(b, k);
      for (std::size_t j = 0; j < kPlayers; ++j) e_rows(k * batch + b, j) = endowments(b, rotation[k][j]);
    }
  }
  const Tensor mask = contribution_mask(own_e);
  const Var inv_e_var = graph.constant(inv_e);

  BatchRollout out;
  LstmState state = model.initial_state(graph, n);
  Var previous_y;
  Tensor previous_c;
  for (int t = 1; t <= rounds; ++t) {
    Tensor fixed(n, 3 * kPlayers);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t k = r / batch;
      const std::size_t b = r % batch;
      for (std::size_t j = 0; j < kPlayers; ++j) {
        fixed(r, j) = e_rows(r, j) / 10.0;
        if (t > 1) {
          const double c = previous_c(b, rotation[k][j]);
          fixed(r, kPlayers + j) = c / 10.0;
          fixed(r, 2 * kPlayers + j) = c / endowments(b, rotation[k][j]);
        }
      }
    }
    Var y_part;
    if (t == 1) {
      y_part = graph.constant(Tensor(n, kPlayers));
    } else {
      std::vector<Var> seat_parts;
      for (std::size_t k = 0; k < kPlayers; ++k) seat_parts.push_back(gather_cols(previous_y, rotation[k]));
      y_part = concat_rows(seat_parts) * 0.1;
    }
    const Var x_parts[] = {graph.constant(std::move(fixed)), y_part};
    Var logits = model.step(bound, concat_cols(x_parts), state);
    Var logp = masked_log_softmax(logits, mask);

    Tensor c(batch, kPlayers);
    std::vector<std::size_t> actions(n);
    std::array<double, kActions> probs{};
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < kPlayers; ++k) {
        const std::size_t r = k * batch + b;
        for (std::size_t a = 0; a < kActions; ++a) probs[a] = mask(r, a) > 0 ? std::exp(logp.value()(r, a)) : 0.0;
        const int action = sample_categorical(probs, rngs[b]);
        actions[r] = static_cast<std::size_t>(action);
        c(b, k) = action;
      }
    }
    if (t >= first_scored_round) {
      Var per_episode = reshape(sum_rows(reshape(pick(logp, actions), kPlayers, batch)), batch, 1);
      out.score = out.score.valid() ? out.score + per_episode : per_episode;
    }

    Var y = payout(graph, endowments, c);
    Var rel = y * inv_e_var;
    out.relative_payouts = out.relative_payouts.valid() ? out.relative_payouts + rel : rel;
    out.contributions.push_back(c);
    out.payouts.push_back(y);
    previous_y = y;
    previous_c = std::move(c);
  }
  if (!out.score.valid()) out.score = graph.constant(Tensor(batch, 1));
  return out;
}

BatchPayoutFn mechanism_payout_fn(MechanismPtr mechanism) {
  return [mechanism](nn::Graph& graph, const nn::Tensor& e, const nn::Tensor& c) {
    return mechanism->payouts(graph, e, graph.constant(c));
  };
}

}  // namespace redist::players

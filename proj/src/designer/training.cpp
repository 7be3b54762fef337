#include "redist/designer/training.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace redist::designer {

nn::Var expected_votes(nn::Var rpay_first, nn::Var rpay_second, const VoteModel& model) {
  return nn::sum_cols(nn::sigmoid((rpay_first - rpay_second) * model.slope));
}

nn::Var scg_surrogate(nn::Var votes, nn::Var score, bool demean) {
  using namespace nn;
  if (votes.shape() != score.shape() || votes.cols() != 1) {
    throw std::invalid_argument("scg_surrogate: votes " + votes.shape().str() + " and score " + score.shape().str() +
                                " must be matching Nx1 columns");
  }
  const Tensor& j = votes.value();
  Tensor weight(j.rows(), 1);
  double baseline = 0.0;
  if (demean) {
    for (double v : j.data()) baseline += v;
    baseline /= static_cast<double>(j.rows());
  }
  for (std::size_t n = 0; n < j.rows(); ++n) weight[n] = j[n] - baseline;
  return mean(votes + votes.graph().constant(std::move(weight)) * score);
}

namespace {

const std::set<std::string> kConfigKeys = {"updates",  "episodes_per_profile", "tails",  "rounds",
                                           "rmsprop",  "alternative",          "paired_seeds", "demean",
                                           "vote_slope"};

}  // namespace

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kConfigKeys.contains(key)) throw std::invalid_argument("unknown training config key '" + key + "'");
  TrainingConfig c;
  c.updates = j.value("updates", c.updates);
  c.episodes_per_profile = j.value("episodes_per_profile", c.episodes_per_profile);
  c.tails = j.value("tails", c.tails);
  c.rounds = j.value("rounds", c.rounds);
  if (j.contains("rmsprop")) {
    const auto& r = j.at("rmsprop");
    c.rmsprop.learning_rate = r.value("learning_rate", c.rmsprop.learning_rate);
    c.rmsprop.decay = r.value("decay", c.rmsprop.decay);
    c.rmsprop.epsilon = r.value("epsilon", c.rmsprop.epsilon);
  }
  c.alternative = j.value("alternative", c.alternative);
  c.paired_seeds = j.value("paired_seeds", c.paired_seeds);
  c.demean = j.value("demean", c.demean);
  c.vote_slope = j.value("vote_slope", c.vote_slope);
  if (c.updates < 0 || c.episodes_per_profile < 1 || c.tails.empty() || c.rounds < 2) {
    throw std::invalid_argument("training config: need updates ≥ 0, episodes_per_profile ≥ 1, tails, rounds ≥ 2");
  }
  for (int t : c.tails) EndowmentProfile::head_tail(t);
  return c;
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"updates", updates},
          {"episodes_per_profile", episodes_per_profile},
          {"tails", tails},
          {"rounds", rounds},
          {"rmsprop",
           {{"learning_rate", rmsprop.learning_rate}, {"decay", rmsprop.decay}, {"epsilon", rmsprop.epsilon}}},
          {"alternative", alternative},
          {"paired_seeds", paired_seeds},
          {"demean", demean},
          {"vote_slope", vote_slope}};
}

nn::Tensor grouped_endowments(const std::vector<int>& tails, int per_profile) {
  nn::Tensor e(tails.size() * static_cast<std::size_t>(per_profile), kPlayers);
  std::size_t row = 0;
  for (int tail : tails) {
    const PlayerVector p = EndowmentProfile::head_tail(tail).endowments();
    for (int n = 0; n < per_profile; ++n, ++row)
      for (std::size_t k = 0; k < kPlayers; ++k) e(row, k) = p[k];
  }
  return e;
}

players::BatchPayoutFn designer_payout_fn(const GraphNet& net, const nn::BoundParams& bound) {
  return [&net, &bound](nn::Graph& g, const nn::Tensor& e, const nn::Tensor& c) {
    nn::Tensor pool(c.rows(), 1);
    for (std::size_t b = 0; b < c.rows(); ++b) {
      double total = 0.0;
      for (std::size_t k = 0; k < kPlayers; ++k) total += c(b, k);
      pool[b] = kGrowth * total;
    }
    nn::Var cv = g.constant(c);
    return net.forward(bound, build_observation(g, e, cv)) * g.constant(std::move(pool));
  };
}

players::BatchPayoutFn designer_payout_fn(std::shared_ptr<const GraphNet> net) {
  return [net](nn::Graph& g, const nn::Tensor& e, const nn::Tensor& c) {
    const nn::BoundParams bound = nn::bind_frozen(g, net->params());
    return designer_payout_fn(*net, bound)(g, e, c);
  };
}

namespace {

std::vector<Rng> episode_streams(const Rng& parent, std::size_t count) {
  std::vector<Rng> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) out.push_back(parent.derive(n));
  return out;
}

double finite_sum(const std::vector<nn::Tensor>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) s += v;
  return s;
}

}  // namespace

TrainingResult train_designer(const players::VirtualPlayerModel& players, const TrainingConfig& config,
                              std::uint64_t seed, const ProgressFn& progress) {
  Rng init = Rng(seed).derive("designer-init");
  return train_designer(players, config, seed, GraphNet::create(init), progress);
}

TrainingResult train_designer(const players::VirtualPlayerModel& players, const TrainingConfig& config,
                              std::uint64_t seed, GraphNet initial, const ProgressFn& progress) {
  const Rng root(seed);
  const MechanismPtr alternative = make_mechanism(config.alternative);
  const players::BatchPayoutFn alternative_fn = players::mechanism_payout_fn(alternative);
  const nn::Tensor endowments = grouped_endowments(config.tails, config.episodes_per_profile);
  const auto batch = static_cast<std::size_t>(config.batch());
  const VoteModel vote_model{config.vote_slope};

  TrainingResult result{std::move(initial), {}};
  nn::RmsProp optimizer(config.rmsprop, result.net.params());
  for (int u = 1; u <= config.updates; ++u) {
    const Rng update_rng = root.derive("update").derive(static_cast<std::uint64_t>(u));
    std::vector<Rng> streams_a = episode_streams(update_rng.derive("designer"), batch);
    std::vector<Rng> streams_b =
        config.paired_seeds ? streams_a : episode_streams(update_rng.derive("alternative"), batch);

    nn::Graph g;
    const nn::BoundParams frozen_players = nn::bind_frozen(g, players.params());
    const nn::BoundParams designer = nn::bind(g, result.net.params());
    const auto a = players::rollout_batch(g, players, frozen_players, endowments,
                                          designer_payout_fn(result.net, designer), config.rounds, streams_a);
    const auto b = players::rollout_batch(g, players, frozen_players, endowments, alternative_fn, config.rounds,
                                          streams_b);
    nn::Var votes = expected_votes(a.relative_payouts, nn::stop_gradient(b.relative_payouts), vote_model);
    nn::Var surrogate = scg_surrogate(votes, a.score, config.demean);
    const double s = surrogate.value().item();
    if (!std::isfinite(s)) throw std::runtime_error("designer training diverged: surrogate " + std::to_string(s) +
                                                    " at update " + std::to_string(u));
    nn::Var loss = -surrogate;
    g.backward(loss);
    std::vector<nn::Tensor> grads = designer.grads();
    if (!std::isfinite(finite_sum(grads))) {
      throw std::runtime_error("designer training diverged: non-finite gradient at update " + std::to_string(u));
    }
    optimizer.step(result.net.params(), grads);

    double share = 0.0;
    for (double v : votes.value().data()) share += v;
    UpdateStats stats{u, s, share / (static_cast<double>(batch) * kPlayers)};
    result.history.push_back(stats);
    if (progress) progress(stats);
  }
  return result;
}

ShareEstimate evaluate_vote_share(const players::BatchPayoutFn& first, const players::BatchPayoutFn& second,
                                  const players::VirtualPlayerModel& players, const EndowmentProfile& profile,
                                  int pairs, std::uint64_t seed, bool paired_seeds) {
  if (pairs < 1) throw std::invalid_argument("evaluate_vote_share: need at least one pair");
  constexpr int kChunk = 512;
  const Rng root(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int start = 0; start < pairs; start += kChunk) {
    const int n = std::min(kChunk, pairs - start);
    nn::Tensor e(static_cast<std::size_t>(n), kPlayers);
    for (int r = 0; r < n; ++r)
      for (std::size_t k = 0; k < kPlayers; ++k) e(static_cast<std::size_t>(r), k) = profile.endowments()[k];
    std::vector<Rng> sa;
    std::vector<Rng> sb;
    for (int r = 0; r < n; ++r) {
      const Rng pair = root.derive(static_cast<std::uint64_t>(start + r));
      sa.push_back(pair.derive("first"));
      sb.push_back(paired_seeds ? sa.back() : pair.derive("second"));
    }
    nn::Graph g;
    const nn::BoundParams frozen = nn::bind_frozen(g, players.params());
    const auto a = players::rollout_batch(g, players, frozen, e, first, kBlockRounds, sa);
    const auto b = players::rollout_batch(g, players, frozen, e, second, kBlockRounds, sb);
    const nn::Tensor& votes = expected_votes(a.relative_payouts, b.relative_payouts).value();
    for (double v : votes.data()) {
      const double s = v / kPlayers;
      sum += s;
      sum_sq += s * s;
    }
  }
  ShareEstimate est;
  est.pairs = pairs;
  est.share = sum / pairs;
  const double var = pairs > 1 ? std::max(0.0, (sum_sq - pairs * est.share * est.share) / (pairs - 1)) : 0.0;
  est.std_error = std::sqrt(var / pairs);
  return est;
}

}  // namespace redist::designer

#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "redist/game/engine.hpp"
#include "redist/nn/layers.hpp"

namespace redist::players {

inline constexpr std::size_t kObservationSize = 4 * kPlayers;
inline constexpr std::size_t kEmbedding = 64;
inline constexpr std::size_t kHidden = 16;
inline constexpr std::size_t kActions = kMaxEndowment + 1;
inline constexpr const char* kPlayerTypeTag = "player_model";

/// Inputs for one seat in one round, four groups of four:
/// e/10, previous c/10, previous c/e, previous y/10.
/// Within each group the focal seat comes first, then seats focal+1, +2, +3 (mod 4).
using PlayerObservation = std::array<double, kObservationSize>;

/// `previous` null means the first round of a block: the "previous" groups are zero.
PlayerObservation build_player_observation(const PlayerVector& endowments, int seat, const RoundRecord* previous);

/// Row mask over the 11 actions: 1 for c ≤ e.
nn::Tensor contribution_mask(std::span<const double> endowments);

/// Imitation-learned player: Linear(16→64)+tanh, LSTM(64→16), Linear(16→11).
/// One network simulates every seat.
class VirtualPlayerModel {
 public:
  static VirtualPlayerModel create(Rng& rng);
  /// Throws nn::FormatError on a malformed document.
  static VirtualPlayerModel from_json(const nlohmann::json& doc);
  static VirtualPlayerModel from_params(nn::ParamSet params);

  nlohmann::json to_json() const;
  const nn::ParamSet& params() const { return params_; }
  nn::ParamSet& params() { return params_; }

  /// One recurrent step for a batch: x is B×16. Returns B×11 logits.
  nn::Var step(const nn::BoundParams& bound, nn::Var x, nn::LstmState& state) const;
  nn::LstmState initial_state(nn::Graph& graph, std::size_t batch) const { return lstm_.initial_state(graph, batch); }

  bool operator==(const VirtualPlayerModel& other) const { return params_ == other.params_; }

 private:
  explicit VirtualPlayerModel(nn::ParamSet params);

  nn::ParamSet params_;
  nn::Linear input_;
  nn::Lstm lstm_;
  nn::Linear output_;
};

/// Recurrent memory between calls, stored outside any graph.
struct RecurrentState {
  nn::Tensor h{1, kHidden};
  nn::Tensor c{1, kHidden};
};

struct PlayerAction {
  int contribution = 0;
  RecurrentState state;
  double log_prob = 0.0;
  std::array<double, kActions> probabilities{};
};

/// Samples a contribution from the masked categorical. Deterministic given rng.
PlayerAction virtual_player_act(const VirtualPlayerModel& model, const PlayerObservation& obs, double endowment,
                                const RecurrentState& state, Rng& rng);

/// Inverse-CDF draw from a probability row.
int sample_categorical(std::span<const double> probabilities, Rng& rng);

/// PlayerPolicy adapter around a shared model; memory resets every block.
class VirtualPlayer final : public PlayerPolicy {
 public:
  explicit VirtualPlayer(std::shared_ptr<const VirtualPlayerModel> model) : model_(std::move(model)) {}

  void begin_block(const EndowmentProfile& profile, int seat) override;
  double contribute(const RoundContext& ctx, Rng& rng) override;

 private:
  std::shared_ptr<const VirtualPlayerModel> model_;
  RecurrentState state_;
};

/// Differentiable payouts for a batch round: e and c are B×4 constants.
using BatchPayoutFn = std::function<nn::Var(nn::Graph&, const nn::Tensor& endowments, const nn::Tensor& contributions)>;

struct BatchRollout {
  nn::Var relative_payouts;  // B×4, Σ_t y/e
  nn::Var score;             // B×1, Σ_seats Σ_{t ≥ first_scored_round} log p(c)
  std::vector<nn::Tensor> contributions;  // per round, B×4
  std::vector<nn::Var> payouts;           // per round, B×4
};

/// Plays `rounds` rounds for B groups at once with one model in every seat. The
/// model's weights enter `graph` as `bound` (usually frozen); payouts feed back
/// into the next round's observation, so gradients flow from the payout function
/// through the players' later log-probabilities. rngs[b] drives episode b.
BatchRollout rollout_batch(nn::Graph& graph, const VirtualPlayerModel& model, const nn::BoundParams& bound,
                           const nn::Tensor& endowments, const BatchPayoutFn& payout, int rounds,
                           std::span<Rng> rngs, int first_scored_round = 2);

/// Payout function of a fixed mechanism.
BatchPayoutFn mechanism_payout_fn(MechanismPtr mechanism);

}  // namespace redist::players

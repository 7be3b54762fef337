#pragma once

#include <cstdint>
#include <vector>

#include "redist/nn/optim.hpp"
#include "redist/players/virtual_player.hpp"

namespace redist::players {

/// One seat's 10-round trajectory through one block.
struct PlayerSequence {
  double endowment = 0.0;
  std::vector<PlayerObservation> observations;
  std::vector<int> targets;
};

/// Every complete 10-round block of every episode, one sequence per seat.
/// Throws std::invalid_argument if the corpus holds no complete block.
std::vector<PlayerSequence> extract_sequences(const std::vector<EpisodeRecord>& corpus);

struct ImitationConfig {
  int updates = 30000;
  int batch = 512;
  double entropy_weight = 0.1;  // subtracted: the loss rewards entropy
  double l2_weight = 1e-5;
  double validation_fraction = 0.1;
  int eval_every = 250;
  nn::AdamConfig adam;

  /// Keys mirror the fields; adam is {learning_rate, beta1, beta2, epsilon}.
  /// Throws std::invalid_argument on unknown keys or bad values.
  static ImitationConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ImitationResult {
  VirtualPlayerModel model;  // best by validation cross-entropy
  double validation_ce = 0.0;
  double uniform_ce = 0.0;  // uniform over legal actions on the validation split
  int best_update = 0;
  std::vector<double> training_loss;
};

/// Mean per-step cross-entropy of the model's predictions (teacher-forced observations).
double sequence_cross_entropy(const VirtualPlayerModel& model, const std::vector<PlayerSequence>& data);
/// Mean ln(e + 1): cross-entropy of the uniform distribution over legal actions.
double uniform_cross_entropy(const std::vector<PlayerSequence>& data);

/// Loss on one minibatch: cross-entropy − entropy_weight·entropy + l2_weight·‖θ‖²,
/// unrolled over the sequence for backpropagation through time.
nn::Var imitation_loss(nn::Graph& graph, const VirtualPlayerModel& model, const nn::BoundParams& bound,
                       const std::vector<const PlayerSequence*>& batch, const ImitationConfig& config);

/// Adam on minibatches sampled from a training split; episodes are split by index
/// so a session never straddles training and validation.
ImitationResult train_virtual_players(const std::vector<EpisodeRecord>& corpus, const ImitationConfig& config,
                                      std::uint64_t seed);

}  // namespace redist::players

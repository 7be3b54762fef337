#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "redist/designer/graph_net.hpp"
#include "redist/nn/optim.hpp"
#include "redist/players/virtual_player.hpp"

namespace redist::designer {

/// Expected votes per episode: Σ_i p(vote for the first mechanism), an N×1 column.
/// rpay_* are N×4 summed relative payouts.
nn::Var expected_votes(nn::Var rpay_first, nn::Var rpay_second, const VoteModel& model = {});

/// Stochastic-computation-graph surrogate
///   S = mean_n [ J_n + ⊥(J_n − mean J)·score_n ],
/// where score_n sums the log-probabilities of the sampled contributions that
/// depend on the parameters. Its gradient is the pathwise gradient of J plus the
/// score-function term. Without de-meaning the baseline is zero.
/// Throws std::invalid_argument if J and score have different lengths.
nn::Var scg_surrogate(nn::Var votes, nn::Var score, bool demean = true);

struct TrainingConfig {
  int updates = 10000;
  int episodes_per_profile = 64;
  std::vector<int> tails = {2, 3, 4, 5, 6, 7, 8, 10};  // head has 10 coins
  int rounds = kBlockRounds;
  nn::RmsPropConfig rmsprop;
  nlohmann::json alternative = {{"kind", "named"}, {"name", "liberal_egalitarian"}};
  bool paired_seeds = false;  // reuse the designer batch's player streams for the alternative batch
  bool demean = true;
  double vote_slope = 1.4;

  int batch() const { return episodes_per_profile * static_cast<int>(tails.size()); }

  /// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
  static TrainingConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Endowments for a batch: `per_profile` consecutive rows per tail value.
nn::Tensor grouped_endowments(const std::vector<int>& tails, int per_profile);

struct UpdateStats {
  int update = 0;
  double surrogate = 0.0;
  double vote_share = 0.0;  // mean expected votes / 4 on this batch
};

struct TrainingResult {
  GraphNet net;
  std::vector<UpdateStats> history;
};

using ProgressFn = std::function<void(const UpdateStats&)>;

/// Maximizes the designer's expected votes against the alternative mechanism with
/// the players' weights frozen. Player actions are always sampled from the model,
/// never forced. Throws std::runtime_error on a non-finite surrogate or gradient.
TrainingResult train_designer(const players::VirtualPlayerModel& players, const TrainingConfig& config,
                              std::uint64_t seed, const ProgressFn& progress = {});
TrainingResult train_designer(const players::VirtualPlayerModel& players, const TrainingConfig& config,
                              std::uint64_t seed, GraphNet initial, const ProgressFn& progress = {});

struct ShareEstimate {
  double share = 0.0;       // expected votes for the first mechanism / 4
  double std_error = 0.0;   // across episode pairs
  int pairs = 0;
};

/// Plays `pairs` paired blocks under each mechanism with virtual players and
/// returns the first mechanism's expected vote share.
ShareEstimate evaluate_vote_share(const players::BatchPayoutFn& first, const players::BatchPayoutFn& second,
                                  const players::VirtualPlayerModel& players, const EndowmentProfile& profile,
                                  int pairs, std::uint64_t seed, bool paired_seeds = false);

/// Batch payout function of a designer network with weights bound in `bound`.
players::BatchPayoutFn designer_payout_fn(const GraphNet& net, const nn::BoundParams& bound);
/// Batch payout function of a designer network with frozen weights.
players::BatchPayoutFn designer_payout_fn(std::shared_ptr<const GraphNet> net);

}  // namespace redist::designer

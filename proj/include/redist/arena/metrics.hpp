#pragma once

#include <span>

#include "redist/game/types.hpp"

namespace redist::arena {

/// Σ_i Σ_j |x_i − x_j| / (2 n² μ). Throws DomainError for an empty vector,
/// negative entries, or an all-zero vector.
double gini(std::span<const double> values);

/// Σ returns / Σ endowments over all players and rounds of the block.
double surplus(const BlockRecord& block);

struct GameMetrics {
  double gini = 0.0;  // over each player's summed returns
  double surplus = 0.0;
  PlayerVector relative_payouts{};
};

GameMetrics block_metrics(const BlockRecord& block);

}  // namespace redist::arena

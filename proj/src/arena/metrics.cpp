#include "redist/arena/metrics.hpp"

#include <cmath>

namespace redist::arena {

double gini(std::span<const double> values) {
  if (values.empty()) throw DomainError("gini of an empty vector");
  double total = 0.0;
  for (double x : values) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("gini needs finite non-negative values");
    total += x;
  }
  if (total <= 0.0) throw DomainError("gini is undefined for an all-zero vector");
  const auto n = static_cast<double>(values.size());
  double diff = 0.0;
  for (double a : values)
    for (double b : values) diff += std::abs(a - b);
  return diff / (2.0 * n * total);  // 2n²μ = 2n·Σx
}

double surplus(const BlockRecord& block) {
  const PlayerVector& e = block.profile.endowments();
  double returns = 0.0;
  double endowed = 0.0;
  for (const RoundRecord& r : block.rounds) {
    for (std::size_t i = 0; i < kPlayers; ++i) {
      returns += r.returns[i];
      endowed += e[i];
    }
  }
  if (endowed <= 0.0) throw DomainError("surplus of an empty block");
  return returns / endowed;
}

GameMetrics block_metrics(const BlockRecord& block) {
  GameMetrics m;
  PlayerVector totals{};
  for (const RoundRecord& r : block.rounds)
    for (std::size_t i = 0; i < kPlayers; ++i) totals[i] += r.returns[i];
  m.gini = gini(totals);
  m.surplus = surplus(block);
  m.relative_payouts = block.relative_payouts();
  return m;
}

}  // namespace redist::arena

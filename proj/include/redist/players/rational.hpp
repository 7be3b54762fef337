#pragma once

#include "redist/game/engine.hpp"

namespace redist::players {

/// Sampling distributions for a rational player's initial state.
struct RationalConfig {
  double rate_shape = 3.0;  // learning rate ~ Gamma(shape, scale)
  double rate_scale = 1.0;
  double generosity_mean = 0.0;  // generosity ~ Normal(mean, sigma)
  double generosity_sigma = 1.0;
};

/// Contributes e·σ(g) and climbs its own immediate return by gradient ascent on g.
struct RationalPlayerState {
  double learning_rate = 1.0;
  double generosity = 0.0;

  static RationalPlayerState sample(const RationalConfig& config, Rng& rng);
  double contribution(double endowment) const;
};

/// d(return_i)/dg = (∂y_i/∂c_i − 1)·e·σ(g)(1 − σ(g)), others' contributions held fixed.
double rational_gradient(const RationalPlayerState& state, double endowment, double own_payout_slope);

/// One ascent step g ← g + α·d(return)/dg using the mechanism's Jacobian at `contributions`.
/// Throws DomainError on a non-finite gradient.
RationalPlayerState rational_player_step(const RationalPlayerState& state, const PlayerVector& endowments, int seat,
                                         const PlayerVector& contributions, const Mechanism& mechanism);

/// Real-valued player; draws a fresh (α, g) from its seat stream at the start of every block.
class RationalPlayer final : public PlayerPolicy {
 public:
  explicit RationalPlayer(RationalConfig config = {}) : config_(config) {}

  void begin_block(const EndowmentProfile& profile, int seat) override;
  double contribute(const RoundContext& ctx, Rng& rng) override;
  void observe(const RoundRecord& record, const Mechanism& mechanism) override;
  bool discrete() const override { return false; }

  /// Uses this state for the coming block instead of sampling one.
  void preset(const RationalPlayerState& state) { preset_ = state; has_preset_ = true; }
  const RationalPlayerState& state() const { return state_; }

 private:
  RationalConfig config_;
  RationalPlayerState state_;
  RationalPlayerState preset_;
  bool has_preset_ = false;
  bool drawn_ = false;
  PlayerVector endowments_{};
  int seat_ = 0;
};

}  // namespace redist::players

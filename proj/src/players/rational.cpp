#include "redist/players/rational.hpp"

#include <cmath>

namespace redist::players {

namespace {

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double ex = std::exp(x);
  return ex / (1.0 + ex);
}

}  // namespace

RationalPlayerState RationalPlayerState::sample(const RationalConfig& config, Rng& rng) {
  RationalPlayerState s;
  s.learning_rate = rng.gamma(config.rate_shape, config.rate_scale);
  s.generosity = rng.normal(config.generosity_mean, config.generosity_sigma);
  return s;
}

double RationalPlayerState::contribution(double endowment) const { return endowment * logistic(generosity); }

double rational_gradient(const RationalPlayerState& state, double endowment, double own_payout_slope) {
  const double s = logistic(state.generosity);
  return (own_payout_slope - 1.0) * endowment * s * (1.0 - s);
}

RationalPlayerState rational_player_step(const RationalPlayerState& state, const PlayerVector& endowments, int seat,
                                         const PlayerVector& contributions, const Mechanism& mechanism) {
  const auto i = static_cast<std::size_t>(seat);
  const double slope = payout_jacobian(mechanism, endowments, contributions)[i][i];
  const double grad = rational_gradient(state, endowments[i], slope);
  if (!std::isfinite(grad)) throw DomainError("rational player: non-finite gradient in seat " + std::to_string(seat));
  RationalPlayerState next = state;
  next.generosity += state.learning_rate * grad;
  return next;
}

void RationalPlayer::begin_block(const EndowmentProfile& profile, int seat) {
  endowments_ = profile.endowments();
  seat_ = seat;
  drawn_ = false;
}

double RationalPlayer::contribute(const RoundContext& ctx, Rng& rng) {
  if (!drawn_) {
    state_ = has_preset_ ? preset_ : RationalPlayerState::sample(config_, rng);
    has_preset_ = false;
    drawn_ = true;
  }
  return state_.contribution((*ctx.profile)[ctx.seat]);
}

void RationalPlayer::observe(const RoundRecord& record, const Mechanism& mechanism) {
  state_ = rational_player_step(state_, endowments_, seat_, record.contributions, mechanism);
}

}  // namespace redist::players

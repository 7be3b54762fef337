#include "redist/game/engine.hpp"

#include <cmath>

namespace redist {

SeatStreams seat_streams(std::uint64_t seed) {
  const Rng root(seed);
  return {root.derive("seat0"), root.derive("seat1"), root.derive("seat2"), root.derive("seat3")};
}

RoundRecord play_round(const EndowmentProfile& profile, const PlayerVector& contributions, const Mechanism& mechanism) {
  const PlayerVector& e = profile.endowments();
  validate_round(e, contributions);
  RoundRecord r;
  r.contributions = contributions;
  r.payouts = mechanism.payouts(e, contributions);
  for (std::size_t i = 0; i < kPlayers; ++i) r.returns[i] = r.payouts[i] + e[i] - contributions[i];
  return r;
}

double checked_contribution(double contribution, double endowment, bool discrete, int seat) {
  const auto who = "seat " + std::to_string(seat);
  if (!std::isfinite(contribution) || contribution < 0) {
    throw ProtocolError(seat, who + " emitted an invalid contribution " + std::to_string(contribution));
  }
  if (contribution > endowment) {
    throw ProtocolError(seat, who + " contributed " + std::to_string(contribution) + " above its endowment " +
                                  std::to_string(endowment));
  }
  if (discrete && contribution != std::floor(contribution)) {
    throw ProtocolError(seat, who + " emitted a fractional coin count " + std::to_string(contribution));
  }
  return contribution;
}

namespace {

PlayerVector collect_contributions(const SeatPlayers& players, const EndowmentProfile& profile, int round,
                                   const RoundRecord* previous, SeatStreams& streams) {
  PlayerVector c{};
  for (int i = 0; i < kPlayers; ++i) {
    const auto s = static_cast<std::size_t>(i);
    RoundContext ctx{&profile, i, round, previous};
    c[s] = checked_contribution(players[s]->contribute(ctx, streams[s]), profile[i], players[s]->discrete(), i);
  }
  return c;
}

}  // namespace

BlockRecord run_block(const EndowmentProfile& profile, const SeatPlayers& players, const Mechanism& mechanism,
                      int rounds, SeatStreams& streams, std::string label) {
  BlockRecord block{label.empty() ? mechanism.name() : std::move(label), profile, {}};
  for (int i = 0; i < kPlayers; ++i) players[static_cast<std::size_t>(i)]->begin_block(profile, i);
  for (int t = 1; t <= rounds; ++t) {
    const RoundRecord* previous = block.rounds.empty() ? nullptr : &block.rounds.back();
    const PlayerVector c = collect_contributions(players, profile, t, previous, streams);
    RoundRecord r = play_round(profile, c, mechanism);
    r.t = t;
    block.rounds.push_back(r);
    for (auto* p : players) p->observe(block.rounds.back(), mechanism);
  }
  return block;
}

BlockRecord run_block(const EndowmentProfile& profile, const SeatPlayers& players, const Mechanism& mechanism,
                      int rounds, std::uint64_t seed, std::string label) {
  SeatStreams streams = seat_streams(seed);
  return run_block(profile, players, mechanism, rounds, streams, std::move(label));
}

char draw_bonus(double fraction_a, Rng& rng) { return rng.uniform() < fraction_a ? 'A' : 'B'; }

VoteOutcome conduct_vote(const BlockRecord& block_a, const BlockRecord& block_b, const VoteModel& model, Rng& rng) {
  if (!(block_a.profile == block_b.profile)) {
    throw DomainError("cannot vote between blocks played under different profiles");
  }
  const PlayerVector rpay_a = block_a.relative_payouts();
  const PlayerVector rpay_b = block_b.relative_payouts();
  VoteOutcome out;
  int count_a = 0;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    out.probabilities[i] = model.probability(rpay_a[i], rpay_b[i]);
    out.votes[i] = rng.uniform() < out.probabilities[i] ? 'A' : 'B';
    count_a += out.votes[i] == 'A';
  }
  out.fraction_a = count_a / static_cast<double>(kPlayers);
  out.bonus = draw_bonus(out.fraction_a, rng);
  return out;
}

SessionMachine::SessionMachine(SessionConfig config)
    : config_(std::move(config)),
      none_(no_referee()),
      streams_(seat_streams(config_.seed)),
      vote_stream_(Rng(config_.seed).derive("vote")),
      lottery_stream_(Rng(config_.seed).derive("lottery")) {
  if (!config_.mech_a || !config_.mech_b) throw std::invalid_argument("session needs two mechanisms");
  record_.seed = config_.seed;
  record_.profile = config_.profile;
  record_.order_flag = config_.order_flag;
  record_.mechanisms = {{"none", none_->to_json()}, {"A", config_.mech_a->to_json()}, {"B", config_.mech_b->to_json()}};
  record_.blocks.push_back({"none", config_.profile, {}});
}

void SessionMachine::set_external(char label, nlohmann::json spec) {
  if (label == 'A') {
    external_a_ = true;
  } else if (label == 'B') {
    external_b_ = true;
  } else {
    throw std::invalid_argument("external mechanism label must be A or B");
  }
  record_.mechanisms[std::string(1, label)] = std::move(spec);
}

const Mechanism* SessionMachine::mechanism_for(const std::string& label) const {
  if (label == "A") return external_a_ ? nullptr : config_.mech_a.get();
  if (label == "B") return external_b_ ? nullptr : config_.mech_b.get();
  return none_.get();
}

int SessionMachine::rounds_in_block() const { return block_ == 3 ? kBonusRounds : kBlockRounds; }

RoundContext SessionMachine::context(int seat) const {
  return {&config_.profile, seat, round(), previous_round()};
}

const RoundRecord* SessionMachine::previous_round() const {
  const auto& rounds = current_block().rounds;
  return rounds.empty() ? nullptr : &rounds.back();
}

const RoundRecord& SessionMachine::resolve_round(const PlayerVector& contributions) {
  if (phase_ != Phase::kRound) throw std::logic_error("session is not expecting contributions");
  const Mechanism* mech = block_mechanism();
  if (mech == nullptr) throw std::logic_error("block " + block_label() + " needs externally supplied payouts");
  RoundRecord r = play_round(config_.profile, contributions, *mech);
  r.t = round();
  record_.blocks.back().rounds.push_back(r);
  const RoundRecord& stored = record_.blocks.back().rounds.back();
  advance();
  return stored;
}

const RoundRecord& SessionMachine::resolve_round(const PlayerVector& contributions, const PlayerVector& payouts) {
  if (phase_ != Phase::kRound) throw std::logic_error("session is not expecting contributions");
  const PlayerVector& e = config_.profile.endowments();
  validate_round(e, contributions);
  double pool = 0.0;
  double paid = 0.0;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    pool += contributions[i];
    paid += payouts[i];
    if (!(payouts[i] >= 0.0)) throw DomainError("payouts must be non-negative");
  }
  if (std::abs(paid - kGrowth * pool) > 1e-9) throw DomainError("external payouts do not conserve the pool");
  RoundRecord r;
  r.t = round();
  r.contributions = contributions;
  r.payouts = payouts;
  for (std::size_t i = 0; i < kPlayers; ++i) r.returns[i] = payouts[i] + e[i] - contributions[i];
  record_.blocks.back().rounds.push_back(r);
  const RoundRecord& stored = record_.blocks.back().rounds.back();
  advance();
  return stored;
}

void SessionMachine::advance() {
  if (static_cast<int>(current_block().rounds.size()) < rounds_in_block()) return;
  if (block_ == 0 || block_ == 1) {
    ++block_;
    const char label = block_ == 1 ? first_label() : (first_label() == 'A' ? 'B' : 'A');
    record_.blocks.push_back({std::string(1, label), config_.profile, {}});
  } else if (block_ == 2) {
    phase_ = Phase::kVote;
  } else {
    phase_ = Phase::kDone;
  }
}

PlayerVector SessionMachine::first_mechanism_preference() const {
  if (record_.blocks.size() < 3) throw std::logic_error("vote requested before both rival blocks were played");
  const PlayerVector first = record_.blocks[1].relative_payouts();
  const PlayerVector second = record_.blocks[2].relative_payouts();
  PlayerVector p{};
  for (std::size_t i = 0; i < kPlayers; ++i) p[i] = config_.vote_model.probability(first[i], second[i]);
  return p;
}

std::array<char, kPlayers> SessionMachine::sample_votes() {
  const PlayerVector p = first_mechanism_preference();
  const char first = first_label();
  const char second = first == 'A' ? 'B' : 'A';
  std::array<char, kPlayers> votes{};
  for (std::size_t i = 0; i < kPlayers; ++i) votes[i] = vote_stream_.uniform() < p[i] ? first : second;
  return votes;
}

VoteOutcome SessionMachine::resolve_vote(const std::array<char, kPlayers>& votes) {
  if (phase_ != Phase::kVote) throw std::logic_error("session is not expecting votes");
  const char first = first_label();
  const char second = first == 'A' ? 'B' : 'A';
  const PlayerVector pref = first_mechanism_preference();
  VoteOutcome out;
  int count_first = 0;
  int count_a = 0;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    if (votes[i] != 'A' && votes[i] != 'B') throw DomainError("votes must be A or B");
    out.votes[i] = votes[i];
    out.probabilities[i] = first == 'A' ? pref[i] : 1.0 - pref[i];
    count_first += votes[i] == first;
    count_a += votes[i] == 'A';
  }
  out.fraction_a = count_a / static_cast<double>(kPlayers);
  out.bonus = lottery_stream_.uniform() < count_first / static_cast<double>(kPlayers) ? first : second;
  record_.votes = out.votes;
  record_.bonus_mech = out.bonus;
  block_ = 3;
  phase_ = Phase::kRound;
  record_.blocks.push_back({std::string(1, out.bonus), config_.profile, {}});
  return out;
}

EpisodeRecord run_session(const EndowmentProfile& profile, const SeatPlayers& players, MechanismPtr mech_a,
                          MechanismPtr mech_b, bool order_flag, const VoteModel& vote_model, std::uint64_t seed) {
  SessionMachine machine({profile, std::move(mech_a), std::move(mech_b), order_flag, vote_model, seed});
  while (machine.phase() != SessionMachine::Phase::kDone) {
    if (machine.phase() == SessionMachine::Phase::kVote) {
      machine.resolve_vote(machine.sample_votes());
      continue;
    }
    if (machine.block_starting()) {
      for (int i = 0; i < kPlayers; ++i) players[static_cast<std::size_t>(i)]->begin_block(profile, i);
    }
    PlayerVector c{};
    for (int i = 0; i < kPlayers; ++i) {
      const auto s = static_cast<std::size_t>(i);
      c[s] = checked_contribution(players[s]->contribute(machine.context(i), machine.seat_stream(i)), profile[i],
                                  players[s]->discrete(), i);
    }
    const Mechanism& mech = *machine.block_mechanism();
    const RoundRecord& r = machine.resolve_round(c);
    for (auto* p : players) p->observe(r, mech);
  }
  return machine.record();
}

}  // namespace redist

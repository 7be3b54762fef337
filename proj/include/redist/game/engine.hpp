#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "redist/game/types.hpp"
#include "redist/mechanisms/mechanism.hpp"
#include "redist/players/vote_model.hpp"
#include "redist/rng.hpp"

namespace redist {

/// What a seat sees when choosing its contribution.
struct RoundContext {
  const EndowmentProfile* profile = nullptr;
  int seat = 0;
  int round = 1;                          // 1-based within the block
  const RoundRecord* previous = nullptr;  // null on the first round of a block
};

/// A participant. Called by one simulation thread at a time.
class PlayerPolicy {
 public:
  virtual ~PlayerPolicy() = default;

  /// Resets per-block state (recurrent memory, learned generosity).
  virtual void begin_block(const EndowmentProfile& profile, int seat) = 0;
  virtual double contribute(const RoundContext& ctx, Rng& rng) = 0;
  /// Sees the resolved round and the mechanism that produced it.
  virtual void observe(const RoundRecord& /*record*/, const Mechanism& /*mechanism*/) {}
  /// Discrete players must emit integer coin counts.
  virtual bool discrete() const { return true; }
};

using SeatPlayers = std::array<PlayerPolicy*, kPlayers>;
using SeatStreams = std::array<Rng, kPlayers>;

/// Per-seat random streams derived from a root seed.
SeatStreams seat_streams(std::uint64_t seed);

/// Resolves one round. Throws DomainError for a contribution outside [0, e].
RoundRecord play_round(const EndowmentProfile& profile, const PlayerVector& contributions, const Mechanism& mechanism);

/// Checks a player's contribution; throws ProtocolError naming the seat.
double checked_contribution(double contribution, double endowment, bool discrete, int seat);

BlockRecord run_block(const EndowmentProfile& profile, const SeatPlayers& players, const Mechanism& mechanism,
                      int rounds, SeatStreams& streams, std::string label = {});
BlockRecord run_block(const EndowmentProfile& profile, const SeatPlayers& players, const Mechanism& mechanism,
                      int rounds, std::uint64_t seed, std::string label = {});

struct VoteOutcome {
  PlayerVector probabilities{};  // probability of voting for A
  std::array<char, kPlayers> votes{};
  double fraction_a = 0.0;
  char bonus = 'A';
};

/// Samples each seat's vote from the vote model, then the bonus mechanism with
/// probability equal to the fraction of votes for A.
/// Throws DomainError if the blocks were played under different profiles.
VoteOutcome conduct_vote(const BlockRecord& block_a, const BlockRecord& block_b, const VoteModel& model, Rng& rng);

/// Lottery: A with probability `fraction_a`.
char draw_bonus(double fraction_a, Rng& rng);

struct SessionConfig {
  EndowmentProfile profile;
  MechanismPtr mech_a;
  MechanismPtr mech_b;
  bool order_flag = false;  // false: A in block 2 and B in block 3; true: the reverse
  VoteModel vote_model;
  std::uint64_t seed = 0;
};

/// The 34-round protocol as a state machine: block 1 with no referee, blocks 2
/// and 3 with the rival mechanisms, a vote, then a 4-round bonus block under the
/// lottery winner. Drives both run_session and the live session service.
class SessionMachine {
 public:
  enum class Phase { kRound, kVote, kDone };

  explicit SessionMachine(SessionConfig config);

  Phase phase() const { return phase_; }
  int block_index() const { return block_; }
  int round() const { return static_cast<int>(current_block().rounds.size()) + 1; }
  int rounds_in_block() const;
  bool block_starting() const { return phase_ == Phase::kRound && current_block().rounds.empty(); }
  const std::string& block_label() const { return current_block().mech; }
  /// Mechanism of the current block; null when the block's payouts are supplied externally.
  const Mechanism* block_mechanism() const { return mechanism_for(block_label()); }
  const SessionConfig& config() const { return config_; }

  RoundContext context(int seat) const;
  const RoundRecord* previous_round() const;

  /// Resolves the current round under the block's mechanism.
  const RoundRecord& resolve_round(const PlayerVector& contributions);
  /// Resolves the current round with payouts supplied from outside (a human
  /// referee). Throws DomainError unless Σy = r·ΣC within 1e-9.
  const RoundRecord& resolve_round(const PlayerVector& contributions, const PlayerVector& payouts);

  /// Marks label "A" or "B" as externally refereed; its block then needs explicit payouts.
  void set_external(char label, nlohmann::json spec);
  bool external_block() const { return block_mechanism() == nullptr; }

  /// Probability each seat votes for the mechanism it met in block 2.
  PlayerVector first_mechanism_preference() const;
  /// One draw per seat from the vote stream.
  std::array<char, kPlayers> sample_votes();
  VoteOutcome resolve_vote(const std::array<char, kPlayers>& votes);

  const EpisodeRecord& record() const { return record_; }
  Rng& seat_stream(int seat) { return streams_[static_cast<std::size_t>(seat)]; }

 private:
  const BlockRecord& current_block() const { return record_.blocks.back(); }
  const Mechanism* mechanism_for(const std::string& label) const;
  char first_label() const { return config_.order_flag ? 'B' : 'A'; }
  void advance();

  SessionConfig config_;
  MechanismPtr none_;
  bool external_a_ = false;
  bool external_b_ = false;
  Phase phase_ = Phase::kRound;
  int block_ = 0;
  SeatStreams streams_;
  Rng vote_stream_;
  Rng lottery_stream_;
  EpisodeRecord record_;
};

/// Plays a full session with simulated players.
EpisodeRecord run_session(const EndowmentProfile& profile, const SeatPlayers& players, MechanismPtr mech_a,
                          MechanismPtr mech_b, bool order_flag, const VoteModel& vote_model, std::uint64_t seed);

}  // namespace redist

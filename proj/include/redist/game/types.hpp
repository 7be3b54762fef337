#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace redist {

inline constexpr int kPlayers = 4;
inline constexpr double kGrowth = 1.6;
inline constexpr int kHeadEndowment = 10;
inline constexpr int kMaxEndowment = 10;
inline constexpr int kBlockRounds = 10;
inline constexpr int kBonusRounds = 4;
inline constexpr int kSessionRounds = 3 * kBlockRounds + kBonusRounds;

/// One value per seat.
using PlayerVector = std::array<double, kPlayers>;
/// jacobian[i][j] = ∂y_i/∂c_j
using Jacobian = std::array<PlayerVector, kPlayers>;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A player emitted an action the protocol does not allow.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(int seat, const std::string& what) : std::runtime_error(what), seat_(seat) {}
  int seat() const { return seat_; }

 private:
  int seat_;
};

/// Integer coin endowments; one head seat holds 10 coins. Constant for a session.
class EndowmentProfile {
 public:
  EndowmentProfile() : EndowmentProfile(PlayerVector{10, 10, 10, 10}) {}
  /// Throws DomainError unless every entry is an integer in [1, 10] and one equals 10.
  explicit EndowmentProfile(const PlayerVector& endowments);

  /// Head in seat 0 with 10 coins, three tails with `tail` coins each.
  static EndowmentProfile head_tail(int tail);

  const PlayerVector& endowments() const { return endowments_; }
  double operator[](int seat) const { return endowments_[static_cast<std::size_t>(seat)]; }
  int head() const { return head_; }
  std::string str() const;

  bool operator==(const EndowmentProfile& other) const { return endowments_ == other.endowments_; }

 private:
  PlayerVector endowments_{};
  int head_ = 0;
};

struct RoundRecord {
  int t = 0;  // 1-based within the block
  PlayerVector contributions{};
  PlayerVector payouts{};
  PlayerVector returns{};
};

struct BlockRecord {
  std::string mech;  // "none", "A", "B" or a mechanism name outside sessions
  EndowmentProfile profile;
  std::vector<RoundRecord> rounds;

  /// Σ_t y_i / e_i for each seat.
  PlayerVector relative_payouts() const;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  EndowmentProfile profile;
  nlohmann::json mechanisms = nlohmann::json::object();  // label -> mechanism spec
  bool order_flag = false;
  std::vector<BlockRecord> blocks;
  std::array<char, kPlayers> votes{'?', '?', '?', '?'};
  char bonus_mech = '?';

  std::size_t round_count() const;
  /// Block played under label "A"/"B"; throws if absent.
  const BlockRecord& block_for(char label) const;
};

nlohmann::json to_json(const EndowmentProfile& profile);
EndowmentProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RoundRecord& round);
nlohmann::json to_json(const EpisodeRecord& episode);
/// Throws std::invalid_argument on schema violations.
EpisodeRecord episode_from_json(const nlohmann::json& j);

/// One JSON document per line, no trailing whitespace beyond '\n'.
std::string to_jsonl_line(const EpisodeRecord& episode);

}  // namespace redist

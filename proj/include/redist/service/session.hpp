#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "redist/game/engine.hpp"
#include "redist/players/rational.hpp"
#include "redist/players/virtual_player.hpp"

namespace redist::service {

/// Seconds on an arbitrary monotonic origin.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  double now() const override;
};

/// Test clock that only moves when told to.
class ManualClock final : public Clock {
 public:
  double now() const override;
  void set(double t);
  void advance(double dt);

 private:
  mutable std::mutex mutex_;
  double now_ = 0.0;
};

inline constexpr double kActionSeconds = 120.0;
inline constexpr double kVoteSeconds = 240.0;
inline constexpr int kRefereeSeat = kPlayers;  // the optional fifth seat
inline constexpr int kMaxStrikes = 2;

enum class SeatKind { kHuman, kVirtual, kRandomBot };
std::string_view seat_kind_name(SeatKind kind);

/// What happens to human seats nobody has joined.
enum class LobbyPolicy {
  kWait,          // hold the session until every human seat has joined
  kFillWithBots,  // after lobby_seconds, empty seats get simulated players
};

struct SessionOptions {
  EndowmentProfile profile;
  nlohmann::json mech_a = {{"kind", "named"}, {"name", "liberal_egalitarian"}};
  nlohmann::json mech_b = {{"kind", "named"}, {"name", "libertarian"}};
  bool order_flag = false;
  std::uint64_t seed = 0;
  std::vector<int> human_seats;
  std::optional<char> referee_block;  // 'A' or 'B' is refereed by a live human
  LobbyPolicy lobby = LobbyPolicy::kFillWithBots;
  double lobby_seconds = 120.0;
  /// Simulated seats: imitation-learned players when set, rational players otherwise.
  std::shared_ptr<const players::VirtualPlayerModel> model;
  players::RationalConfig rational;
  VoteModel vote_model;
  std::filesystem::path base_dir;  // resolves designer weight paths in mechanism specs

  /// Keys: profile, mech_a, mech_b, order_flag, seed, human_seats, referee_block,
  /// lobby ("wait" | "fill"), lobby_seconds. Throws std::invalid_argument.
  static SessionOptions from_json(const nlohmann::json& doc);
};

struct Event {
  std::uint64_t id = 0;  // 1-based, dense per session
  std::string type;
  nlohmann::json data;

  nlohmann::json to_json() const;
};

/// Earnings shown to participants carry one decimal.
double display_amount(double value);

struct ActionResult {
  bool accepted = false;
  std::string reason;
  nlohmann::json state;
};

/// One live game. Every public member locks the session; deadlines are checked
/// against the injected clock on each call and by tick().
class Session {
 public:
  Session(std::string id, SessionOptions options, std::shared_ptr<const Clock> clock);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  ActionResult join(int seat);
  ActionResult contribute(int seat, int coins);
  /// Referee slider weights: accepted when non-negative with |Σ − 1| ≤ 0.001, then normalized.
  ActionResult allocate(const PlayerVector& weights);
  ActionResult vote(int seat, char choice);
  /// Dispatches {"type": "join"|"contribute"|"allocate"|"vote", ...}.
  ActionResult act(const nlohmann::json& action);

  void tick();
  bool done() const;

  /// State visible to `seat` (or a spectator when empty). Never shows another
  /// seat's pending contribution or vote.
  nlohmann::json state(std::optional<int> seat = std::nullopt) const;
  std::vector<Event> events_since(std::uint64_t since) const;
  /// Blocks until an event newer than `since` exists or `timeout_seconds` elapse in real time.
  std::vector<Event> wait_events(std::uint64_t since, double timeout_seconds) const;

  EpisodeRecord record() const;
  std::array<int, kPlayers + 1> strikes() const;
  std::array<SeatKind, kPlayers + 1> seats() const;

 private:
  enum class Screen { kLobby, kContribute, kReferee, kVote, kDone };

  ActionResult reject(std::string reason) const;
  ActionResult accept() const;
  nlohmann::json state_locked(std::optional<int> seat) const;
  void emit(std::string type, nlohmann::json data);
  void process_deadlines();
  void pump();
  void start();
  void open_round();
  void open_vote();
  void advance();
  void finish_round(const PlayerVector& payouts, const Mechanism& mechanism, std::optional<PlayerVector> weights);
  void strike(int seat);
  void make_bot(int seat);
  bool simulated(int seat) const { return seats_[static_cast<std::size_t>(seat)] != SeatKind::kHuman; }
  PlayerVector random_split();
  std::string screen_name() const;

  const std::string id_;
  SessionOptions options_;
  std::shared_ptr<const Clock> clock_;
  SessionMachine machine_;
  Rng referee_stream_;

  std::array<SeatKind, kPlayers + 1> seats_{};
  std::array<bool, kPlayers + 1> joined_{};
  std::array<int, kPlayers + 1> strikes_{};
  std::array<std::unique_ptr<PlayerPolicy>, kPlayers> policies_;

  Screen screen_ = Screen::kLobby;
  double deadline_ = 0.0;
  std::uint64_t expirations_ = 0;  // deadlines that have fired
  std::array<std::optional<double>, kPlayers> pending_contribution_;
  std::array<std::optional<char>, kPlayers> pending_vote_;
  std::array<char, kPlayers> simulated_votes_{};
  PlayerVector resolved_contribution_{};

  mutable std::mutex mutex_;
  mutable std::condition_variable events_changed_;
  std::vector<Event> events_;
};

/// Rebuilds an episode from a session's event stream and its creation options.
EpisodeRecord replay_events(const SessionOptions& options, const std::vector<Event>& events);

/// Owns concurrent sessions.
class SessionManager {
 public:
  explicit SessionManager(std::shared_ptr<const Clock> clock = std::make_shared<SteadyClock>());

  std::string create(SessionOptions options);
  /// Null when the id is unknown.
  std::shared_ptr<Session> find(const std::string& id) const;
  void tick_all();
  std::vector<std::string> ids() const;

 private:
  std::shared_ptr<const Clock> clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_ = 1;
};

}  // namespace redist::service

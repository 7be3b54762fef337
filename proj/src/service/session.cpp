#include "redist/service/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace redist::service {

double SteadyClock::now() const {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

double ManualClock::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

void ManualClock::set(double t) {
  std::lock_guard lock(mutex_);
  now_ = t;
}

void ManualClock::advance(double dt) {
  std::lock_guard lock(mutex_);
  now_ += dt;
}

std::string_view seat_kind_name(SeatKind kind) {
  switch (kind) {
    case SeatKind::kHuman: return "human";
    case SeatKind::kVirtual: return "virtual";
    case SeatKind::kRandomBot: return "random_bot";
  }
  return "?";
}

double display_amount(double value) { return std::round(value * 10.0) / 10.0; }

nlohmann::json Event::to_json() const { return {{"id", id}, {"type", type}, {"data", data}}; }

SessionOptions SessionOptions::from_json(const nlohmann::json& doc) {
  static const std::vector<std::string> known = {"profile",     "mech_a",       "mech_b", "order_flag",
                                                 "seed",        "human_seats",  "referee_block",
                                                 "lobby",       "lobby_seconds"};
  if (!doc.is_object()) throw std::invalid_argument("session options must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown session option: " + key);
  }
  SessionOptions o;
  try {
    if (doc.contains("profile")) o.profile = profile_from_json(doc["profile"]);
    if (doc.contains("mech_a")) o.mech_a = doc["mech_a"];
    if (doc.contains("mech_b")) o.mech_b = doc["mech_b"];
    o.order_flag = doc.value("order_flag", false);
    o.seed = doc.value("seed", std::uint64_t{0});
    o.human_seats = doc.value("human_seats", std::vector<int>{});
    if (doc.contains("referee_block") && !doc["referee_block"].is_null()) {
      const auto label = doc["referee_block"].get<std::string>();
      if (label != "A" && label != "B") throw std::invalid_argument("referee_block must be \"A\" or \"B\"");
      o.referee_block = label[0];
    }
    const std::string lobby = doc.value("lobby", std::string("fill"));
    if (lobby == "wait") {
      o.lobby = LobbyPolicy::kWait;
    } else if (lobby == "fill") {
      o.lobby = LobbyPolicy::kFillWithBots;
    } else {
      throw std::invalid_argument("lobby must be \"wait\" or \"fill\"");
    }
    o.lobby_seconds = doc.value("lobby_seconds", o.lobby_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad session options: ") + e.what());
  }
  return o;
}

namespace {

/// Uniform over legal contributions; stands in for seats that timed out twice.
class RandomBot final : public PlayerPolicy {
 public:
  void begin_block(const EndowmentProfile&, int) override {}
  double contribute(const RoundContext& ctx, Rng& rng) override {
    return rng.uniform_int(0, static_cast<int>((*ctx.profile)[ctx.seat]));
  }
};

SessionConfig machine_config(const SessionOptions& o) {
  return {o.profile, make_mechanism(o.mech_a, o.base_dir), make_mechanism(o.mech_b, o.base_dir), o.order_flag,
          o.vote_model, o.seed};
}

const nlohmann::json kHumanReferee = {{"kind", "human_referee"}};

}  // namespace

Session::Session(std::string id, SessionOptions options, std::shared_ptr<const Clock> clock)
    : id_(std::move(id)),
      options_(std::move(options)),
      clock_(std::move(clock)),
      machine_(machine_config(options_)),
      referee_stream_(Rng(options_.seed).derive("referee")) {
  seats_.fill(SeatKind::kVirtual);
  for (int s : options_.human_seats) {
    if (s < 0 || s >= kPlayers) throw std::invalid_argument("human seat out of range: " + std::to_string(s));
    if (seats_[static_cast<std::size_t>(s)] == SeatKind::kHuman) throw std::invalid_argument("duplicate human seat");
    seats_[static_cast<std::size_t>(s)] = SeatKind::kHuman;
  }
  if (options_.referee_block) {
    machine_.set_external(*options_.referee_block, kHumanReferee);
    seats_[kRefereeSeat] = SeatKind::kHuman;
  }
  for (int i = 0; i < kPlayers; ++i) {
    auto& p = policies_[static_cast<std::size_t>(i)];
    if (options_.model) {
      p = std::make_unique<players::VirtualPlayer>(options_.model);
    } else {
      p = std::make_unique<players::RationalPlayer>(options_.rational);
    }
  }
  deadline_ = clock_->now() + options_.lobby_seconds;
  emit("lobby_open", {{"profile", to_json(options_.profile)},
                      {"seats", [&] {
                         nlohmann::json s = nlohmann::json::array();
                         for (auto k : seats_) s.push_back(seat_kind_name(k));
                         return s;
                       }()}});
  pump();
}

Session::~Session() = default;

void Session::emit(std::string type, nlohmann::json data) {
  events_.push_back({events_.size() + 1, std::move(type), std::move(data)});
  events_changed_.notify_all();
}

std::string Session::screen_name() const {
  switch (screen_) {
    case Screen::kLobby: return "lobby";
    case Screen::kContribute: return "contribute";
    case Screen::kReferee: return "referee_allocate";
    case Screen::kVote: return "vote";
    case Screen::kDone: return "end";
  }
  return "?";
}

void Session::make_bot(int seat) {
  seats_[static_cast<std::size_t>(seat)] = SeatKind::kRandomBot;
  if (seat < kPlayers) policies_[static_cast<std::size_t>(seat)] = std::make_unique<RandomBot>();
}

void Session::strike(int seat) {
  const int n = ++strikes_[static_cast<std::size_t>(seat)];
  emit("timeout", {{"seat", seat}, {"strikes", n}});
  if (n >= kMaxStrikes) {
    make_bot(seat);
    emit("seat_replaced", {{"seat", seat}, {"kind", seat_kind_name(SeatKind::kRandomBot)}});
  }
}

PlayerVector Session::random_split() {
  PlayerVector w{};
  double total = 0.0;
  for (auto& x : w) total += (x = referee_stream_.gamma(1.0, 1.0));
  for (auto& x : w) x /= total;
  return w;
}

void Session::start() {
  for (int i = 0; i <= kPlayers; ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (seats_[s] == SeatKind::kHuman && !joined_[s]) {
      // Only reachable under kFillWithBots once the lobby deadline passes.
      seats_[s] = i == kRefereeSeat ? SeatKind::kRandomBot : SeatKind::kVirtual;
    }
  }
  open_round();
}

void Session::open_round() {
  const EndowmentProfile& profile = options_.profile;
  if (machine_.block_starting()) {
    for (int i = 0; i < kPlayers; ++i) policies_[static_cast<std::size_t>(i)]->begin_block(profile, i);
  }
  screen_ = Screen::kContribute;
  deadline_ = clock_->now() + kActionSeconds;
  for (int i = 0; i < kPlayers; ++i) {
    const auto s = static_cast<std::size_t>(i);
    pending_contribution_[s].reset();
    if (simulated(i)) {
      pending_contribution_[s] = checked_contribution(
          policies_[s]->contribute(machine_.context(i), machine_.seat_stream(i)), profile[i], policies_[s]->discrete(), i);
    }
  }
  emit("round_open", {{"block", machine_.block_index() + 1},
                      {"block_label", machine_.block_label()},
                      {"round", machine_.round()},
                      {"rounds_in_block", machine_.rounds_in_block()},
                      {"endowments", profile.endowments()},
                      {"human_referee", machine_.external_block()},
                      {"seconds", kActionSeconds}});
}

void Session::open_vote() {
  screen_ = Screen::kVote;
  deadline_ = clock_->now() + kVoteSeconds;
  simulated_votes_ = machine_.sample_votes();
  for (int i = 0; i < kPlayers; ++i) {
    const auto s = static_cast<std::size_t>(i);
    pending_vote_[s].reset();
    if (seats_[s] == SeatKind::kVirtual) pending_vote_[s] = simulated_votes_[s];
    if (seats_[s] == SeatKind::kRandomBot) pending_vote_[s] = machine_.seat_stream(i).bernoulli(0.5) ? 'A' : 'B';
  }
  emit("vote_open", {{"options", {"A", "B"}}, {"seconds", kVoteSeconds}});
}

void Session::finish_round(const PlayerVector& payouts, const Mechanism& mechanism,
                           std::optional<PlayerVector> weights) {
  const PlayerVector c = resolved_contribution_;
  const RoundRecord& r = weights ? machine_.resolve_round(c, payouts) : machine_.resolve_round(c);
  for (auto& p : policies_) p->observe(r, mechanism);

  double total = 0.0;
  for (double x : c) total += x;
  nlohmann::json original = nlohmann::json::array();
  nlohmann::json earnings = nlohmann::json::array();
  nlohmann::json totals = nlohmann::json::array();
  for (std::size_t i = 0; i < kPlayers; ++i) {
    original.push_back(display_amount(kGrowth * total / kPlayers));
    earnings.push_back(display_amount(r.payouts[i]));
    totals.push_back(display_amount(r.returns[i]));
  }
  nlohmann::json data = {{"block", static_cast<int>(machine_.record().blocks.size())},
                         {"round", r.t},
                         {"contributions", c},
                         {"original_earnings", original},
                         {"earnings", earnings},
                         {"totals", totals}};
  if (weights) data["referee_weights"] = *weights;
  emit("round_result", std::move(data));
  advance();
}

void Session::advance() {
  switch (machine_.phase()) {
    case SessionMachine::Phase::kRound: open_round(); break;
    case SessionMachine::Phase::kVote: open_vote(); break;
    case SessionMachine::Phase::kDone: {
      screen_ = Screen::kDone;
      PlayerVector earnings{};
      for (const auto& b : machine_.record().blocks)
        for (const auto& r : b.rounds)
          for (std::size_t i = 0; i < kPlayers; ++i) earnings[i] += r.returns[i];
      nlohmann::json shown = nlohmann::json::array();
      for (double x : earnings) shown.push_back(display_amount(x));
      emit("session_end", {{"earnings", shown}, {"rounds", machine_.record().round_count()}});
      break;
    }
  }
}

void Session::process_deadlines() {
  const double now = clock_->now();
  if (now < deadline_ || screen_ == Screen::kDone) return;
  if (screen_ == Screen::kLobby && options_.lobby == LobbyPolicy::kWait) return;
  ++expirations_;
  switch (screen_) {
    case Screen::kLobby:
      start();
      break;
    case Screen::kContribute:
      for (int i = 0; i < kPlayers; ++i) {
        const auto s = static_cast<std::size_t>(i);
        if (pending_contribution_[s]) continue;
        strike(i);
        // A missed screen is answered like the random bot would.
        pending_contribution_[s] = machine_.seat_stream(i).uniform_int(0, static_cast<int>(options_.profile[i]));
      }
      break;
    case Screen::kReferee: {
      strike(kRefereeSeat);
      const PlayerVector equal{0.25, 0.25, 0.25, 0.25};
      PlayerVector y{};
      double total = 0.0;
      for (double x : resolved_contribution_) total += x;
      for (std::size_t i = 0; i < kPlayers; ++i) y[i] = equal[i] * kGrowth * total;
      finish_round(y, FixedSplitMechanism(equal), equal);
      break;
    }
    case Screen::kVote:
      for (int i = 0; i < kPlayers; ++i) {
        const auto s = static_cast<std::size_t>(i);
        if (pending_vote_[s]) continue;
        strike(i);
        pending_vote_[s] = machine_.seat_stream(i).bernoulli(0.5) ? 'A' : 'B';
      }
      break;
    case Screen::kDone:
      break;
  }
}

// Advances through every step that needs no further human input.
void Session::pump() {
  for (;;) {
    process_deadlines();
    switch (screen_) {
      case Screen::kLobby: {
        bool ready = true;
        for (std::size_t s = 0; s <= kPlayers; ++s)
          if (seats_[s] == SeatKind::kHuman && !joined_[s]) ready = false;
        if (!ready) return;
        start();
        continue;
      }
      case Screen::kContribute: {
        PlayerVector c{};
        for (std::size_t s = 0; s < kPlayers; ++s) {
          if (!pending_contribution_[s]) return;
          c[s] = *pending_contribution_[s];
        }
        resolved_contribution_ = c;
        if (machine_.external_block()) {
          screen_ = Screen::kReferee;
          deadline_ = clock_->now() + kActionSeconds;
          double total = 0.0;
          for (double x : c) total += x;
          emit("referee_open", {{"contributions", c}, {"pool", kGrowth * total}, {"seconds", kActionSeconds}});
          if (seats_[kRefereeSeat] != SeatKind::kHuman) {
            const PlayerVector w = random_split();
            PlayerVector y{};
            for (std::size_t i = 0; i < kPlayers; ++i) y[i] = w[i] * kGrowth * total;
            finish_round(y, FixedSplitMechanism(w), w);
          } else {
            return;
          }
        } else {
          const Mechanism& mech = *machine_.block_mechanism();
          finish_round(mech.payouts(options_.profile.endowments(), c), mech, std::nullopt);
        }
        continue;
      }
      case Screen::kReferee:
        return;
      case Screen::kVote: {
        std::array<char, kPlayers> votes{};
        for (std::size_t s = 0; s < kPlayers; ++s) {
          if (!pending_vote_[s]) return;
          votes[s] = *pending_vote_[s];
        }
        const VoteOutcome out = machine_.resolve_vote(votes);
        emit("vote_result", {{"votes", std::vector<std::string>{std::string(1, out.votes[0]), std::string(1, out.votes[1]),
                                                                std::string(1, out.votes[2]), std::string(1, out.votes[3])}},
                             {"fraction_a", out.fraction_a},
                             {"bonus", std::string(1, out.bonus)}});
        advance();
        continue;
      }
      case Screen::kDone:
        return;
    }
  }
}

ActionResult Session::reject(std::string reason) const {
  return {false, std::move(reason), state_locked(std::nullopt)};
}

ActionResult Session::accept() const { return {true, {}, state_locked(std::nullopt)}; }

ActionResult Session::join(int seat) {
  std::lock_guard lock(mutex_);
  pump();
  if (seat < 0 || seat > kPlayers) return reject("no such seat");
  const auto s = static_cast<std::size_t>(seat);
  if (seats_[s] != SeatKind::kHuman) return reject("seat is not open to a human");
  if (joined_[s]) return reject("seat already joined");
  if (screen_ != Screen::kLobby) return reject("session already started");
  joined_[s] = true;
  emit("seat_joined", {{"seat", seat}});
  pump();
  return accept();
}

ActionResult Session::contribute(int seat, int coins) {
  std::lock_guard lock(mutex_);
  const auto expirations = expirations_;
  pump();
  // The screen this action answered has closed; never carry it into the next one.
  if (expirations_ != expirations) return reject("deadline passed");
  if (seat < 0 || seat >= kPlayers) return reject("no such player seat");
  const auto s = static_cast<std::size_t>(seat);
  if (seats_[s] != SeatKind::kHuman) return reject("seat is not controlled by a human");
  if (screen_ != Screen::kContribute) return reject("not accepting contributions now");
  if (pending_contribution_[s]) return reject("contribution already submitted or deadline passed");
  if (coins < 0 || coins > static_cast<int>(options_.profile[seat]))
    return reject("contribution must be an integer in [0, " + std::to_string(static_cast<int>(options_.profile[seat])) +
                  "]");
  pending_contribution_[s] = coins;
  pump();
  return accept();
}

ActionResult Session::allocate(const PlayerVector& weights) {
  std::lock_guard lock(mutex_);
  const auto expirations = expirations_;
  pump();
  // The screen this action answered has closed; never carry it into the next one.
  if (expirations_ != expirations) return reject("deadline passed");
  if (seats_[kRefereeSeat] != SeatKind::kHuman) return reject("no human referee in this session");
  if (screen_ != Screen::kReferee) return reject("not accepting referee weights now");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) return reject("weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-3) return reject("distribution needs to add up to 1");
  PlayerVector w = weights;
  for (double& x : w) x /= total;
  double contributed = 0.0;
  for (double x : resolved_contribution_) contributed += x;
  PlayerVector y{};
  for (std::size_t i = 0; i < kPlayers; ++i) y[i] = w[i] * kGrowth * contributed;
  finish_round(y, FixedSplitMechanism(w), w);
  pump();
  return accept();
}

ActionResult Session::vote(int seat, char choice) {
  std::lock_guard lock(mutex_);
  const auto expirations = expirations_;
  pump();
  // The screen this action answered has closed; never carry it into the next one.
  if (expirations_ != expirations) return reject("deadline passed");
  if (seat < 0 || seat >= kPlayers) return reject("no such player seat");
  const auto s = static_cast<std::size_t>(seat);
  if (seats_[s] != SeatKind::kHuman) return reject("seat is not controlled by a human");
  if (screen_ != Screen::kVote) return reject("not accepting votes now");
  if (choice != 'A' && choice != 'B') return reject("vote must be A or B");
  if (pending_vote_[s]) return reject("vote already cast or deadline passed");
  pending_vote_[s] = choice;
  pump();
  return accept();
}

ActionResult Session::act(const nlohmann::json& action) {
  try {
    const std::string type = action.at("type").get<std::string>();
    if (type == "join") return join(action.at("seat").get<int>());
    if (type == "contribute") {
      const auto& coins = action.at("coins");
      if (!coins.is_number_integer()) {
        std::lock_guard lock(mutex_);
        return reject("contribution must be an integer");
      }
      return contribute(action.at("seat").get<int>(), coins.get<int>());
    }
    if (type == "allocate") {
      const auto w = action.at("weights").get<std::vector<double>>();
      if (w.size() != kPlayers) {
        std::lock_guard lock(mutex_);
        return reject("weights need 4 entries");
      }
      return allocate({w[0], w[1], w[2], w[3]});
    }
    if (type == "vote") {
      const auto choice = action.at("choice").get<std::string>();
      return vote(action.at("seat").get<int>(), choice.size() == 1 ? choice[0] : '?');
    }
    std::lock_guard lock(mutex_);
    return reject("unknown action type: " + type);
  } catch (const nlohmann::json::exception& e) {
    std::lock_guard lock(mutex_);
    return reject(std::string("malformed action: ") + e.what());
  }
}

void Session::tick() {
  std::lock_guard lock(mutex_);
  pump();
}

bool Session::done() const {
  std::lock_guard lock(mutex_);
  return screen_ == Screen::kDone;
}

nlohmann::json Session::state_locked(std::optional<int> seat) const {
  nlohmann::json seats = nlohmann::json::array();
  for (std::size_t s = 0; s <= kPlayers; ++s) {
    if (s == kRefereeSeat && !options_.referee_block) continue;
    nlohmann::json j = {{"seat", s}, {"kind", seat_kind_name(seats_[s])}, {"strikes", strikes_[s]}};
    if (screen_ == Screen::kLobby) j["joined"] = joined_[s];
    if (s < kPlayers && screen_ == Screen::kContribute) j["submitted"] = pending_contribution_[s] && !simulated(int(s));
    if (s < kPlayers && screen_ == Screen::kVote) j["voted"] = pending_vote_[s] && !simulated(int(s));
    seats.push_back(std::move(j));
  }
  const auto& rec = machine_.record();
  nlohmann::json out = {{"id", id_},
                        {"screen", screen_name()},
                        {"profile", to_json(options_.profile)},
                        {"block", static_cast<int>(rec.blocks.size())},
                        {"block_label", rec.blocks.empty() ? std::string() : rec.blocks.back().mech},
                        {"round", rec.blocks.empty() ? 0 : static_cast<int>(rec.blocks.back().rounds.size()) + 1},
                        {"seats", seats},
                        {"events", events_.size()}};
  if (screen_ != Screen::kDone) out["seconds_left"] = std::max(0.0, deadline_ - clock_->now());
  if (seat && *seat >= 0 && *seat < kPlayers) {
    const auto s = static_cast<std::size_t>(*seat);
    out["you"] = {{"seat", *seat}, {"endowment", options_.profile[*seat]}};
    if (screen_ == Screen::kContribute && pending_contribution_[s]) out["you"]["contribution"] = *pending_contribution_[s];
    if (screen_ == Screen::kVote && pending_vote_[s]) out["you"]["vote"] = std::string(1, *pending_vote_[s]);
  }
  if (screen_ == Screen::kReferee) {
    double total = 0.0;
    for (double x : resolved_contribution_) total += x;
    out["referee"] = {{"contributions", resolved_contribution_}, {"pool", kGrowth * total}};
  }
  return out;
}

nlohmann::json Session::state(std::optional<int> seat) const {
  std::lock_guard lock(mutex_);
  return state_locked(seat);
}

std::vector<Event> Session::events_since(std::uint64_t since) const {
  std::lock_guard lock(mutex_);
  if (since >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(since), events_.end()};
}

std::vector<Event> Session::wait_events(std::uint64_t since, double timeout_seconds) const {
  std::unique_lock lock(mutex_);
  events_changed_.wait_for(lock, std::chrono::duration<double>(timeout_seconds),
                           [&] { return events_.size() > since; });
  if (since >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(since), events_.end()};
}

EpisodeRecord Session::record() const {
  std::lock_guard lock(mutex_);
  return machine_.record();
}

std::array<int, kPlayers + 1> Session::strikes() const {
  std::lock_guard lock(mutex_);
  return strikes_;
}

std::array<SeatKind, kPlayers + 1> Session::seats() const {
  std::lock_guard lock(mutex_);
  return seats_;
}

EpisodeRecord replay_events(const SessionOptions& options, const std::vector<Event>& events) {
  SessionMachine machine(machine_config(options));
  if (options.referee_block) machine.set_external(*options.referee_block, kHumanReferee);
  for (const Event& ev : events) {
    if (ev.type == "round_result") {
      const auto cv = ev.data.at("contributions").get<std::vector<double>>();
      const PlayerVector c{cv[0], cv[1], cv[2], cv[3]};
      if (ev.data.contains("referee_weights")) {
        const auto wv = ev.data["referee_weights"].get<std::vector<double>>();
        double total = 0.0;
        for (double x : c) total += x;
        PlayerVector y{};
        for (std::size_t i = 0; i < kPlayers; ++i) y[i] = wv[i] * kGrowth * total;
        machine.resolve_round(c, y);
      } else {
        machine.resolve_round(c);
      }
    } else if (ev.type == "vote_result") {
      const auto v = ev.data.at("votes").get<std::vector<std::string>>();
      // The recorded bonus must come out of the same lottery draw.
      const VoteOutcome out = machine.resolve_vote({v[0][0], v[1][0], v[2][0], v[3][0]});
      if (std::string(1, out.bonus) != ev.data.at("bonus").get<std::string>())
        throw std::runtime_error("replay: bonus lottery diverged from the event stream");
    }
  }
  return machine.record();
}

SessionManager::SessionManager(std::shared_ptr<const Clock> clock) : clock_(std::move(clock)) {}

std::string SessionManager::create(SessionOptions options) {
  std::lock_guard lock(mutex_);
  const std::string id = "s" + std::to_string(next_++);
  sessions_.emplace(id, std::make_shared<Session>(id, std::move(options), clock_));
  return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void SessionManager::tick_all() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [_, s] : sessions_) all.push_back(s);
  }
  for (const auto& s : all) s->tick();
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

}  // namespace redist::service

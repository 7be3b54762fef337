#include "redist/game/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace redist {

EndowmentProfile::EndowmentProfile(const PlayerVector& endowments) : endowments_(endowments) {
  for (double e : endowments_) {
    if (e < 1 || e > kMaxEndowment || e != std::floor(e)) {
      throw DomainError("endowments must be integers in [1, 10], got " + std::to_string(e));
    }
  }
  const auto head = std::find(endowments_.begin(), endowments_.end(), double{kHeadEndowment});
  if (head == endowments_.end()) throw DomainError("profile needs a head seat with 10 coins");
  head_ = static_cast<int>(head - endowments_.begin());
}

EndowmentProfile EndowmentProfile::head_tail(int tail) {
  const auto t = static_cast<double>(tail);
  return EndowmentProfile(PlayerVector{double{kHeadEndowment}, t, t, t});
}

std::string EndowmentProfile::str() const {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < kPlayers; ++i) os << (i ? "," : "") << endowments_[static_cast<std::size_t>(i)];
  os << ']';
  return os.str();
}

PlayerVector BlockRecord::relative_payouts() const {
  PlayerVector out{};
  for (const auto& r : rounds)
    for (int i = 0; i < kPlayers; ++i) out[static_cast<std::size_t>(i)] += r.payouts[static_cast<std::size_t>(i)] / profile[i];
  return out;
}

std::size_t EpisodeRecord::round_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.rounds.size();
  return n;
}

const BlockRecord& EpisodeRecord::block_for(char label) const {
  const std::string want(1, label);
  for (const auto& b : blocks)
    if (b.mech == want) return b;
  throw std::invalid_argument("episode has no block labelled " + want);
}

nlohmann::json to_json(const EndowmentProfile& profile) { return profile.endowments(); }

EndowmentProfile profile_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != kPlayers) throw std::invalid_argument("profile must have 4 entries");
  return EndowmentProfile(PlayerVector{v[0], v[1], v[2], v[3]});
}

nlohmann::json to_json(const RoundRecord& round) {
  return {{"t", round.t}, {"c", round.contributions}, {"y", round.payouts}, {"ret", round.returns}};
}

nlohmann::json to_json(const EpisodeRecord& episode) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : episode.blocks) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : b.rounds) rounds.push_back(to_json(r));
    blocks.push_back({{"mech", b.mech}, {"rounds", std::move(rounds)}});
  }
  nlohmann::json votes = nlohmann::json::array();
  for (char v : episode.votes) votes.push_back(std::string(1, v));
  return {{"seed", episode.seed},
          {"profile", to_json(episode.profile)},
          {"mechanisms", episode.mechanisms},
          {"order_flag", episode.order_flag},
          {"blocks", std::move(blocks)},
          {"votes", std::move(votes)},
          {"bonus_mech", std::string(1, episode.bonus_mech)}};
}

namespace {

PlayerVector player_vector(const nlohmann::json& j, const char* field) {
  const auto v = j.at(field).get<std::vector<double>>();
  if (v.size() != kPlayers) throw std::invalid_argument(std::string("field ") + field + " must have 4 entries");
  return {v[0], v[1], v[2], v[3]};
}

char label_char(const nlohmann::json& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw std::invalid_argument("vote labels are single characters, got '" + s + "'");
  return s[0];
}

}  // namespace

EpisodeRecord episode_from_json(const nlohmann::json& j) {
  try {
    EpisodeRecord e;
    e.seed = j.at("seed").get<std::uint64_t>();
    e.profile = profile_from_json(j.at("profile"));
    e.mechanisms = j.value("mechanisms", nlohmann::json::object());
    e.order_flag = j.value("order_flag", false);
    for (const auto& jb : j.at("blocks")) {
      BlockRecord b;
      b.mech = jb.at("mech").get<std::string>();
      b.profile = e.profile;
      for (const auto& jr : jb.at("rounds")) {
        RoundRecord r;
        r.t = jr.at("t").get<int>();
        r.contributions = player_vector(jr, "c");
        r.payouts = player_vector(jr, "y");
        r.returns = player_vector(jr, "ret");
        b.rounds.push_back(r);
      }
      e.blocks.push_back(std::move(b));
    }
    if (j.contains("votes")) {
      const auto& votes = j.at("votes");
      if (votes.size() != kPlayers) throw std::invalid_argument("votes must have 4 entries");
      for (std::size_t i = 0; i < kPlayers; ++i) e.votes[i] = label_char(votes[i]);
    }
    if (j.contains("bonus_mech")) e.bonus_mech = label_char(j.at("bonus_mech"));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("episode schema violation: ") + ex.what());
  } catch (const DomainError& ex) {
    throw std::invalid_argument(std::string("episode schema violation: ") + ex.what());
  }
}

std::string to_jsonl_line(const EpisodeRecord& episode) { return to_json(episode).dump() + "\n"; }

}  // namespace redist

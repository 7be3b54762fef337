#include "redist/players/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

namespace redist::players {

std::string_view archetype_name(Archetype a) {
  switch (a) {
    case Archetype::kFreeRider: return "free_rider";
    case Archetype::kCooperator: return "cooperator";
    case Archetype::kConditional: return "conditional";
    case Archetype::kNoisy: return "noisy";
  }
  return "?";
}

Archetype archetype_from_name(std::string_view name) {
  for (Archetype a : kArchetypes)
    if (archetype_name(a) == name) return a;
  throw std::invalid_argument("unknown archetype '" + std::string(name) + "'");
}

StyleMix StyleMix::parse(std::string_view text) {
  StyleMix mix;
  mix.weights.fill(0.0);
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("style mix entry '" + item + "' lacks '='");
    const Archetype a = archetype_from_name(item.substr(0, eq));
    mix.weights[static_cast<std::size_t>(a)] = std::stod(item.substr(eq + 1));
  }
  mix.validate();
  return mix;
}

void StyleMix::validate() const {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("style mix weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("style mix is empty");
}

Archetype StyleMix::draw(Rng& rng) const {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) continue;
    if (u < weights[i]) return kArchetypes[i];
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0) return kArchetypes[i];
  throw std::invalid_argument("style mix is empty");
}

void ArchetypePlayer::begin_block(const EndowmentProfile&, int) { target_ = 0.0; }

double ArchetypePlayer::contribute(const RoundContext& ctx, Rng& rng) {
  const int e = static_cast<int>((*ctx.profile)[ctx.seat]);
  switch (archetype_) {
    case Archetype::kFreeRider: return 0.0;
    case Archetype::kCooperator: return e;
    case Archetype::kNoisy: return rng.uniform_int(0, e);
    case Archetype::kConditional: break;
  }
  if (ctx.previous == nullptr) {
    target_ = rng.uniform(params_.initial_low, params_.initial_high);
  } else {
    const PlayerVector& endow = ctx.profile->endowments();
    const RoundRecord& prev = *ctx.previous;
    const auto i = static_cast<std::size_t>(ctx.seat);
    const double own = prev.contributions[i] / endow[i];
    double others = 0.0;
    double best_return = -1.0;
    double best_rho = own;
    for (std::size_t j = 0; j < kPlayers; ++j) {
      if (j == i) continue;
      const double rho = prev.contributions[j] / endow[j];
      others += rho / (kPlayers - 1);
      const double rel_return = prev.returns[j] / endow[j];
      if (rel_return > best_return) {
        best_return = rel_return;
        best_rho = rho;
      }
    }
    if (best_return < prev.returns[i] / endow[i]) best_rho = own;
    target_ = std::clamp(own + params_.conformity * (others - own) + params_.imitation * (best_rho - own), 0.0, 1.0);
  }
  std::binomial_distribution<int> coins(e, target_);
  return coins(rng);
}

namespace {

std::vector<EndowmentProfile> default_profiles() {
  std::vector<EndowmentProfile> out;
  for (int tail = 2; tail <= 10; ++tail) out.push_back(EndowmentProfile::head_tail(tail));
  return out;
}

std::vector<nlohmann::json> default_mechanisms() {
  return {{{"kind", "named"}, {"name", "strict_egalitarian"}},
          {{"kind", "named"}, {"name", "libertarian"}},
          {{"kind", "named"}, {"name", "liberal_egalitarian"}},
          {{"kind", "manifold"}, {"v", 0.5}, {"w", 0.5}}};
}

}  // namespace

std::vector<EpisodeRecord> generate_corpus(const CorpusConfig& config) {
  config.mix.validate();
  if (config.episodes < 1) throw std::invalid_argument("corpus needs at least one episode");
  const auto profiles = config.profiles.empty() ? default_profiles() : config.profiles;
  const auto specs = config.mechanisms.empty() ? default_mechanisms() : config.mechanisms;
  if (specs.size() < 2) throw std::invalid_argument("corpus needs at least two mechanisms");
  std::vector<MechanismPtr> mechanisms;
  for (const auto& s : specs) mechanisms.push_back(make_mechanism(s));

  const Rng root(config.seed);
  std::vector<EpisodeRecord> out;
  out.reserve(static_cast<std::size_t>(config.episodes));
  for (int n = 0; n < config.episodes; ++n) {
    Rng setup = root.derive(static_cast<std::uint64_t>(n));
    const EndowmentProfile& profile = profiles[static_cast<std::size_t>(setup.uniform_int(0, static_cast<int>(profiles.size()) - 1))];
    const int m = static_cast<int>(mechanisms.size());
    const int a = setup.uniform_int(0, m - 1);
    int b = setup.uniform_int(0, m - 2);
    if (b >= a) ++b;
    const bool order = setup.bernoulli(0.5);

    std::array<std::unique_ptr<ArchetypePlayer>, kPlayers> seats;
    SeatPlayers players{};
    for (std::size_t i = 0; i < kPlayers; ++i) {
      seats[i] = std::make_unique<ArchetypePlayer>(config.mix.draw(setup), config.conditional);
      players[i] = seats[i].get();
    }
    out.push_back(run_session(profile, players, mechanisms[static_cast<std::size_t>(a)],
                              mechanisms[static_cast<std::size_t>(b)], order, VoteModel{}, setup.derive("session").seed()));
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write corpus " + path.string());
  for (const auto& ep : episodes) f << to_jsonl_line(ep);
}

std::vector<EpisodeRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read corpus " + path.string());
  std::vector<EpisodeRecord> out;
  std::string line;
  int number = 0;
  while (std::getline(f, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> keys, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw std::invalid_argument(std::string("unknown ") + what + " key '" + key + "'");
  }
}

}  // namespace

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"mix", "conditional", "profiles", "mechanisms", "episodes", "seed"}, "corpus config");
  CorpusConfig c;
  try {
    if (j.contains("mix")) {
      const auto& m = j["mix"];
      if (m.is_string()) {
        c.mix = StyleMix::parse(m.get<std::string>());
      } else {
        c.mix.weights.fill(0.0);
        for (const auto& [name, w] : m.items())
          c.mix.weights[static_cast<std::size_t>(archetype_from_name(name))] = w.get<double>();
      }
    }
    if (j.contains("conditional")) {
      const auto& p = j["conditional"];
      reject_unknown(p, {"conformity", "imitation", "initial_low", "initial_high"}, "conditional");
      c.conditional.conformity = p.value("conformity", c.conditional.conformity);
      c.conditional.imitation = p.value("imitation", c.conditional.imitation);
      c.conditional.initial_low = p.value("initial_low", c.conditional.initial_low);
      c.conditional.initial_high = p.value("initial_high", c.conditional.initial_high);
    }
    if (j.contains("profiles"))
      for (const auto& p : j["profiles"]) c.profiles.push_back(profile_from_json(p));
    if (j.contains("mechanisms"))
      for (const auto& m : j["mechanisms"]) c.mechanisms.push_back(m);
    c.episodes = j.value("episodes", c.episodes);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("corpus config: ") + e.what());
  }
  c.mix.validate();
  if (c.episodes < 1) throw std::invalid_argument("corpus config: episodes must be at least 1");
  return c;
}

nlohmann::json CorpusConfig::to_json() const {
  nlohmann::json mix_json = nlohmann::json::object();
  for (std::size_t k = 0; k < kArchetypes.size(); ++k)
    mix_json[std::string(archetype_name(kArchetypes[k]))] = mix.weights[k];
  nlohmann::json profile_json = nlohmann::json::array();
  for (const auto& p : profiles) profile_json.push_back(redist::to_json(p));
  return {{"mix", mix_json},
          {"conditional",
           {{"conformity", conditional.conformity},
            {"imitation", conditional.imitation},
            {"initial_low", conditional.initial_low},
            {"initial_high", conditional.initial_high}}},
          {"profiles", profile_json},
          {"mechanisms", mechanisms},
          {"episodes", episodes},
          {"seed", seed}};
}

}  // namespace redist::players

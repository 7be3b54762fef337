#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "redist/game/engine.hpp"

namespace redist::players {

/// Behavioural archetypes of the synthetic corpus.
enum class Archetype { kFreeRider, kCooperator, kConditional, kNoisy };

inline constexpr std::array<Archetype, 4> kArchetypes = {Archetype::kFreeRider, Archetype::kCooperator,
                                                         Archetype::kConditional, Archetype::kNoisy};

std::string_view archetype_name(Archetype a);
/// Throws std::invalid_argument for an unknown name.
Archetype archetype_from_name(std::string_view name);

/// Relative frequency of each archetype; need not be normalized.
struct StyleMix {
  std::array<double, 4> weights{0.1, 0.1, 0.7, 0.1};  // indexed like kArchetypes

  /// Parses "conditional=0.7,free_rider=0.1"; unnamed archetypes get weight 0.
  static StyleMix parse(std::string_view text);
  /// Throws std::invalid_argument if weights are negative or all zero.
  void validate() const;
  Archetype draw(Rng& rng) const;
};

/// Conditional cooperators move their relative contribution toward the others'
/// previous mean and toward the relative contribution of whichever other seat
/// earned the highest relative return last round.
struct ConditionalParams {
  double conformity = 0.5;  // pull toward others' mean c/e
  double imitation = 0.4;   // pull toward the best-earning other seat's c/e
  double initial_low = 0.3;  // first-round c/e ~ U(low, high)
  double initial_high = 0.9;
};

class ArchetypePlayer final : public PlayerPolicy {
 public:
  ArchetypePlayer(Archetype archetype, ConditionalParams params = {}) : archetype_(archetype), params_(params) {}

  void begin_block(const EndowmentProfile& profile, int seat) override;
  double contribute(const RoundContext& ctx, Rng& rng) override;

  Archetype archetype() const { return archetype_; }

 private:
  Archetype archetype_;
  ConditionalParams params_;
  double target_ = 0.0;  // current relative contribution
};

struct CorpusConfig {
  StyleMix mix;
  ConditionalParams conditional;
  std::vector<EndowmentProfile> profiles;  // empty: head 10 with tails 2..10
  std::vector<nlohmann::json> mechanisms;  // empty: the three named baselines plus (v, w) = (½, ½)
  int episodes = 100;
  std::uint64_t seed = 0;

  /// Keys: mix (string or {archetype: weight}), conditional {conformity, imitation,
  /// initial_low, initial_high}, profiles, mechanisms, episodes, seed.
  /// Throws std::invalid_argument on unknown keys or bad values.
  static CorpusConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Full 34-round sessions of archetype players. Each episode draws a profile, two
/// distinct mechanisms, an order flag, and an archetype per seat.
/// Throws std::invalid_argument for an empty mix or fewer than one episode.
std::vector<EpisodeRecord> generate_corpus(const CorpusConfig& config);

void write_corpus(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes);
/// Throws std::invalid_argument naming the line of the first schema violation.
std::vector<EpisodeRecord> read_corpus(const std::filesystem::path& path);

}  // namespace redist::players

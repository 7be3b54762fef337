#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "redist/players/rational.hpp"
#include "redist/players/virtual_player.hpp"

namespace redist::arena {

/// Who plays the simulated blocks.
struct PlayerSource {
  enum class Kind { kRational, kVirtual };
  Kind kind = Kind::kRational;
  players::RationalConfig rational;
  std::shared_ptr<const players::VirtualPlayerModel> model;

  static PlayerSource rational_players(players::RationalConfig config = {});
  static PlayerSource virtual_players(std::shared_ptr<const players::VirtualPlayerModel> model);
};

/// Head 10 with tails {2, 4, 6, 8, 10}.
std::vector<EndowmentProfile> evaluation_profiles();

struct HeadToHead {
  double share = 0.0;  // mean expected vote share of A
  double std_error = 0.0;
  double wilson_low = 0.0;  // 95% Wilson interval over 4·blocks votes
  double wilson_high = 0.0;
  int blocks = 0;
};

/// 95% Wilson score interval for a proportion observed over n trials.
std::pair<double, double> wilson_interval(double proportion, double n, double z = 1.959963984540054);

struct HeadToHeadOptions {
  std::vector<EndowmentProfile> profiles;  // empty: evaluation_profiles(); block n uses profiles[n % size]
  int rounds = kBlockRounds;
  bool sampled_votes = false;  // count sampled ballots instead of vote probabilities
  VoteModel vote_model;
};

/// Plays n_blocks pairs of blocks, one under each mechanism, and scores A by
/// the votes it would receive. Both blocks of a pair share the player draws.
/// Random streams are keyed by the pair and by each mechanism's JSON, so
/// share(A, B) + share(B, A) = 1 and share(A, A) = 0.5.
HeadToHead head_to_head(const Mechanism& a, const Mechanism& b, const PlayerSource& players, int n_blocks,
                        std::uint64_t seed, const HeadToHeadOptions& options = {});

struct Metagame {
  std::vector<std::string> labels;
  std::vector<nlohmann::json> mechanisms;
  std::vector<std::vector<double>> share;      // share[i][j]: row i's vote share against column j
  std::vector<std::vector<double>> std_error;
  std::vector<int> dominant;                   // rows with every off-diagonal entry ≥ 0.5
  std::optional<std::vector<int>> condorcet_cycle;  // a cycle of strict majorities, if any
};

/// The 3×3 grid v, w ∈ {0, ½, 1}.
std::vector<nlohmann::json> default_grid();

/// Round robin over every ordered pair, including the diagonal.
Metagame run_metagame(const std::vector<nlohmann::json>& grid, const PlayerSource& players, int n_blocks,
                      std::uint64_t seed, const HeadToHeadOptions& options = {});

/// Finds a directed cycle in the graph i → j when share[i][j] > 0.5.
std::optional<std::vector<int>> find_condorcet_cycle(const std::vector<std::vector<double>>& share);

nlohmann::json to_json(const HeadToHead& result);
nlohmann::json to_json(const Metagame& result);

}  // namespace redist::arena

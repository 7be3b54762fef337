#pragma once

#include <array>
#include <cstddef>
#include <utility>

#include <nlohmann/json.hpp>

#include "redist/game/types.hpp"
#include "redist/nn/layers.hpp"
#include "redist/rng.hpp"

namespace redist::designer {

inline constexpr std::size_t kNodeFeatures = 3;
inline constexpr std::size_t kLatent = 32;
inline constexpr std::size_t kEdges = kPlayers * (kPlayers - 1);
inline constexpr const char* kPolicyTypeTag = "designer_policy";

/// Per-seat node features for one round: [e/10, c/10, c/e]. Edge and global
/// input attributes are empty.
struct DesignerObservation {
  std::array<std::array<double, kNodeFeatures>, kPlayers> nodes{};
};

/// Throws DomainError for a zero endowment.
DesignerObservation build_observation(const PlayerVector& endowments, const PlayerVector& contributions);

/// Batched, differentiable in the contributions: e and c are B×4, result is (4B)×3
/// with row b·4+k holding seat k of episode b.
nn::Var build_observation(nn::Graph& graph, const nn::Tensor& endowments, nn::Var contributions);

/// Directed edges (sender, receiver) of the complete graph on four seats, no self loops.
const std::array<std::pair<int, int>, kEdges>& edge_list();

/// Two graph networks in sequence followed by a softmax over per-seat scalars.
/// Edge and vertex maps are shared across all edges/vertices, so the output is
/// equivariant to seat permutations.
class GraphNet {
 public:
  static GraphNet create(Rng& rng);
  static GraphNet zeros();
  /// Throws nn::FormatError if a layer is missing or mis-shaped.
  static GraphNet from_params(nn::ParamSet params);
  static GraphNet from_json(const nlohmann::json& doc);

  const nn::ParamSet& params() const { return params_; }
  nn::ParamSet& params() { return params_; }
  nlohmann::json to_json() const;

  /// Redistribution weights: positive, summing to one.
  PlayerVector forward(const DesignerObservation& obs) const;
  /// nodes is (4B)×3; returns B×4 weights.
  nn::Var forward(const nn::BoundParams& bound, nn::Var nodes) const;

  bool operator==(const GraphNet& other) const { return params_ == other.params_; }

 private:
  explicit GraphNet(nn::ParamSet params);

  nn::ParamSet params_;
  nn::Linear edge1_, vertex1_, global1_, edge2_, vertex2_;
};

inline PlayerVector gn_forward(const GraphNet& net, const DesignerObservation& obs) { return net.forward(obs); }

}  // namespace redist::designer

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "redist/designer/graph_net.hpp"
#include "redist/game/types.hpp"
#include "redist/nn/graph.hpp"

namespace redist {

/// A point on the (v, w) manifold. v mixes relative against absolute payout;
/// w mixes own against others' contribution.
struct ManifoldParams {
  double v = 0.0;
  double w = 1.0;

  /// Throws DomainError unless both lie in [0, 1].
  void validate() const;
  bool operator==(const ManifoldParams&) const = default;
};

enum class Baseline { kStrictEgalitarian, kLibertarian, kLiberalEgalitarian };

ManifoldParams baseline_params(Baseline baseline);
std::string_view baseline_name(Baseline baseline);
/// Throws std::invalid_argument for an unknown name.
Baseline baseline_from_name(std::string_view name);

struct ManifoldPoint {
  ManifoldParams params;
};
struct NamedBaseline {
  Baseline baseline;
};
struct DesignerPolicy {
  std::string weights_ref;
};
using MechanismSpec = std::variant<ManifoldPoint, NamedBaseline, DesignerPolicy>;

/// Accepts {"kind":"manifold","v","w"}, {"kind":"named","name"}, {"kind":"designer","weights_ref"}.
MechanismSpec mechanism_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MechanismSpec& spec);

/// Manifold payouts for one round. C = 0 pays everybody 0.
/// Throws DomainError for a non-positive endowment or a contribution outside [0, e].
PlayerVector manifold_payout(const ManifoldParams& p, const PlayerVector& endowments,
                             const PlayerVector& contributions);
/// Closed-form ∂y/∂c of the manifold payouts.
Jacobian manifold_jacobian(const ManifoldParams& p, const PlayerVector& endowments, const PlayerVector& contributions);
/// Batched differentiable manifold payouts: e is B×4, c is B×4.
nn::Var manifold_payout(nn::Graph& graph, const ManifoldParams& p, const nn::Tensor& endowments, nn::Var contributions);

/// Payouts y_i = weight_i · r·C from the designer network evaluated on this round only.
PlayerVector designer_payout(const designer::GraphNet& net, const PlayerVector& endowments,
                             const PlayerVector& contributions);

/// Maps one round's contributions to payouts. Implementations are immutable and
/// safe to share across threads.
class Mechanism {
 public:
  virtual ~Mechanism() = default;

  virtual PlayerVector payouts(const PlayerVector& endowments, const PlayerVector& contributions) const = 0;
  /// Differentiable batched payouts (e, c are B×4).
  virtual nn::Var payouts(nn::Graph& graph, const nn::Tensor& endowments, nn::Var contributions) const = 0;
  /// ∂y/∂c; by default obtained by back-propagating through the batched payouts.
  virtual Jacobian jacobian(const PlayerVector& endowments, const PlayerVector& contributions) const;

  virtual nlohmann::json to_json() const = 0;
  virtual std::string name() const = 0;
};

using MechanismPtr = std::shared_ptr<const Mechanism>;

class ManifoldMechanism final : public Mechanism {
 public:
  explicit ManifoldMechanism(ManifoldParams params, std::string alias = {});

  PlayerVector payouts(const PlayerVector& e, const PlayerVector& c) const override;
  nn::Var payouts(nn::Graph& graph, const nn::Tensor& e, nn::Var c) const override;
  Jacobian jacobian(const PlayerVector& e, const PlayerVector& c) const override;
  nlohmann::json to_json() const override;
  std::string name() const override;

  const ManifoldParams& params() const { return params_; }

 private:
  ManifoldParams params_;
  std::string alias_;
};

class DesignerMechanism final : public Mechanism {
 public:
  DesignerMechanism(std::shared_ptr<const designer::GraphNet> net, std::string weights_ref);

  PlayerVector payouts(const PlayerVector& e, const PlayerVector& c) const override;
  nn::Var payouts(nn::Graph& graph, const nn::Tensor& e, nn::Var c) const override;
  nlohmann::json to_json() const override;
  std::string name() const override;

  const designer::GraphNet& net() const { return *net_; }

 private:
  std::shared_ptr<const designer::GraphNet> net_;
  std::string weights_ref_;
};

/// Splits the pool by fixed weights (a human referee's slider allocation).
class FixedSplitMechanism final : public Mechanism {
 public:
  /// Throws DomainError unless weights are non-negative and sum to 1 within 1e-9.
  explicit FixedSplitMechanism(const PlayerVector& weights);

  PlayerVector payouts(const PlayerVector& e, const PlayerVector& c) const override;
  nn::Var payouts(nn::Graph& graph, const nn::Tensor& e, nn::Var c) const override;
  nlohmann::json to_json() const override;
  std::string name() const override { return "fixed_split"; }

 private:
  PlayerVector weights_;
};

MechanismPtr make_mechanism(const MechanismSpec& spec, const std::filesystem::path& base_dir = {});
MechanismPtr make_mechanism(const nlohmann::json& spec, const std::filesystem::path& base_dir = {});
MechanismPtr make_baseline(Baseline baseline);
MechanismPtr make_manifold(double v, double w);
/// The block-1 mechanism: equal split of the pool (w = 1/k).
MechanismPtr no_referee();

Jacobian payout_jacobian(const Mechanism& mechanism, const PlayerVector& endowments, const PlayerVector& contributions);

/// Throws DomainError for a non-positive endowment or a contribution outside [0, e].
void validate_round(const PlayerVector& endowments, const PlayerVector& contributions);

}  // namespace redist

#include "redist/mechanisms/mechanism.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "redist/nn/ops.hpp"

namespace redist {

namespace {

constexpr double kOthers = kPlayers - 1;

nn::Tensor row_tensor(const PlayerVector& v) { return nn::Tensor(1, kPlayers, std::vector<double>(v.begin(), v.end())); }

}  // namespace

void ManifoldParams::validate() const {
  if (!(v >= 0.0 && v <= 1.0) || !(w >= 0.0 && w <= 1.0)) {
    throw DomainError("manifold parameters must lie in [0,1], got v=" + std::to_string(v) + " w=" + std::to_string(w));
  }
}

ManifoldParams baseline_params(Baseline baseline) {
  switch (baseline) {
    case Baseline::kStrictEgalitarian:
      return {0.0, 1.0 / kPlayers};
    case Baseline::kLibertarian:
      return {0.0, 1.0};
    case Baseline::kLiberalEgalitarian:
      return {1.0, 1.0};
  }
  throw std::invalid_argument("unknown baseline");
}

std::string_view baseline_name(Baseline baseline) {
  switch (baseline) {
    case Baseline::kStrictEgalitarian:
      return "strict_egalitarian";
    case Baseline::kLibertarian:
      return "libertarian";
    case Baseline::kLiberalEgalitarian:
      return "liberal_egalitarian";
  }
  return "?";
}

Baseline baseline_from_name(std::string_view name) {
  for (auto b : {Baseline::kStrictEgalitarian, Baseline::kLibertarian, Baseline::kLiberalEgalitarian})
    if (baseline_name(b) == name) return b;
  throw std::invalid_argument("unknown baseline mechanism '" + std::string(name) + "'");
}

MechanismSpec mechanism_spec_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "manifold") {
      ManifoldParams p{j.at("v").get<double>(), j.at("w").get<double>()};
      p.validate();
      return ManifoldPoint{p};
    }
    if (kind == "named") return NamedBaseline{baseline_from_name(j.at("name").get<std::string>())};
    if (kind == "designer") return DesignerPolicy{j.at("weights_ref").get<std::string>()};
    throw std::invalid_argument("unknown mechanism kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed mechanism spec: ") + e.what());
  }
}

nlohmann::json to_json(const MechanismSpec& spec) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ManifoldPoint>) {
          return {{"kind", "manifold"}, {"v", s.params.v}, {"w", s.params.w}};
        } else if constexpr (std::is_same_v<T, NamedBaseline>) {
          return {{"kind", "named"}, {"name", baseline_name(s.baseline)}};
        } else {
          return {{"kind", "designer"}, {"weights_ref", s.weights_ref}};
        }
      },
      spec);
}

void validate_round(const PlayerVector& endowments, const PlayerVector& contributions) {
  for (std::size_t i = 0; i < kPlayers; ++i) {
    if (!(endowments[i] > 0)) throw DomainError("seat " + std::to_string(i) + " has a zero endowment");
    const double c = contributions[i];
    if (!std::isfinite(c) || c < 0) throw DomainError("seat " + std::to_string(i) + " has a negative contribution");
    if (c > endowments[i]) {
      throw DomainError("seat " + std::to_string(i) + " contributed " + std::to_string(c) + " above its endowment " +
                        std::to_string(endowments[i]));
    }
  }
}

PlayerVector manifold_payout(const ManifoldParams& p, const PlayerVector& e, const PlayerVector& c) {
  p.validate();
  validate_round(e, c);
  double total_c = 0.0;
  double total_rho = 0.0;
  PlayerVector rho{};
  for (std::size_t i = 0; i < kPlayers; ++i) {
    rho[i] = c[i] / e[i];
    total_c += c[i];
    total_rho += rho[i];
  }
  PlayerVector y{};
  if (total_c == 0.0) return y;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    const double y_abs = kGrowth * (p.w * c[i] + (1.0 - p.w) * (total_c - c[i]) / kOthers);
    const double y_rel =
        kGrowth * (total_c / total_rho) * (p.w * rho[i] + (1.0 - p.w) * (total_rho - rho[i]) / kOthers);
    y[i] = p.v * y_rel + (1.0 - p.v) * y_abs;
  }
  return y;
}

Jacobian manifold_jacobian(const ManifoldParams& p, const PlayerVector& e, const PlayerVector& c) {
  p.validate();
  validate_round(e, c);
  double total_c = 0.0;
  double total_rho = 0.0;
  PlayerVector rho{};
  for (std::size_t i = 0; i < kPlayers; ++i) {
    rho[i] = c[i] / e[i];
    total_c += c[i];
    total_rho += rho[i];
  }
  Jacobian jac{};
  for (std::size_t i = 0; i < kPlayers; ++i) {
    // Mixing weight applied to seat j's term in seat i's payout.
    const double share_mix = (1.0 - p.w) / kOthers;
    const double a_i = p.w * rho[i] + share_mix * (total_rho - rho[i]);
    for (std::size_t j = 0; j < kPlayers; ++j) {
      const double mix = i == j ? p.w : share_mix;
      const double d_abs = kGrowth * mix;
      double d_rel = 0.0;
      if (total_rho > 0.0) {
        const double d_ratio = 1.0 / total_rho - total_c / (total_rho * total_rho * e[j]);
        d_rel = kGrowth * (d_ratio * a_i + (total_c / total_rho) * mix / e[j]);
      }
      jac[i][j] = p.v * d_rel + (1.0 - p.v) * d_abs;
    }
  }
  return jac;
}

nn::Var manifold_payout(nn::Graph& graph, const ManifoldParams& p, const nn::Tensor& e, nn::Var c) {
  using namespace nn;
  if (e.shape() != c.shape() || e.cols() != kPlayers) throw ShapeError("manifold payout: e and c must be Bx4");
  Tensor inv_e(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!(e[i] > 0)) throw DomainError("manifold payout: zero endowment");
    inv_e[i] = 1.0 / e[i];
  }
  Var rho = c * graph.constant(std::move(inv_e));
  Var total_c = sum_cols(c);
  Var total_rho = sum_cols(rho);
  // Rows with an empty pool pay zero; keep the division finite there.
  Tensor empty(e.rows(), 1);
  for (std::size_t r = 0; r < e.rows(); ++r) empty[r] = total_rho.value()[r] == 0.0 ? 1.0 : 0.0;
  Var safe_rho = total_rho + graph.constant(std::move(empty));

  const double share_mix = (1.0 - p.w) / kOthers;
  Var y_abs = (c * p.w + (total_c - c) * share_mix) * kGrowth;
  Var y_rel = (total_c / safe_rho) * (rho * p.w + (total_rho - rho) * share_mix) * kGrowth;
  return y_rel * p.v + y_abs * (1.0 - p.v);
}

PlayerVector designer_payout(const designer::GraphNet& net, const PlayerVector& e, const PlayerVector& c) {
  validate_round(e, c);
  double total_c = 0.0;
  for (double x : c) total_c += x;
  PlayerVector y{};
  if (total_c == 0.0) return y;
  const PlayerVector weights = net.forward(designer::build_observation(e, c));
  for (std::size_t i = 0; i < kPlayers; ++i) y[i] = weights[i] * kGrowth * total_c;
  return y;
}

Jacobian Mechanism::jacobian(const PlayerVector& e, const PlayerVector& c) const {
  validate_round(e, c);
  nn::Graph g;
  nn::Var cv = g.leaf(row_tensor(c));
  nn::Var y = payouts(g, row_tensor(e), cv);
  Jacobian jac{};
  for (std::size_t i = 0; i < kPlayers; ++i) {
    g.zero_grad();
    nn::Tensor seed(1, kPlayers);
    seed[i] = 1.0;
    g.backward(y, seed);
    for (std::size_t j = 0; j < kPlayers; ++j) jac[i][j] = cv.grad()[j];
  }
  return jac;
}

Jacobian payout_jacobian(const Mechanism& mechanism, const PlayerVector& e, const PlayerVector& c) {
  return mechanism.jacobian(e, c);
}

ManifoldMechanism::ManifoldMechanism(ManifoldParams params, std::string alias)
    : params_(params), alias_(std::move(alias)) {
  params_.validate();
}

PlayerVector ManifoldMechanism::payouts(const PlayerVector& e, const PlayerVector& c) const {
  return manifold_payout(params_, e, c);
}

nn::Var ManifoldMechanism::payouts(nn::Graph& graph, const nn::Tensor& e, nn::Var c) const {
  return manifold_payout(graph, params_, e, c);
}

Jacobian ManifoldMechanism::jacobian(const PlayerVector& e, const PlayerVector& c) const {
  return manifold_jacobian(params_, e, c);
}

nlohmann::json ManifoldMechanism::to_json() const {
  if (!alias_.empty()) return {{"kind", "named"}, {"name", alias_}};
  return {{"kind", "manifold"}, {"v", params_.v}, {"w", params_.w}};
}

std::string ManifoldMechanism::name() const {
  if (!alias_.empty()) return alias_;
  char buf[64];
  std::snprintf(buf, sizeof buf, "v=%.3g,w=%.3g", params_.v, params_.w);
  return buf;
}

DesignerMechanism::DesignerMechanism(std::shared_ptr<const designer::GraphNet> net, std::string weights_ref)
    : net_(std::move(net)), weights_ref_(std::move(weights_ref)) {
  if (!net_) throw std::invalid_argument("designer mechanism needs a network");
}

PlayerVector DesignerMechanism::payouts(const PlayerVector& e, const PlayerVector& c) const {
  return designer_payout(*net_, e, c);
}

nn::Var DesignerMechanism::payouts(nn::Graph& graph, const nn::Tensor& e, nn::Var c) const {
  nn::Var weights = net_->forward(nn::bind_frozen(graph, net_->params()), designer::build_observation(graph, e, c));
  return weights * (nn::sum_cols(c) * kGrowth);
}

nlohmann::json DesignerMechanism::to_json() const { return {{"kind", "designer"}, {"weights_ref", weights_ref_}}; }

std::string DesignerMechanism::name() const { return weights_ref_.empty() ? "designer" : "designer:" + weights_ref_; }

FixedSplitMechanism::FixedSplitMechanism(const PlayerVector& weights) : weights_(weights) {
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw DomainError("split weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("split weights must sum to 1, got " + std::to_string(total));
}

PlayerVector FixedSplitMechanism::payouts(const PlayerVector& e, const PlayerVector& c) const {
  validate_round(e, c);
  double total_c = 0.0;
  for (double x : c) total_c += x;
  PlayerVector y{};
  for (std::size_t i = 0; i < kPlayers; ++i) y[i] = weights_[i] * kGrowth * total_c;
  return y;
}

nn::Var FixedSplitMechanism::payouts(nn::Graph& graph, const nn::Tensor&, nn::Var c) const {
  return graph.constant(row_tensor(weights_)) * (nn::sum_cols(c) * kGrowth);
}

nlohmann::json FixedSplitMechanism::to_json() const { return {{"kind", "fixed_split"}, {"weights", weights_}}; }

MechanismPtr make_manifold(double v, double w) { return std::make_shared<ManifoldMechanism>(ManifoldParams{v, w}); }

MechanismPtr make_baseline(Baseline baseline) {
  return std::make_shared<ManifoldMechanism>(baseline_params(baseline), std::string(baseline_name(baseline)));
}

MechanismPtr no_referee() { return make_baseline(Baseline::kStrictEgalitarian); }

MechanismPtr make_mechanism(const MechanismSpec& spec, const std::filesystem::path& base_dir) {
  return std::visit(
      [&](const auto& s) -> MechanismPtr {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ManifoldPoint>) {
          return std::make_shared<ManifoldMechanism>(s.params);
        } else if constexpr (std::is_same_v<T, NamedBaseline>) {
          return make_baseline(s.baseline);
        } else {
          std::filesystem::path path(s.weights_ref);
          if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
          std::ifstream in(path);
          if (!in) throw std::invalid_argument("cannot open designer weights " + path.string());
          nlohmann::json doc;
          try {
            in >> doc;
          } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("designer weights " + path.string() + " are not JSON: " + e.what());
          }
          auto net = std::make_shared<const designer::GraphNet>(designer::GraphNet::from_json(doc));
          return std::make_shared<DesignerMechanism>(std::move(net), s.weights_ref);
        }
      },
      spec);
}

MechanismPtr make_mechanism(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  return make_mechanism(mechanism_spec_from_json(spec), base_dir);
}

}  // namespace redist

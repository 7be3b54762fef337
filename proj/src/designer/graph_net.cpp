#include "redist/designer/graph_net.hpp"

#include <vector>

namespace redist::designer {

namespace {

constexpr const char* kLayers[] = {"gn1.edge", "gn1.vertex", "gn1.global", "gn2.edge", "gn2.vertex"};

struct Indices {
  std::vector<std::size_t> sender;    // per edge row: node row of the sender
  std::vector<std::size_t> receiver;  // per edge row: node row of the receiver
  std::vector<std::size_t> edge_graph;
  std::vector<std::size_t> node_graph;
};

Indices make_indices(std::size_t batch) {
  Indices ix;
  const auto& edges = edge_list();
  ix.sender.reserve(batch * kEdges);
  for (std::size_t b = 0; b < batch; ++b) {
    for (const auto& [s, r] : edges) {
      ix.sender.push_back(b * kPlayers + static_cast<std::size_t>(s));
      ix.receiver.push_back(b * kPlayers + static_cast<std::size_t>(r));
      ix.edge_graph.push_back(b);
    }
    for (int k = 0; k < kPlayers; ++k) ix.node_graph.push_back(b);
  }
  return ix;
}

}  // namespace

const std::array<std::pair<int, int>, kEdges>& edge_list() {
  static const auto edges = [] {
    std::array<std::pair<int, int>, kEdges> out{};
    std::size_t n = 0;
    for (int r = 0; r < kPlayers; ++r)
      for (int s = 0; s < kPlayers; ++s)
        if (s != r) out[n++] = {s, r};
    return out;
  }();
  return edges;
}

DesignerObservation build_observation(const PlayerVector& endowments, const PlayerVector& contributions) {
  DesignerObservation obs;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    const double e = endowments[i];
    if (e <= 0) throw DomainError("designer observation: zero endowment in seat " + std::to_string(i));
    const double c = contributions[i];
    obs.nodes[i] = {e / 10.0, c / 10.0, c / e};
  }
  return obs;
}

nn::Var build_observation(nn::Graph& graph, const nn::Tensor& endowments, nn::Var contributions) {
  using namespace nn;
  if (endowments.shape() != contributions.shape() || endowments.cols() != kPlayers) {
    throw ShapeError("designer observation: endowments and contributions must both be Bx4");
  }
  for (double e : endowments.data())
    if (e <= 0) throw DomainError("designer observation: zero endowment");
  const std::size_t batch = endowments.rows();
  Tensor inv_e(batch, kPlayers);
  Tensor e_scaled(batch * kPlayers, 1);
  for (std::size_t i = 0; i < endowments.size(); ++i) {
    inv_e[i] = 1.0 / endowments[i];
    e_scaled[i] = endowments[i] / 10.0;
  }
  Var c_col = reshape(contributions, batch * kPlayers, 1);
  Var rho_col = reshape(contributions * graph.constant(std::move(inv_e)), batch * kPlayers, 1);
  const Var parts[] = {graph.constant(std::move(e_scaled)), c_col * 0.1, rho_col};
  return concat_cols(parts);
}

GraphNet::GraphNet(nn::ParamSet params) : params_(std::move(params)) {
  try {
    edge1_ = nn::Linear::attach(params_, kLayers[0]);
    vertex1_ = nn::Linear::attach(params_, kLayers[1]);
    global1_ = nn::Linear::attach(params_, kLayers[2]);
    edge2_ = nn::Linear::attach(params_, kLayers[3]);
    vertex2_ = nn::Linear::attach(params_, kLayers[4]);
  } catch (const std::exception& e) {
    throw nn::FormatError(std::string("graph net: ") + e.what());
  }
  const auto expect = [](const nn::Linear& l, std::size_t in, std::size_t out, const char* name) {
    if (l.in != in || l.out != out) throw nn::FormatError(std::string("graph net: layer ") + name + " mis-shaped");
  };
  expect(edge1_, 2 * kNodeFeatures, kLatent, kLayers[0]);
  expect(vertex1_, kLatent + kNodeFeatures, kLatent, kLayers[1]);
  expect(global1_, 2 * kLatent, kLatent, kLayers[2]);
  expect(edge2_, 4 * kLatent, kLatent, kLayers[3]);
  expect(vertex2_, 3 * kLatent, 1, kLayers[4]);
}

GraphNet GraphNet::create(Rng& rng) {
  nn::ParamSet p;
  nn::Linear::create(p, kLayers[0], 2 * kNodeFeatures, kLatent, rng);
  nn::Linear::create(p, kLayers[1], kLatent + kNodeFeatures, kLatent, rng);
  nn::Linear::create(p, kLayers[2], 2 * kLatent, kLatent, rng);
  nn::Linear::create(p, kLayers[3], 4 * kLatent, kLatent, rng);
  nn::Linear::create(p, kLayers[4], 3 * kLatent, 1, rng);
  return GraphNet(std::move(p));
}

GraphNet GraphNet::zeros() {
  Rng rng(0);
  GraphNet net = create(rng);
  for (std::size_t i = 0; i < net.params_.size(); ++i) net.params_[i].value.fill(0.0);
  return net;
}

GraphNet GraphNet::from_params(nn::ParamSet params) { return GraphNet(std::move(params)); }

GraphNet GraphNet::from_json(const nlohmann::json& doc) {
  return GraphNet(nn::weights_from_json(doc, kPolicyTypeTag));
}

nlohmann::json GraphNet::to_json() const { return nn::weights_to_json(params_, kPolicyTypeTag); }

nn::Var GraphNet::forward(const nn::BoundParams& bound, nn::Var nodes) const {
  using namespace nn;
  if (nodes.cols() != kNodeFeatures || nodes.rows() % kPlayers != 0) {
    throw ShapeError("graph net: node features must be (4B)x3, got " + nodes.shape().str());
  }
  const std::size_t batch = nodes.rows() / kPlayers;
  const std::size_t n_nodes = nodes.rows();
  const Indices ix = make_indices(batch);

  // First graph network: edges see (sender, receiver); no edge/global inputs.
  const Var e1_in[] = {gather_rows(nodes, ix.sender), gather_rows(nodes, ix.receiver)};
  Var e1 = tanh(edge1_(bound, concat_cols(e1_in)));
  const Var v1_in[] = {scatter_add_rows(e1, ix.receiver, n_nodes), nodes};
  Var v1 = tanh(vertex1_(bound, concat_cols(v1_in)));
  const Var u1_in[] = {scatter_add_rows(e1, ix.edge_graph, batch), scatter_add_rows(v1, ix.node_graph, batch)};
  Var u1 = tanh(global1_(bound, concat_cols(u1_in)));

  // Second graph network: no global update. The edge map is linear in the
  // concatenation (e, v_s, v_r, u), so the vertex and global blocks are projected
  // once per vertex/graph and then gathered onto edges.
  const Var w2 = bound[edge2_.weight];
  Var e2 = tanh(matmul_nt(e1, slice_cols(w2, 0, kLatent)) +
                gather_rows(matmul_nt(v1, slice_cols(w2, kLatent, kLatent)), ix.sender) +
                gather_rows(matmul_nt(v1, slice_cols(w2, 2 * kLatent, kLatent)), ix.receiver) +
                gather_rows(linear(u1, slice_cols(w2, 3 * kLatent, kLatent), bound[edge2_.bias]), ix.edge_graph));
  const Var v2_in[] = {scatter_add_rows(e2, ix.receiver, n_nodes), v1, gather_rows(u1, ix.node_graph)};
  Var scores = vertex2_(bound, concat_cols(v2_in));

  return masked_softmax(reshape(scores, batch, kPlayers), Tensor(batch, kPlayers, 1.0));
}

PlayerVector GraphNet::forward(const DesignerObservation& obs) const {
  nn::Graph g;
  nn::Tensor nodes(kPlayers, kNodeFeatures);
  for (std::size_t k = 0; k < kPlayers; ++k)
    for (std::size_t f = 0; f < kNodeFeatures; ++f) nodes(k, f) = obs.nodes[k][f];
  const nn::Tensor& w = forward(nn::bind_frozen(g, params_), g.constant(std::move(nodes))).value();
  return {w[0], w[1], w[2], w[3]};
}

}  // namespace redist::designer

#include "redist/nn/graph.hpp"

namespace redist::nn {

Var Graph::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.graph() != this) throw ShapeError("graph: operands belong to different graphs");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::grad(std::size_t id) const { return grad_buffer(id); }

Tensor& Graph::grad_buffer(std::size_t id) const {
  const Node& node = nodes_[id];
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.rows(), node.value.cols());
  return node.grad;
}

void Graph::accumulate(std::size_t id, const Tensor& delta) {
  if (!nodes_[id].requires_grad) return;
  grad_buffer(id) += delta;
}

void Graph::backward(Var root) {
  if (root.value().size() != 1) throw ShapeError("backward: root must be scalar, got " + root.shape().str());
  backward(root, Tensor::scalar(1.0));
}

void Graph::backward(Var root, const Tensor& seed) {
  if (seed.shape() != root.shape()) throw ShapeError("backward: seed shape mismatch");
  if (!nodes_[root.id()].requires_grad) return;
  grad_buffer(root.id()) += seed;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward) continue;
    if (node.grad.shape() != node.value.shape()) continue;  // never reached from root
    node.backward(*this, i);
  }
}

void Graph::zero_grad() {
  for (Node& node : nodes_) node.grad = Tensor();
}

}  // namespace redist::nn

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "redist/nn/tensor.hpp"

namespace redist::nn {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape. Built per forward pass and discarded after
/// backward. Nodes are appended in creation order, so reverse creation order is a
/// valid reverse topological order and backward visits each node once.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }

  /// Seeds d(root)/d(root) = 1 and propagates. Root must be 1×1.
  void backward(Var root);
  void backward(Var root, const Tensor& seed);
  void zero_grad();

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `delta` into the gradient of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& delta);
  /// Mutable gradient buffer, allocated on first use.
  Tensor& grad_buffer(std::size_t id) const;

 private:
  struct Node {
    Tensor value;
    mutable Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }
inline const Tensor& Var::grad() const { return graph_->grad(id_); }

}  // namespace redist::nn

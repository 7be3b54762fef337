#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "redist/nn/graph.hpp"
#include "redist/nn/tensor.hpp"
#include "redist/rng.hpp"

namespace redist::nn {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered, named collection of parameter tensors. A value type: copying a model
/// copies its weights.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  const Tensor& value(std::string_view name) const { return params_[index_of(name)].value; }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const;
  double squared_norm() const;
  bool operator==(const ParamSet& other) const;

 private:
  std::vector<Parameter> params_;
};

/// Parameters entered into a graph, one node per ParamSet entry.
struct BoundParams {
  std::vector<Var> vars;

  const Var& operator[](std::size_t i) const { return vars[i]; }
  /// Gradients of every bound parameter after Graph::backward.
  std::vector<Tensor> grads() const;
};

/// Binds as differentiable leaves.
BoundParams bind(Graph& graph, const ParamSet& params);
/// Binds as constants: gradients flow through the ops but not into the weights.
BoundParams bind_frozen(Graph& graph, const ParamSet& params);

/// Uniform in ±sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// Versioned weight document: {format_version, type, layers:[{name, shape, values}]}.
inline constexpr int kWeightsFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json weights_to_json(const ParamSet& params, std::string_view type_tag);
/// Throws FormatError on a version or type mismatch or a malformed layer.
ParamSet weights_from_json(const nlohmann::json& doc, std::string_view expected_type);

}  // namespace redist::nn

#include "redist/nn/params.hpp"

#include <algorithm>
#include <cmath>

namespace redist::nn {

std::size_t ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double v : p.value.data()) s += v * v;
  return s;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape() || a.value.values() != b.value.values()) return false;
  }
  return true;
}

std::vector<Tensor> BoundParams::grads() const {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const Var& v : vars) out.push_back(v.grad());
  return out;
}

BoundParams bind(Graph& graph, const ParamSet& params) {
  BoundParams b;
  b.vars.reserve(params.size());
  for (const auto& p : params) b.vars.push_back(graph.leaf(p.value));
  return b;
}

BoundParams bind_frozen(Graph& graph, const ParamSet& params) {
  BoundParams b;
  b.vars.reserve(params.size());
  for (const auto& p : params) b.vars.push_back(graph.constant(p.value));
  return b;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

nlohmann::json weights_to_json(const ParamSet& params, std::string_view type_tag) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& p : params) {
    layers.push_back({{"name", p.name},
                      {"shape", {p.value.rows(), p.value.cols()}},
                      {"values", p.value.values()}});
  }
  return {{"format_version", kWeightsFormatVersion}, {"type", type_tag}, {"layers", std::move(layers)}};
}

ParamSet weights_from_json(const nlohmann::json& doc, std::string_view expected_type) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kWeightsFormatVersion) {
      throw FormatError("unsupported weights format_version " + std::to_string(version));
    }
    const auto type = doc.at("type").get<std::string>();
    if (type != expected_type) {
      throw FormatError("weights document has type '" + type + "', expected '" + std::string(expected_type) + "'");
    }
    ParamSet params;
    for (const auto& layer : doc.at("layers")) {
      const auto shape = layer.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw FormatError("layer shape must have two dimensions");
      params.add(layer.at("name").get<std::string>(),
                 Tensor(shape[0], shape[1], layer.at("values").get<std::vector<double>>()));
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed weights document: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("malformed weights document: ") + e.what());
  }
}

}  // namespace redist::nn

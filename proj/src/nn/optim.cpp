#include "redist/nn/optim.hpp"

#include <cmath>

namespace redist::nn {

namespace {

std::vector<Tensor> zeros_like(const ParamSet& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.value.rows(), p.value.cols());
  return out;
}

void check_grads(const ParamSet& params, std::span<const Tensor> grads, std::size_t state_size) {
  if (grads.size() != params.size() || state_size != params.size()) {
    throw ShapeError("optimizer: expected " + std::to_string(params.size()) + " gradients, got " +
                     std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("optimizer: gradient for " + params[i].name + " has shape " + grads[i].shape().str());
    }
    if (!grads[i].all_finite()) throw NonFiniteGradient(params[i].name);
  }
}

}  // namespace

Adam::Adam(AdamConfig config, const ParamSet& params)
    : config_(config), first_(zeros_like(params)), second_(zeros_like(params)) {}

void Adam::step(ParamSet& params, std::span<const Tensor> grads) {
  check_grads(params, grads, first_.size());
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    auto m = first_[i].data();
    auto v = second_[i].data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

RmsProp::RmsProp(RmsPropConfig config, const ParamSet& params) : config_(config), mean_square_(zeros_like(params)) {}

void RmsProp::step(ParamSet& params, std::span<const Tensor> grads) {
  check_grads(params, grads, mean_square_.size());
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    auto ms = mean_square_[i].data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      ms[j] = config_.decay * ms[j] + (1.0 - config_.decay) * g[j] * g[j];
      w[j] -= config_.learning_rate * g[j] / std::sqrt(ms[j] + config_.epsilon);
    }
  }
}

}  // namespace redist::nn

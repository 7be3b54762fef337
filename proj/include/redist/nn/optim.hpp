#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "redist/nn/params.hpp"

namespace redist::nn {

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(const std::string& parameter)
      : std::runtime_error("non-finite gradient for parameter " + parameter), parameter_(parameter) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

struct AdamConfig {
  double learning_rate = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Minimizes: params -= lr·m̂/(√v̂ + ε).
class Adam {
 public:
  Adam(AdamConfig config, const ParamSet& params);

  void step(ParamSet& params, std::span<const Tensor> grads);
  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

struct RmsPropConfig {
  double learning_rate = 4e-4;
  double decay = 0.99;
  double epsilon = 1e-5;
};

/// RMSProp without momentum: ms = ρ·ms + (1−ρ)g², params -= lr·g/√(ms + ε).
class RmsProp {
 public:
  RmsProp(RmsPropConfig config, const ParamSet& params);

  void step(ParamSet& params, std::span<const Tensor> grads);
  std::int64_t steps() const { return steps_; }
  const RmsPropConfig& config() const { return config_; }

 private:
  RmsPropConfig config_;
  std::int64_t steps_ = 0;
  std::vector<Tensor> mean_square_;
};

}  // namespace redist::nn

#pragma once

#include <cmath>

#include "redist/nn/tensor.hpp"
#include "redist/rng.hpp"

namespace testing {

inline redist::nn::Tensor random_tensor(std::size_t rows, std::size_t cols, redist::Rng& rng, double lo = -1.0,
                                        double hi = 1.0) {
  redist::nn::Tensor t(rows, cols);
  for (auto& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const redist::nn::Tensor& a, const redist::nn::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace testing

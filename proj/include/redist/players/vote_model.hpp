#pragma once

#include <cmath>

namespace redist {

/// Logistic vote on the difference of summed relative payouts.
struct VoteModel {
  double slope = 1.4;

  /// Probability of voting for A rather than B.
  double probability(double rpay_a, double rpay_b) const {
    const double x = slope * (rpay_a - rpay_b);
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double ex = std::exp(x);
    return ex / (1.0 + ex);
  }
};

inline double vote_probability(double rpay_a, double rpay_b, double slope = 1.4) {
  return VoteModel{slope}.probability(rpay_a, rpay_b);
}

}  // namespace redist

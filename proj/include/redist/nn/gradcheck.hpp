#pragma once

#include <functional>

#include "redist/nn/graph.hpp"

namespace redist::nn {

/// Scalar function of one input tensor, built on a fresh graph.
using ScalarFn = std::function<Var(Graph&, Var)>;

/// Max over coordinates of |analytic − central difference| / (|central difference| + 1e-8).
/// Throws std::domain_error if f is non-finite anywhere it is evaluated.
double finite_difference_check(const ScalarFn& f, const Tensor& point, double eps = 1e-5);

/// Analytic gradient of f at `point` via one backward pass.
Tensor gradient(const ScalarFn& f, const Tensor& point);

}  // namespace redist::nn

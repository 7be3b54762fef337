#include "redist/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace redist::nn {

namespace {

double evaluate(const ScalarFn& f, const Tensor& point) {
  Graph g;
  const double value = f(g, g.constant(point)).value().item();
  if (!std::isfinite(value)) throw std::domain_error("finite_difference_check: function is not finite");
  return value;
}

}  // namespace

Tensor gradient(const ScalarFn& f, const Tensor& point) {
  Graph g;
  Var x = g.leaf(point);
  Var y = f(g, x);
  if (!std::isfinite(y.value().item())) throw std::domain_error("gradient: function is not finite");
  g.backward(y);
  return x.grad();
}

double finite_difference_check(const ScalarFn& f, const Tensor& point, double eps) {
  const Tensor analytic = gradient(f, point);
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = evaluate(f, probe);
    probe[i] = point[i] - eps;
    const double down = evaluate(f, probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / (std::abs(numeric) + 1e-8));
  }
  return worst;
}

}  // namespace redist::nn

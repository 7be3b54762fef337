#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "redist/nn/gradcheck.hpp"
#include "redist/nn/layers.hpp"
#include "redist/nn/ops.hpp"
#include "redist/nn/optim.hpp"
#include "redist/nn/params.hpp"

using namespace redist;
using namespace redist::nn;
using testing::random_tensor;

namespace {

constexpr double kGradTolerance = 1e-4;

// Reduces a tensor-valued expression to a scalar with fixed random weights so
// every output coordinate contributes to the check.
Var weighted_sum(Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(y * y.graph().constant(random_tensor(y.rows(), y.cols(), rng)));
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("linear forward examples") {
    Graph g;
    const auto run = [&](Tensor x, Tensor w, Tensor b) { return linear_forward(g.constant(x), g.constant(w), g.constant(b)).value(); };
    const Tensor zero = run(Tensor::row({0, 0}), Tensor{{3, -1}, {2, 5}}, Tensor::row({1, 2}));
    CHECK(zero[0] == 1.0);
    CHECK(zero[1] == 2.0);
    const Tensor id = run(Tensor::row({1, 0}), Tensor{{1, 0}, {0, 1}}, Tensor::row({0, 0}));
    CHECK(id[0] == 1.0);
    CHECK(id[1] == 0.0);
    const Tensor mm = run(Tensor::row({1, 2}), Tensor{{1, 1}, {0, 1}}, Tensor::row({0, 0}));
    CHECK(mm[0] == 3.0);
    CHECK(mm[1] == 2.0);
    CHECK_THROWS_AS(run(Tensor::row({1, 2, 3}), Tensor{{1, 1}, {0, 1}}, Tensor::row({0, 0})), ShapeError);
  }

  TEST_CASE("elementwise ops match finite differences") {
    Rng rng(1);
    const Tensor other = random_tensor(3, 4, rng, 0.5, 1.5);
    const Tensor row = random_tensor(1, 4, rng, 0.5, 1.5);
    const Tensor col = random_tensor(3, 1, rng, 0.5, 1.5);
    const Tensor point = random_tensor(3, 4, rng, 0.2, 1.2);
    const std::vector<std::pair<const char*, ScalarFn>> fns = {
        {"add", [&](Graph& g, Var x) { return weighted_sum(x + g.constant(other)); }},
        {"sub row", [&](Graph& g, Var x) { return weighted_sum(x - g.constant(row)); }},
        {"mul col", [&](Graph& g, Var x) { return weighted_sum(x * g.constant(col)); }},
        {"div", [&](Graph& g, Var x) { return weighted_sum(g.constant(other) / x); }},
        {"div self", [&](Graph&, Var x) { return weighted_sum(x / (x + 1.0)); }},
        {"tanh", [&](Graph&, Var x) { return weighted_sum(tanh(3.0 * x + (-1.5))); }},
        {"sigmoid", [&](Graph&, Var x) { return weighted_sum(sigmoid(x)); }},
        {"exp", [&](Graph&, Var x) { return weighted_sum(exp(x)); }},
        {"log", [&](Graph&, Var x) { return weighted_sum(log(x)); }},
        {"square", [&](Graph&, Var x) { return weighted_sum(square(x)); }},
        {"neg", [&](Graph&, Var x) { return weighted_sum(-x); }},
        {"mean", [&](Graph&, Var x) { return mean(square(x)); }},
        {"sum_cols", [&](Graph&, Var x) { return weighted_sum(square(sum_cols(x))); }},
        {"sum_rows", [&](Graph&, Var x) { return weighted_sum(square(sum_rows(x))); }},
    };
    for (const auto& [name, f] : fns) {
      CAPTURE(name);
      CHECK(finite_difference_check(f, point) < kGradTolerance);
    }
  }

  TEST_CASE("matrix and indexing ops match finite differences") {
    Rng rng(2);
    const Tensor w = random_tensor(5, 4, rng);
    const Tensor b = random_tensor(1, 5, rng);
    const Tensor right = random_tensor(4, 2, rng);
    const Tensor point = random_tensor(3, 4, rng);
    const std::vector<std::size_t> rows = {2, 0, 2, 1};
    const std::vector<std::size_t> cols = {3, 3, 0};
    const std::vector<std::size_t> picks = {1, 3, 0};
    const std::vector<std::pair<const char*, ScalarFn>> fns = {
        {"matmul", [&](Graph& g, Var x) { return weighted_sum(matmul(x, g.constant(right))); }},
        {"matmul_nt", [&](Graph& g, Var x) { return weighted_sum(matmul_nt(x, g.constant(w))); }},
        {"matmul_nt rhs", [&](Graph& g, Var x) { return weighted_sum(matmul_nt(g.constant(w), x)); }},
        {"linear", [&](Graph& g, Var x) { return weighted_sum(tanh(linear(x, g.constant(w), g.constant(b)))); }},
        {"slice", [&](Graph&, Var x) { return weighted_sum(square(slice_cols(x, 1, 2))); }},
        {"concat_cols",
         [&](Graph&, Var x) {
           const std::array<Var, 2> parts{x, square(x)};
           return weighted_sum(concat_cols(parts));
         }},
        {"concat_rows",
         [&](Graph&, Var x) {
           const std::array<Var, 2> parts{x, square(x)};
           return weighted_sum(concat_rows(parts));
         }},
        {"gather_rows", [&](Graph&, Var x) { return weighted_sum(square(gather_rows(x, rows))); }},
        {"scatter_add_rows", [&](Graph&, Var x) { return weighted_sum(square(scatter_add_rows(x, {std::vector<std::size_t>{1, 1, 0}}, 2))); }},
        {"gather_cols", [&](Graph&, Var x) { return weighted_sum(square(gather_cols(x, cols))); }},
        {"reshape", [&](Graph&, Var x) { return weighted_sum(square(reshape(x, 2, 6))); }},
        {"pick", [&](Graph&, Var x) { return weighted_sum(square(pick(x, picks))); }},
    };
    for (const auto& [name, f] : fns) {
      CAPTURE(name);
      CHECK(finite_difference_check(f, point) < kGradTolerance);
    }
  }

  TEST_CASE("masked softmax") {
    Graph g;
    const Tensor mask{{1, 1, 0}, {0, 1, 1}};
    const Var p = masked_softmax(g.constant(Tensor{{1.0, 2.0, 50.0}, {-50.0, 0.0, 0.0}}), mask);
    CHECK(p.value()(0, 2) == 0.0);
    CHECK(p.value()(1, 0) == 0.0);
    CHECK(p.value()(0, 0) + p.value()(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.value()(0, 1) == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))).epsilon(1e-14));
    CHECK(p.value()(1, 1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(masked_softmax(g.constant(Tensor{{1.0, 2.0}}), Tensor{{0, 0}}), InvalidMask);

    Rng rng(3);
    const Tensor point = random_tensor(2, 3, rng);
    CHECK(finite_difference_check([&](Graph&, Var x) { return weighted_sum(masked_softmax(x, mask)); }, point) <
          kGradTolerance);
    CHECK(finite_difference_check(
              [&](Graph& gg, Var x) {
                return sum(masked_log_softmax(x, mask) * gg.constant(Tensor{{0.3, 0.7, 0.0}, {0.0, 0.2, -1.0}}));
              },
              point) < kGradTolerance);
  }

  TEST_CASE("a node reached along two paths accumulates both gradients") {
    Graph g;
    Var x = g.leaf(Tensor::scalar(3.0));
    Var a = x * 2.0;
    Var b = square(x);
    g.backward(a + b + a * b);  // d/dx = 2 + 2x + (2x² + 2x·2x)' = 2 + 6 + 6x² = 62
    CHECK(x.grad().item() == doctest::Approx(62.0));
  }

  TEST_CASE("lstm step by hand and by finite differences") {
    // Hidden size 1, input size 1: gates are scalars.
    Graph g;
    const double xin = 0.5;
    const Tensor w_ih{{0.1}, {0.2}, {0.3}, {0.4}};
    const Tensor w_hh{{-0.1}, {0.05}, {0.2}, {-0.3}};
    const Tensor bias = Tensor::row({0.0, 1.0, 0.0, 0.0});
    const double h0 = 0.25;
    const double c0 = -0.5;
    const LstmState out = lstm_step(g.constant(Tensor::scalar(xin)),
                                    {g.constant(Tensor::scalar(h0)), g.constant(Tensor::scalar(c0))}, g.constant(w_ih),
                                    g.constant(w_hh), g.constant(bias));
    const auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double i = sig(0.1 * xin - 0.1 * h0);
    const double f = sig(0.2 * xin + 1.0 + 0.05 * h0);
    const double o = sig(0.3 * xin + 0.2 * h0);
    const double cand = std::tanh(0.4 * xin - 0.3 * h0);
    const double c = f * c0 + i * cand;
    CHECK(out.c.value().item() == doctest::Approx(c).epsilon(1e-13));
    CHECK(out.h.value().item() == doctest::Approx(o * std::tanh(c)).epsilon(1e-13));

    Rng rng(4);
    ParamSet params;
    const Lstm lstm = Lstm::create(params, "lstm", 3, 5, rng);
    const Tensor point = random_tensor(2, 3, rng);
    const Tensor h_init = random_tensor(2, 5, rng);
    const auto through_two_steps = [&](Graph& gg, Var x) {
      const BoundParams p = bind_frozen(gg, params);
      LstmState s{gg.constant(h_init), gg.constant(random_tensor(2, 5, rng = Rng(8)))};
      s = lstm.step(p, x, s);
      s = lstm.step(p, square(x), s);
      return weighted_sum(s.h) + weighted_sum(s.c, 5);
    };
    CHECK(finite_difference_check(through_two_steps, point) < kGradTolerance);
  }

  TEST_CASE("stop_gradient blocks the backward pass") {
    Graph g;
    Var x = g.leaf(Tensor::scalar(2.0));
    g.backward(square(x) + stop_gradient(square(x)) * x);
    CHECK(x.grad().item() == doctest::Approx(4.0 + 4.0));
  }

  TEST_CASE("adam first step moves each weight by the learning rate") {
    ParamSet params;
    params.add("w", Tensor::row({1.0, -2.0, 0.5}));
    Adam adam({0.1, 0.9, 0.999, 1e-8}, params);
    const std::vector<Tensor> grads = {Tensor::row({0.3, -4.0, 1e-3})};
    adam.step(params, grads);
    // m̂ = g and v̂ = g² after bias correction, so Δ = −lr·g/(|g| + ε).
    const Tensor& w = params.value("w");
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(0.5 - 0.1 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
    CHECK(adam.steps() == 1);
  }

  TEST_CASE("rmsprop two steps by hand") {
    ParamSet params;
    params.add("w", Tensor::row({1.0}));
    RmsProp opt({4e-4, 0.99, 1e-5}, params);
    double ms = 0.0;
    double w = 1.0;
    for (double grad : {0.5, -0.2}) {
      opt.step(params, std::vector<Tensor>{Tensor::row({grad})});
      ms = 0.99 * ms + 0.01 * grad * grad;
      w -= 4e-4 * grad / std::sqrt(ms + 1e-5);
    }
    CHECK(params.value("w")[0] == doctest::Approx(w).epsilon(1e-14));
  }

  TEST_CASE("optimizers reject non-finite gradients") {
    ParamSet params;
    params.add("w", Tensor::row({1.0}));
    Adam adam({}, params);
    CHECK_THROWS_AS(adam.step(params, std::vector<Tensor>{Tensor::row({std::nan("")})}), NonFiniteGradient);
  }

  TEST_CASE("weights round-trip through JSON") {
    Rng rng(5);
    ParamSet params;
    Linear::create(params, "layer", 3, 2, rng);
    const auto doc = weights_to_json(params, "thing");
    CHECK(weights_from_json(doc, "thing") == params);
    CHECK_THROWS_AS(weights_from_json(doc, "other"), FormatError);
    auto bad = doc;
    bad["format_version"] = 99;
    CHECK_THROWS_AS(weights_from_json(bad, "thing"), FormatError);
  }
}

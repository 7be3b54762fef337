#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "redist/nn/ops.hpp"
#include "redist/nn/params.hpp"

namespace redist::nn {

/// y = x·Wᵀ + b for each row of x. Records the graph edge.
Var linear_forward(Var x, Var weight, Var bias);

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM cell update. Gate blocks in w_ih/w_hh/bias are ordered
/// input, forget, output, candidate; each is `hidden` rows/columns wide.
LstmState lstm_step(Var x, const LstmState& state, Var w_ih, Var w_hh, Var bias);

/// Index handles of a linear layer's weights inside a ParamSet.
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParamSet& params, std::string_view name, std::size_t in, std::size_t out, Rng& rng);
  /// Re-attaches to weights named `<name>.weight`/`<name>.bias` (e.g. after loading).
  static Linear attach(const ParamSet& params, std::string_view name);

  Var operator()(const BoundParams& p, Var x) const { return linear_forward(x, p[weight], p[bias]); }
};

/// LSTM layer parameters (hidden size fixed per model).
struct Lstm {
  std::size_t w_ih = 0;
  std::size_t w_hh = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t hidden = 0;

  static Lstm create(ParamSet& params, std::string_view name, std::size_t in, std::size_t hidden, Rng& rng);
  static Lstm attach(const ParamSet& params, std::string_view name);

  LstmState initial_state(Graph& graph, std::size_t batch) const;
  LstmState step(const BoundParams& p, Var x, const LstmState& state) const {
    return lstm_step(x, state, p[w_ih], p[w_hh], p[bias]);
  }
};

}  // namespace redist::nn

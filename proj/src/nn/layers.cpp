#include "redist/nn/layers.hpp"

namespace redist::nn {

Var linear_forward(Var x, Var weight, Var bias) { return linear(x, weight, bias); }

LstmState lstm_step(Var x, const LstmState& state, Var w_ih, Var w_hh, Var bias) {
  const std::size_t hidden = w_hh.cols();
  if (w_ih.rows() != 4 * hidden || w_hh.rows() != 4 * hidden || bias.cols() != 4 * hidden) {
    throw ShapeError("lstm_step: gate blocks disagree on hidden size " + std::to_string(hidden));
  }
  if (state.h.cols() != hidden || state.c.cols() != hidden) {
    throw ShapeError("lstm_step: state " + state.h.shape().str() + " does not match hidden size " +
                     std::to_string(hidden));
  }
  if (x.rows() != state.h.rows()) throw ShapeError("lstm_step: input and state batch sizes differ");

  Var gates = linear(x, w_ih, bias) + matmul_nt(state.h, w_hh);
  Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
  Var forget_gate = sigmoid(slice_cols(gates, hidden, hidden));
  Var out_gate = sigmoid(slice_cols(gates, 2 * hidden, hidden));
  Var candidate = tanh(slice_cols(gates, 3 * hidden, hidden));
  Var c = forget_gate * state.c + in_gate * candidate;
  Var h = out_gate * tanh(c);
  return {h, c};
}

Linear Linear::create(ParamSet& params, std::string_view name, std::size_t in, std::size_t out, Rng& rng) {
  const std::string base(name);
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = params.add(base + ".weight", glorot_uniform(out, in, rng));
  l.bias = params.add(base + ".bias", Tensor(1, out));
  return l;
}

Linear Linear::attach(const ParamSet& params, std::string_view name) {
  const std::string base(name);
  Linear l;
  l.weight = params.index_of(base + ".weight");
  l.bias = params.index_of(base + ".bias");
  l.out = params[l.weight].value.rows();
  l.in = params[l.weight].value.cols();
  if (params[l.bias].value.shape() != Shape{1, l.out}) throw ShapeError(base + ".bias has the wrong shape");
  return l;
}

Lstm Lstm::create(ParamSet& params, std::string_view name, std::size_t in, std::size_t hidden, Rng& rng) {
  const std::string base(name);
  Lstm l;
  l.in = in;
  l.hidden = hidden;
  l.w_ih = params.add(base + ".w_ih", glorot_uniform(4 * hidden, in, rng));
  l.w_hh = params.add(base + ".w_hh", glorot_uniform(4 * hidden, hidden, rng));
  l.bias = params.add(base + ".bias", Tensor(1, 4 * hidden));
  return l;
}

Lstm Lstm::attach(const ParamSet& params, std::string_view name) {
  const std::string base(name);
  Lstm l;
  l.w_ih = params.index_of(base + ".w_ih");
  l.w_hh = params.index_of(base + ".w_hh");
  l.bias = params.index_of(base + ".bias");
  l.hidden = params[l.w_hh].value.cols();
  l.in = params[l.w_ih].value.cols();
  if (params[l.w_ih].value.rows() != 4 * l.hidden || params[l.w_hh].value.rows() != 4 * l.hidden ||
      params[l.bias].value.shape() != Shape{1, 4 * l.hidden}) {
    throw ShapeError(base + ": gate blocks disagree on hidden size");
  }
  return l;
}

LstmState Lstm::initial_state(Graph& graph, std::size_t batch) const {
  return {graph.constant(Tensor(batch, hidden)), graph.constant(Tensor(batch, hidden))};
}

}  // namespace redist::nn

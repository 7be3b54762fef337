#include "redist/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace redist::nn {

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ShapeError(std::string(op) + ": cannot broadcast " + a.str() + " with " + b.str());
  };
  return {dim(a.rows, b.rows), dim(a.cols, b.cols)};
}

// Flat index into `s` for output coordinate (r, c) under broadcasting.
inline std::size_t bindex(const Shape& s, std::size_t r, std::size_t c) {
  return (s.rows == 1 ? 0 : r) * s.cols + (s.cols == 1 ? 0 : c);
}

// Sums a gradient of the broadcast shape back down to `target`.
Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor out(target.rows, target.cols);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) out[bindex(target, r, c)] += g(r, c);
  }
  return out;
}

// Applies f elementwise under broadcasting; da/db give the local partials.
template <class F, class DA, class DB>
Var binary(Var a, Var b, const char* name, F f, DA da, DB db) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(out_shape.rows, out_shape.cols);
  const bool same = av.shape() == out_shape && bv.shape() == out_shape;
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t r = 0; r < out_shape.rows; ++r)
      for (std::size_t c = 0; c < out_shape.cols; ++c)
        out(r, c) = f(av[bindex(av.shape(), r, c)], bv[bindex(bv.shape(), r, c)]);
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib, out_shape, da, db](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& x = g.value(ia);
    const Tensor& y = g.value(ib);
    const bool want_a = g.requires_grad(ia);
    const bool want_b = g.requires_grad(ib);
    Tensor ga(out_shape.rows, out_shape.cols);
    Tensor gb(out_shape.rows, out_shape.cols);
    for (std::size_t r = 0; r < out_shape.rows; ++r) {
      for (std::size_t c = 0; c < out_shape.cols; ++c) {
        const double xv = x[bindex(x.shape(), r, c)];
        const double yv = y[bindex(y.shape(), r, c)];
        const double gv = go(r, c);
        if (want_a) ga(r, c) = gv * da(xv, yv);
        if (want_b) gb(r, c) = gv * db(xv, yv);
      }
    }
    if (want_a) g.accumulate(ia, reduce_to(ga, x.shape()));
    if (want_b) g.accumulate(ib, reduce_to(gb, y.shape()));
  });
}

// Elementwise unary op; dfdx receives (input, output).
template <class F, class D>
Var unary(Var x, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, dfdx](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& in = g.value(ix);
    const Tensor& outv = g.value(self);
    Tensor gx(in.rows(), in.cols());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = go[i] * dfdx(in[i], outv[i]);
    g.accumulate(ix, gx);
  });
}

Var scalar_const(Graph& g, double s) { return g.constant(Tensor::scalar(s)); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// tanh through one exp call; libm's tanh is several times slower and dominates
// the graph-network forward pass. Absolute error stays within a few ulps of 1.
double fast_tanh(double x) {
  if (x == 0.0) return x;
  const double e = std::exp(-2.0 * std::abs(x));
  const double t = (1.0 - e) / (1.0 + e);
  return std::copysign(t, x);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator/(Var a, Var b) { return div(a, b); }
Var operator-(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}
Var operator*(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}
Var operator*(double s, Var a) { return a * s; }
Var operator+(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}
Var operator+(double s, Var a) { return a + s; }
Var operator-(double s, Var a) { return add(scalar_const(a.graph(), s), -a); }

Var tanh(Var x) {
  return unary(x, fast_tanh, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var matmul(Var a, Var b) {
  Tensor out = gemm(a.value(), false, b.value(), false);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(ia)) g.accumulate(ia, gemm(go, false, g.value(ib), true));
    if (g.requires_grad(ib)) g.accumulate(ib, gemm(g.value(ia), true, go, false));
  });
}

Var matmul_nt(Var a, Var b) {
  Tensor out = gemm(a.value(), false, b.value(), true);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(ia)) g.accumulate(ia, gemm(go, false, g.value(ib), false));
    if (g.requires_grad(ib)) g.accumulate(ib, gemm(go, true, g.value(ia), false));
  });
}

Var linear(Var x, Var weight, Var bias) {
  if (weight.cols() != x.cols()) {
    throw ShapeError("linear: input " + x.shape().str() + " does not match weight " + weight.shape().str());
  }
  if (bias.rows() != 1 || bias.cols() != weight.rows()) {
    throw ShapeError("linear: bias " + bias.shape().str() + " does not match weight " + weight.shape().str());
  }
  Tensor out = gemm(x.value(), false, weight.value(), true);
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  const std::size_t ix = x.id();
  const std::size_t iw = weight.id();
  const std::size_t ibias = bias.id();
  return x.graph().record(std::move(out), {x, weight, bias}, [ix, iw, ibias](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(ix)) g.accumulate(ix, gemm(go, false, g.value(iw), false));
    if (g.requires_grad(iw)) g.accumulate(iw, gemm(go, true, g.value(ix), false));
    if (g.requires_grad(ibias)) {
      Tensor gb(1, go.cols());
      for (std::size_t r = 0; r < go.rows(); ++r)
        for (std::size_t c = 0; c < go.cols(); ++c) gb[c] += go(r, c);
      g.accumulate(ibias, gb);
    }
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return x.graph().record(Tensor::scalar(total), {x}, [ix](Graph& g, std::size_t self) {
    const double go = g.grad(self).item();
    const Tensor& in = g.value(ix);
    g.accumulate(ix, Tensor(in.rows(), in.cols(), go));
  });
}

Var mean(Var x) {
  const auto n = static_cast<double>(x.value().size());
  return sum(x) * (1.0 / n);
}

Var sum_cols(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out[r] += xv(r, c);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& in = g.value(ix);
    Tensor gx(in.rows(), in.cols());
    for (std::size_t r = 0; r < in.rows(); ++r)
      for (std::size_t c = 0; c < in.cols(); ++c) gx(r, c) = go[r];
    g.accumulate(ix, gx);
  });
}

Var sum_rows(Var x) {
  const Tensor& xv = x.value();
  Tensor out(1, xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out[c] += xv(r, c);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& in = g.value(ix);
    Tensor gx(in.rows(), in.cols());
    for (std::size_t r = 0; r < in.rows(); ++r)
      for (std::size_t c = 0; c < in.cols(); ++c) gx(r, c) = go[c];
    g.accumulate(ix, gx);
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& xv = x.value();
  if (start + count > xv.cols()) throw ShapeError("slice_cols: range exceeds " + xv.shape().str());
  Tensor out(xv.rows(), count);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, start + c);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, start, count](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t r = 0; r < go.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) gx(r, start + c) += go(r, c);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, offset + c) = pv(r, c);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += pv.cols();
  }
  return parts.front().graph().record(std::move(out), parts, [ids, offsets](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) continue;
      Tensor& gp = g.grad_buffer(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += go(r, offsets[k] + c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto d = p.value().data();
    values.insert(values.end(), d.begin(), d.end());
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += p.rows();
  }
  return parts.front().graph().record(Tensor(rows, cols, std::move(values)), parts,
                                      [ids, offsets, cols](Graph& g, std::size_t self) {
                                        const Tensor& go = g.grad(self);
                                        for (std::size_t k = 0; k < ids.size(); ++k) {
                                          if (!g.requires_grad(ids[k])) continue;
                                          Tensor& gp = g.grad_buffer(ids[k]);
                                          const std::size_t base = offsets[k] * cols;
                                          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[base + i];
                                        }
                                      });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols();
  Tensor out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(xv.data().begin() + static_cast<std::ptrdiff_t>(index[i] * cols), cols,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.graph().record(std::move(out), {x}, [ix, idx = std::move(idx), cols](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) gx(idx[i], c) += go(i, c);
  });
}

Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t rows) {
  const Tensor& xv = x.value();
  if (index.size() != xv.rows()) throw ShapeError("scatter_add_rows: index length differs from row count");
  const std::size_t cols = xv.cols();
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw ShapeError("scatter_add_rows: index out of range");
    for (std::size_t c = 0; c < cols; ++c) out(index[i], c) += xv(i, c);
  }
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.graph().record(std::move(out), {x}, [ix, idx = std::move(idx), cols](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) gx(i, c) += go(idx[i], c);
  });
}

Var gather_cols(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), index.size());
  for (std::size_t c = 0; c < index.size(); ++c)
    if (index[c] >= xv.cols()) throw ShapeError("gather_cols: index out of range");
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < index.size(); ++c) out(r, c) = xv(r, index[c]);
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.graph().record(std::move(out), {x}, [ix, idx = std::move(idx)](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t r = 0; r < go.rows(); ++r)
      for (std::size_t c = 0; c < idx.size(); ++c) gx(r, idx[c]) += go(r, c);
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  const Tensor& xv = x.value();
  if (rows * cols != xv.size()) throw ShapeError("reshape: " + xv.shape().str() + " has a different size");
  const std::size_t ix = x.id();
  return x.graph().record(Tensor(rows, cols, xv.values()), {x}, [ix](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
}

namespace {

void check_mask(const Tensor& logits, const Tensor& mask) {
  if (mask.shape() != logits.shape()) {
    throw ShapeError("mask " + mask.shape().str() + " does not match logits " + logits.shape().str());
  }
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    bool any = false;
    for (std::size_t c = 0; c < mask.cols(); ++c) any = any || mask(r, c) != 0.0;
    if (!any) throw InvalidMask("masked softmax: row " + std::to_string(r) + " has every entry masked");
  }
}

// Row-wise masked log-softmax values: logits shifted by kMaskedLogit where masked.
Tensor masked_log_softmax_values(const Tensor& logits, const Tensor& mask) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.cols(); ++c)
      if (mask(r, c) != 0.0) top = std::max(top, logits(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c)
      if (mask(r, c) != 0.0) z += std::exp(logits(r, c) - top);
    const double lse = top + std::log(z);
    for (std::size_t c = 0; c < logits.cols(); ++c)
      out(r, c) = mask(r, c) != 0.0 ? logits(r, c) - lse : logits(r, c) + kMaskedLogit - lse;
  }
  return out;
}

}  // namespace

Var masked_softmax(Var logits, const Tensor& mask) {
  check_mask(logits.value(), mask);
  Tensor lp = masked_log_softmax_values(logits.value(), mask);
  Tensor out(lp.rows(), lp.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] != 0.0 ? std::exp(lp[i]) : 0.0;
  const std::size_t il = logits.id();
  return logits.graph().record(std::move(out), {logits}, [il](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& p = g.value(self);
    Tensor gl(p.rows(), p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) dot += go(r, c) * p(r, c);
      for (std::size_t c = 0; c < p.cols(); ++c) gl(r, c) = p(r, c) * (go(r, c) - dot);
    }
    g.accumulate(il, gl);
  });
}

Var masked_log_softmax(Var logits, const Tensor& mask) {
  check_mask(logits.value(), mask);
  Tensor out = masked_log_softmax_values(logits.value(), mask);
  const std::size_t il = logits.id();
  return logits.graph().record(std::move(out), {logits}, [il, mask](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& lp = g.value(self);
    Tensor gl(lp.rows(), lp.cols());
    for (std::size_t r = 0; r < lp.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < lp.cols(); ++c)
        if (mask(r, c) != 0.0) total += go(r, c);
      for (std::size_t c = 0; c < lp.cols(); ++c)
        gl(r, c) = mask(r, c) != 0.0 ? go(r, c) - std::exp(lp(r, c)) * total : 0.0;
    }
    g.accumulate(il, gl);
  });
}

Var pick(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  if (index.size() != xv.rows()) throw ShapeError("pick: index length differs from row count");
  Tensor out(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    if (index[r] >= xv.cols()) throw ShapeError("pick: index out of range");
    out[r] = xv(r, index[r]);
  }
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.graph().record(std::move(out), {x}, [ix, idx = std::move(idx)](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t r = 0; r < idx.size(); ++r) gx(r, idx[r]) += go[r];
  });
}

Var stop_gradient(Var x) { return x.graph().constant(x.value()); }

}  // namespace redist::nn

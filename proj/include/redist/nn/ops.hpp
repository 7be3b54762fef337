#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "redist/nn/graph.hpp"

namespace redist::nn {

// Elementwise binary ops broadcast a 1×n row, a B×1 column, or a 1×1 scalar
// against the other operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(double s, Var a);

Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);

/// a·b
Var matmul(Var a, Var b);
/// a·bᵀ
Var matmul_nt(Var a, Var b);
/// x·Wᵀ + b for a batch of rows x; W is out×in, b is 1×out.
Var linear(Var x, Var weight, Var bias);

Var sum(Var x);
Var mean(Var x);
/// Per-row sums: B×n → B×1.
Var sum_cols(Var x);
/// Per-column sums: B×n → 1×n.
Var sum_rows(Var x);

Var slice_cols(Var x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const std::size_t> index);
/// out[index[i]] += x[i]; out has `rows` rows.
Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t rows);
Var gather_cols(Var x, std::span<const std::size_t> index);
Var reshape(Var x, std::size_t rows, std::size_t cols);

/// Row-wise softmax over entries whose mask is nonzero; masked entries are exactly 0.
/// Throws InvalidMask if any row has no unmasked entry.
Var masked_softmax(Var logits, const Tensor& mask);
/// Row-wise log-softmax restricted to unmasked entries; masked entries hold a large
/// negative constant and receive no gradient.
Var masked_log_softmax(Var logits, const Tensor& mask);
/// out[r] = x[r, index[r]] as a B×1 column.
Var pick(Var x, std::span<const std::size_t> index);

Var stop_gradient(Var x);

class InvalidMask : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kMaskedLogit = -1e9;

}  // namespace redist::nn

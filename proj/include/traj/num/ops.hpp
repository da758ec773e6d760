#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "traj/num/graph.hpp"
#include "traj/num/kernels.hpp"

// Differentiable operations on Var. Shapes are matrices (rows x cols); a
// "row" argument is 1 x n and a "col" argument is m x 1.

namespace traj::num {

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// Broadcasts.
Var add_row(Var a, Var row);
Var mul_row(Var a, Var row);
Var add_col(Var a, Var col);
Var mul_col(Var a, Var col);
// a (1x1) broadcast against b.
Var mul_scalar(Var s, Var b);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var detach(Var a);

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var log_sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
// Natural log; inputs must be strictly positive.
Var log(Var a);
Var square(Var a);
// Gradient flows only where lo < a < hi.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
// Column sums (1 x n).
Var sum_rows(Var a);
Var mean_rows(Var a);
// Row sums (m x 1).
Var sum_cols(Var a);
// Mean over consecutive blocks of `length` rows: (s*length x n) -> (s x n).
Var segment_mean(Var a, std::size_t length);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var gather_rows(Var a, std::vector<std::size_t> index);
Var reshape(Var a, std::size_t rows, std::size_t cols);
// Row r becomes rows r*times .. r*times+times-1.
Var repeat_rows(Var a, std::size_t times);
// The whole matrix stacked `times` times.
Var tile_rows(Var a, std::size_t times);

// out[b, :] = sum_j w[b, j] * table[b*l + j, :] with l = w.cols().
Var group_vecmat(Var w, Var table);

Var attention(Var q, Var k, Var v, const AttentionShape& shape);

// softmax((logits + noise) / tau). With straight_through the forward value is
// the one-hot argmax and the gradient is that of the soft sample.
Var gumbel_softmax(Var logits, double tau, const Tensor& noise, bool straight_through = false);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace traj::num

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "autodiff/tape.hpp"

namespace ockm::ad {

// Elementwise binary ops broadcast any operand dimension of size 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var maximum(Var a, Var b);  // ties route the gradient to a

Var add(Var a, double c);
Var scale(Var a, double c);
Var rsub(double c, Var a);  // c - a

Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var sin(Var a);
Var cos(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var square(Var a);
Var abs(Var a);
Var relu(Var a);  // max(a, 0)
Var huber(Var a, double delta);

// Forward clamps into [lo, hi]; backward passes the gradient straight through
// inside the bounds and zeroes it outside.
Var clamp(Var a, double lo, double hi);
Var clamp(Var a, const Tensor& lo, const Tensor& hi);

Var sum(Var a);
Var mean(Var a);
Var max(Var a);        // global maximum, gradient to the first argmax
Var sum_rows(Var a);   // r x c -> r x 1
Var sum_cols(Var a);   // r x c -> 1 x c
Var norm_rows(Var a);  // r x c -> r x 1 Euclidean norms

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);  // row-major order kept

Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
// Row i of the result is row index[i] of a, or zeros when index[i] < 0.
Var gather_rows(Var a, std::span<const int> index);

Var softmax_rows(Var a);
Var layer_norm_rows(Var a, double eps = 1e-5);

// Grouped attention helpers. token_index is nq x T (row-major), entries index
// rows of the token matrix or are -1 for padding.
//   grouped_scores: out[i,t] = q_i . k_{index[i,t]}      (0 on padding)
//   grouped_mix:    out[i,:] = sum_t w[i,t] v_{index[i,t]}
Var grouped_scores(Var q, Var k, std::span<const int> token_index, std::size_t tokens);
Var grouped_mix(Var w, Var v, std::span<const int> token_index, std::size_t tokens);

// Complex values as paired real/imaginary arrays of identical shape.
struct CVar {
  Var re;
  Var im;
};

CVar cadd(const CVar& a, const CVar& b);
CVar cmul(const CVar& a, const CVar& b);  // broadcasting like mul
CVar cscale(const CVar& a, Var s);        // real scale
Var cabs2(const CVar& a);                 // re^2 + im^2
CVar cexp_i(Var phase);                   // (cos phase, sin phase)
// A (constant complex, r x n) times x (n x 1).
CVar cmatvec(const Tensor& a_re, const Tensor& a_im, const CVar& x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add(a, c); }

}  // namespace ockm::ad

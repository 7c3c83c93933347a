#pragma once

#include "deformreg/nd/tape.hpp"
#include "deformreg/nd/tensor.hpp"

// Differentiable operations. Every op takes the tape of the current pass as
// its first argument; if the tape records and an input requires a gradient,
// the op appends its adjoint to the tape.
//
// Broadcasting is limited to tensor-vs-scalar (scalar_mul); all binary ops
// require identical shapes.
namespace deformreg::nd {

// Cross-correlation. input [N,C,H,W], weight [K,C,kh,kw], bias [K] or
// undefined. Output [N,K,(H+2p-kh)/s+1,(W+2p-kw)/s+1].
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding);

// Adjoint of conv2d with respect to its input. input [N,C,H,W], weight
// [C,K,kh,kw], bias [K] or undefined. Output [N,K,(H-1)s-2p+kh,(W-1)s-2p+kw].
Tensor conv2d_transpose(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding);

// max(x, slope*x); the derivative at exactly 0 is slope.
Tensor leaky_relu(Tape& tape, const Tensor& x, float slope);

// [N,Ca,H,W] + [N,Cb,H,W] -> [N,Ca+Cb,H,W]
Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
// Subgradient 0 at 0.
Tensor abs(Tape& tape, const Tensor& x);
// exp(-x)
Tensor exp_neg(Tape& tape, const Tensor& x);
Tensor scalar_mul(Tape& tape, const Tensor& x, float s);
// Single-element results, accumulated in double.
Tensor reduce_sum(Tape& tape, const Tensor& x);
Tensor reduce_mean(Tape& tape, const Tensor& x);

// Forward differences along the last (x) or second-to-last (y) axis over the
// valid region: [...,H,W] -> [...,H,W-1] or [...,H-1,W].
Tensor diff_x(Tape& tape, const Tensor& x);
Tensor diff_y(Tape& tape, const Tensor& x);

}  // namespace deformreg::nd

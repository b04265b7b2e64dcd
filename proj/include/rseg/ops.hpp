#pragma once

#include <cstddef>

#include "rseg/tensor.hpp"

// Differentiable operations. Each op records a backward closure on the tape
// when any input requires a gradient; the result then requires a gradient too.
namespace rseg {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);
/// relu'(0) is taken as 0.
Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);

/// Sum of all elements, shape [1].
Tensor sum(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

/// Stacks along axis 0; trailing extents must agree. A zero-extent side is
/// represented by an undefined Tensor and yields the other operand.
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b);
inline Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) { return concat(tape, a, b); }

/// Rows [begin, end) along axis 0.
Tensor slice(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);

/// Row `index` of a 2-D matrix, as a 1-D tensor.
Tensor gather_row(Tape& tape, const Tensor& matrix, std::size_t index);

/// Broadcast a [D] vector to [D x h x w]; the backward pass sums over locations.
Tensor tile_spatial(Tape& tape, const Tensor& v, std::size_t h, std::size_t w);

/// Cross-correlation, zero padding. input [C_in x H x W], filters
/// [C_out x C_in x kh x kw], bias [C_out] or undefined.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& filters, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Transposed convolution: input [C_in x h x w], filters [C_in x C_out x k x k].
/// Output extent (h - 1) * stride + k - 2 * crop, cropped symmetrically.
Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& filters, std::size_t stride,
                        std::size_t crop);

/// v / max(||v||_2, eps) over all elements of v.
Tensor l2_normalize(Tape& tape, const Tensor& v, double eps);

/// l2_normalize applied along the channel axis at every location of [C x H x W].
Tensor l2_normalize_channels(Tape& tape, const Tensor& map, double eps);

/// sum_i w_i * softplus(-/+ s_i) / normalizer, with w_i = alpha_f where
/// target_i == 1 and alpha_b where target_i == 0. Targets must be binary.
Tensor logistic_loss(Tape& tape, const Tensor& scores, const Tensor& targets, double alpha_f, double alpha_b,
                     double normalizer);

/// max(x, 0) + log(1 + exp(-|x|)).
double softplus(double x);
double sigmoid(double x);

}  // namespace rseg

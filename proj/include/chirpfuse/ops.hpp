#pragma once

#include <vector>

#include "chirpfuse/autodiff.hpp"

// Differentiable graph ops. Every op computes eagerly and, when a tape is
// given and some input requires grad, records a backward closure. Passing
// tape = nullptr runs the same arithmetic in inference mode.

namespace chirpfuse {

class Rng;

namespace ops {

// Elementwise; shapes must match.
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// x [m x n] plus a [1 x n] bias row broadcast over rows.
TensorPtr add_bias(Tape* tape, const TensorPtr& x, const TensorPtr& b);

TensorPtr scale(Tape* tape, const TensorPtr& x, double c);

// relu'(0) = 0; sigmoid output is clamped into the open interval (0, 1).
TensorPtr relu(Tape* tape, const TensorPtr& x);
TensorPtr sigmoid(Tape* tape, const TensorPtr& x);
TensorPtr exp(Tape* tape, const TensorPtr& x);

// Natural log with floor: log(max(x, kLogFloor)). Below the floor the value
// is constant, so the derivative there is 0.
inline constexpr double kLogFloor = 1e-10;
TensorPtr log_floored(Tape* tape, const TensorPtr& x);

// a [m x k] * b [k x n] -> [m x n]
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// Concatenation along axis 0 or 1. Inputs must share rank (1 or 2) and all
// other extents; zero-length operands are legal.
TensorPtr concat(Tape* tape, std::size_t axis, const std::vector<TensorPtr>& parts);

// Same numel, new extents; values are copied in row-major order.
TensorPtr reshape(Tape* tape, const TensorPtr& x, std::vector<std::size_t> shape);

// Softmax along the given axis of a rank-1 or rank-2 tensor, computed with
// max-subtraction for stability.
TensorPtr softmax(Tape* tape, const TensorPtr& x, std::size_t axis);

// Row-wise softmax of a rank-2 tensor.
TensorPtr softmax_rows(Tape* tape, const TensorPtr& x);

// Relaxed categorical sample along the last axis: softmax((logits + g)/tau)
// with i.i.d. Gumbel(0,1) noise g drawn from rng. Noise is a constant for
// the backward pass. rng = nullptr pins g to zero (evaluation mode), which
// reduces to softmax(logits/tau).
TensorPtr gumbel_softmax(Tape* tape, const TensorPtr& logits, double tau,
                         Rng* rng);

// [c x h x w] -> [1 x c], mean over each channel plane.
TensorPtr mean_hw(Tape* tape, const TensorPtr& x);

// 3x3 conv, stride 1, pad 1. x [cin x h x w], w [cout x cin x 3 x 3],
// b [cout] -> [cout x h x w].
TensorPtr conv2d3x3(Tape* tape, const TensorPtr& x, const TensorPtr& w,
                    const TensorPtr& b);

// 2x2 mean pool, stride 2; spatial extents must be even.
TensorPtr mean_pool2(Tape* tape, const TensorPtr& x);

// Scalar reductions.
TensorPtr sum_all(Tape* tape, const TensorPtr& x);
TensorPtr mean_all(Tape* tape, const TensorPtr& x);

// Mean cross-entropy of logits [batch x classes] against integer labels,
// computed through log-sum-exp. Returns a scalar.
TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits,
                        const std::vector<int>& labels);

} // namespace ops
} // namespace chirpfuse

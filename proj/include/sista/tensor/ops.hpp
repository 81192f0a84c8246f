#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sista/tensor/tensor.hpp"

// Differentiable primitives. Every function checks its shapes (Error with
// ErrorCode::kShapeMismatch naming the op and both shapes) and the finiteness
// of its output (ErrorCode::kNonFinite naming the op). When a Graph is active
// and any input requires grad, the call is recorded for backward.
//
// Image tensors use NCHW layout: [batch, channels, height, width].
namespace sista::tensor::ops {

// Elementwise arithmetic with numpy-style broadcasting.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);

// [m, k] x [k, n] -> [m, n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

struct Conv2dAttrs {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// x [N, Ci, H, W], weight [Co, Ci, k, k], bias [Co] (may be undefined).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, Conv2dAttrs attrs);

// x [N, C, H, W], weight [C, 1, k, k], bias [C] (may be undefined).
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias, Conv2dAttrs attrs);

// Generalized transpose: output axis i is input axis perm[i].
template <typename T>
Tensor<T> transpose(const Tensor<T>& a, const std::vector<std::size_t>& perm);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
// Half-open range [start, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start,
                std::size_t end);
// Zero padding of the two trailing (spatial) axes; adjoint of slice.
template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, std::size_t bottom, std::size_t right);

// Integer-factor bilinear upsampling of [N, C, H, W], half-pixel centers.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t factor);
// Non-overlapping s x s average pooling; H and W must be divisible by s.
template <typename T> Tensor<T> avg_pool(const Tensor<T>& x, std::size_t s);

template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> silu(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
// (1/beta) * ln(1 + exp(beta * a)).
template <typename T> Tensor<T> softplus(const Tensor<T>& a, T beta);
template <typename T> Tensor<T> abs(const Tensor<T>& a);
// sign(0) = 0. Not differentiable: never recorded, result is detached.
template <typename T> Tensor<T> sign(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);

template <typename T> Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis);

// Full reductions to a scalar (shape {}).
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> l1_norm(const Tensor<T>& a);

// x [N, C, H, W]; gamma, beta [C]. Statistics over (C/groups, H, W) per
// sample and group.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::size_t groups, T eps = T(1e-5));

// Selective state-space scan over a sequence of L positions, for every
// batch item n and channel d independently:
//
//   h_t = exp(delta_t[d] * A[d]) (.) h_{t-1} + delta_t[d] * B_t * x_t[d]
//   y_t[d] = <C_t, h_t> + skip[d] * x_t[d]
//
// Shapes: x, delta [N, D, L]; A [D, S]; B, C [N, S, L]; skip [D].
// `order` lists the positions in visiting order (a permutation of 0..L-1);
// outputs are written back at the visited position. Empty order = 0..L-1.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const Tensor<T>& delta,
                         const Tensor<T>& A, const Tensor<T>& B,
                         const Tensor<T>& C, const Tensor<T>& skip,
                         std::span<const std::size_t> order = {});

// [N, C, H, W] -> [N * (H/w) * (W/w), C, w, w]; H, W divisible by w.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, std::size_t window);
// Inverse of window_partition for the given original batch and extent.
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, std::size_t batch,
                         std::size_t height, std::size_t width);

}  // namespace sista::tensor::ops

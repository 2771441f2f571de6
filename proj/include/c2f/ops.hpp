#pragma once

#include <span>

#include "c2f/layers.hpp"
#include "c2f/tape.hpp"

namespace c2f {

enum class Activation { kRelu, kSigmoid };
enum class Elementwise { kAdd, kMul };

struct ConvGeometry {
  int stride = 1;
  int dilation = 1;
};

/// Output extent of a convolution/pooling axis.
constexpr int conv_out_size(int in, int kernel, int pad, int stride, int dilation) noexcept {
  return (in + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
}

// Every op records its result on the tape of its first argument. Gradients
// are exact adjoints of the forward computation.

/// Zero-padded cross-correlation. `bias` may be an invalid Var (no bias).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geom);

/// Binds `p` to the tape and applies it.
template <typename T>
Var<T> conv2d(const Var<T>& x, const ConvParams<T>& p);

/// Batch normalization over (n, h, w). In train mode the running statistics
/// of `state` are updated in place.
template <typename T>
Var<T> batch_norm(const Var<T>& x, BatchNormState<T>& state);

template <typename T>
Var<T> activation(const Var<T>& x, Activation kind);

template <typename T>
Var<T> relu(const Var<T>& x) {
  return activation(x, Activation::kRelu);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return activation(x, Activation::kSigmoid);
}

/// Mean pooling. When kernel == stride the windows tile the input without
/// padding; otherwise padding is (kernel-1)/2 and border windows average
/// their in-bounds elements only.
template <typename T>
Var<T> avg_pool(const Var<T>& x, int kernel, int stride);

template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// Bilinear resize with half-pixel centers; source coordinates are clamped
/// to the input extent.
template <typename T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w);

template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int factor);

/// a (op) b. `b` either matches `a` or has shape (n, c, 1, 1).
template <typename T>
Var<T> elementwise(const Var<T>& a, const Var<T>& b, Elementwise kind);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return elementwise(a, b, Elementwise::kAdd);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return elementwise(a, b, Elementwise::kMul);
}

/// 1 - x
template <typename T>
Var<T> one_minus(const Var<T>& x);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> xs);

/// Sum of all elements as a (1,1,1,1) tensor.
template <typename T>
Var<T> sum(const Var<T>& x);

namespace kernels {

// Tape-free forward kernels shared by ops, data resizing and metrics.

template <typename T>
void resize_bilinear(const Tensor<T>& in, Tensor<T>& out);

/// Windowed mean with in-bounds averaging at the borders (stride 1,
/// odd kernel, same-size output).
template <typename T>
Tensor<T> box_mean(const Tensor<T>& in, int kernel);

}  // namespace kernels

}  // namespace c2f

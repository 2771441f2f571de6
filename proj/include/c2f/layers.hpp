#pragma once

#include <string>
#include <vector>

#include "c2f/rng.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

enum class Mode { kTrain, kEval };

enum class ParamRole {
  kTrainable,  // updated by the optimizer
  kBuffer,     // persisted state, not trained (BN running statistics)
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
  ParamRole role;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

/// Convolution weights and geometry. Padding is dilation*(k-1)/2 per axis,
/// which is "same" padding at stride 1.
template <typename T>
struct ConvParams {
  Tensor<T> weight;  // (out_c, in_c, kh, kw)
  Tensor<T> bias;    // (1, out_c, 1, 1)
  int stride = 1;
  int dilation = 1;

  ConvParams() = default;
  ConvParams(int in_c, int out_c, int kh, int kw, int stride = 1, int dilation = 1);

  int in_channels() const noexcept { return weight.c(); }
  int out_channels() const noexcept { return weight.n(); }
  int pad_h() const noexcept { return dilation * (weight.h() - 1) / 2; }
  int pad_w() const noexcept { return dilation * (weight.w() - 1) / 2; }

  /// Uniform Kaiming init on (-b, b), b = sqrt(6 / fan_in); bias zero.
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList<T>& out);
};

template <typename T>
struct BatchNormState {
  Tensor<T> gamma;         // (1, c, 1, 1)
  Tensor<T> beta;          // (1, c, 1, 1)
  Tensor<T> running_mean;  // (1, c, 1, 1)
  Tensor<T> running_var;   // (1, c, 1, 1)
  T eps = T(1e-5);
  T momentum = T(0.1);
  Mode mode = Mode::kTrain;

  BatchNormState() = default;
  explicit BatchNormState(int channels);

  int channels() const noexcept { return gamma.c(); }
  void collect(const std::string& prefix, ParamList<T>& out);
};

/// Samples a tensor uniformly on (-b, b) with b = sqrt(6 / fan_in).
/// Consumes exactly shape.numel() draws.
template <typename T>
Tensor<T> init_params(Rng& rng, Shape shape, int fan_in);

}  // namespace c2f

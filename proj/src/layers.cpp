#include "c2f/layers.hpp"

#include <cmath>

namespace c2f {

template <typename T>
Tensor<T> init_params(Rng& rng, Shape shape, int fan_in) {
  if (fan_in < 1) throw ContractError("init_params: fan_in must be positive");
  const double bound = std::sqrt(6.0 / fan_in);
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(bound * (2.0 * rng.uniform() - 1.0));
  return t;
}

template <typename T>
ConvParams<T>::ConvParams(int in_c, int out_c, int kh, int kw, int stride_, int dilation_)
    : weight(Shape{out_c, in_c, kh, kw}),
      bias(Shape{1, out_c, 1, 1}),
      stride(stride_),
      dilation(dilation_) {
  if (kh % 2 == 0 || kw % 2 == 0) throw ContractError("conv kernel extents must be odd");
  if (stride < 1 || dilation < 1) throw ContractError("conv stride and dilation must be >= 1");
}

template <typename T>
void ConvParams<T>::init(Rng& rng) {
  const int fan_in = weight.c() * weight.h() * weight.w();
  weight = init_params<T>(rng, weight.shape(), fan_in);
  bias.fill(T(0));
}

template <typename T>
void ConvParams<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.push_back({prefix + ".weight", &weight, ParamRole::kTrainable});
  out.push_back({prefix + ".bias", &bias, ParamRole::kTrainable});
}

template <typename T>
BatchNormState<T>::BatchNormState(int channels)
    : gamma(Shape{1, channels, 1, 1}, T(1)),
      beta(Shape{1, channels, 1, 1}, T(0)),
      running_mean(Shape{1, channels, 1, 1}, T(0)),
      running_var(Shape{1, channels, 1, 1}, T(1)) {}

template <typename T>
void BatchNormState<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.push_back({prefix + ".gamma", &gamma, ParamRole::kTrainable});
  out.push_back({prefix + ".beta", &beta, ParamRole::kTrainable});
  out.push_back({prefix + ".running_mean", &running_mean, ParamRole::kBuffer});
  out.push_back({prefix + ".running_var", &running_var, ParamRole::kBuffer});
}

template Tensor<float> init_params(Rng&, Shape, int);
template Tensor<double> init_params(Rng&, Shape, int);
template struct ConvParams<float>;
template struct ConvParams<double>;
template struct BatchNormState<float>;
template struct BatchNormState<double>;

}  // namespace c2f

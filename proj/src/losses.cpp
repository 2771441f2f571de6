#include "c2f/losses.hpp"

#include <cmath>

namespace c2f {
namespace {

template <typename T>
void check_pair(const char* op, const Tensor<T>& logits, const Tensor<T>& gt,
                const Tensor<T>& w) {
  if (logits.shape() != gt.shape() || w.shape() != gt.shape() || gt.c() != 1) {
    throw ShapeError(std::string(op) + ": logits " + logits.shape().str() + ", mask " +
                     gt.shape().str() + " and weights " + w.shape().str() +
                     " must share a single-channel shape");
  }
}

template <typename T>
double stable_sigmoid(T z) {
  const double v = z;
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

template <typename T>
Tensor<T> weight_map(const Tensor<T>& gt, const LossOptions& opts) {
  for (T v : gt.data()) {
    if (v != T(0) && v != T(1)) throw DataError("weight_map: ground truth must be binary");
  }
  Tensor<T> w = kernels::box_mean(gt, opts.weight_kernel);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = static_cast<T>(1.0 + opts.weight_lambda * std::abs(static_cast<double>(w[i]) - gt[i]));
  }
  return w;
}

template <typename T>
Var<T> weighted_bce(const Var<T>& logits, const Tensor<T>& gt, const Tensor<T>& w) {
  const Tensor<T>& z = logits.value();
  check_pair("weighted_bce", z, gt, w);
  const int N = z.n();
  const std::size_t plane = z.shape().plane();
  std::vector<double> wsum(N, 0.0);
  double loss = 0;
  for (int n = 0; n < N; ++n) {
    double num = 0;
    for (std::size_t i = n * plane; i < (n + 1) * plane; ++i) {
      const double zi = z[i];
      const double bce = std::max(zi, 0.0) - zi * gt[i] + std::log1p(std::exp(-std::abs(zi)));
      num += w[i] * bce;
      wsum[n] += w[i];
    }
    loss += num / wsum[n];
  }
  loss /= N;
  return logits.tape().record(
      Tensor<T>::scalar(static_cast<T>(loss)), {logits},
      [logits, gt, w, wsum, N, plane](Tape<T>& tape, const Tensor<T>& g) {
        const Tensor<T>& z = tape.value(logits.id());
        Tensor<T>& gz = tape.grad_buffer(logits.id());
        for (int n = 0; n < N; ++n) {
          const double scale = static_cast<double>(g[0]) / (wsum[n] * N);
          for (std::size_t i = n * plane; i < (n + 1) * plane; ++i) {
            gz[i] += static_cast<T>(scale * w[i] * (stable_sigmoid(z[i]) - gt[i]));
          }
        }
      });
}

template <typename T>
Var<T> weighted_iou(const Var<T>& logits, const Tensor<T>& gt, const Tensor<T>& w) {
  const Tensor<T>& z = logits.value();
  check_pair("weighted_iou", z, gt, w);
  const int N = z.n();
  const std::size_t plane = z.shape().plane();
  std::vector<double> inter(N, 0.0), uni(N, 0.0);
  double loss = 0;
  for (int n = 0; n < N; ++n) {
    for (std::size_t i = n * plane; i < (n + 1) * plane; ++i) {
      const double p = stable_sigmoid(z[i]);
      inter[n] += w[i] * p * gt[i];
      uni[n] += w[i] * (p + gt[i] - p * gt[i]);
    }
    loss += 1.0 - (inter[n] + 1.0) / (uni[n] + 1.0);
  }
  loss /= N;
  return logits.tape().record(
      Tensor<T>::scalar(static_cast<T>(loss)), {logits},
      [logits, gt, w, inter, uni, N, plane](Tape<T>& tape, const Tensor<T>& g) {
        const Tensor<T>& z = tape.value(logits.id());
        Tensor<T>& gz = tape.grad_buffer(logits.id());
        for (int n = 0; n < N; ++n) {
          const double a = inter[n] + 1.0, b = uni[n] + 1.0;
          const double scale = static_cast<double>(g[0]) / N;
          for (std::size_t i = n * plane; i < (n + 1) * plane; ++i) {
            const double p = stable_sigmoid(z[i]);
            // d/dp of -(a/b): -(w*g*b - a*w*(1-g)) / b^2
            const double dp = -(w[i] * gt[i] * b - a * w[i] * (1.0 - gt[i])) / (b * b);
            gz[i] += static_cast<T>(scale * dp * p * (1.0 - p));
          }
        }
      });
}

template <typename T>
LossTerms<T> total_loss(const Var<T>& logits, const Tensor<T>& gt, const LossOptions& opts) {
  Var<T> z = logits;
  if (z.shape().h != gt.h() || z.shape().w != gt.w()) z = resize_bilinear(z, gt.h(), gt.w());
  const Tensor<T> w = weight_map(gt, opts);
  LossTerms<T> terms;
  terms.bce = weighted_bce(z, gt, w);
  terms.iou = weighted_iou(z, gt, w);
  terms.total = add(terms.iou, terms.bce);
  return terms;
}

#define C2F_INSTANTIATE(T)                                                          \
  template Tensor<T> weight_map(const Tensor<T>&, const LossOptions&);              \
  template Var<T> weighted_bce(const Var<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Var<T> weighted_iou(const Var<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template LossTerms<T> total_loss(const Var<T>&, const Tensor<T>&, const LossOptions&);

C2F_INSTANTIATE(float)
C2F_INSTANTIATE(double)

}  // namespace c2f

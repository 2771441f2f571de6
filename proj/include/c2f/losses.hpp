#pragma once

#include "c2f/ops.hpp"

namespace c2f {

struct LossOptions {
  double weight_lambda = 5.0;
  int weight_kernel = 31;
};

/// Boundary-emphasis weights w = 1 + lambda * |box_mean_k(G) - G|, where the
/// k x k mean averages in-bounds pixels only. G must be binary.
template <typename T>
Tensor<T> weight_map(const Tensor<T>& gt, const LossOptions& opts = {});

/// Per-sample sum(w * bce(z, g)) / sum(w), averaged over the batch. BCE is
/// evaluated from logits as max(z,0) - z*g + log(1 + exp(-|z|)).
template <typename T>
Var<T> weighted_bce(const Var<T>& logits, const Tensor<T>& gt, const Tensor<T>& w);

/// Per-sample 1 - (sum(w*p*g) + 1) / (sum(w*(p + g - p*g)) + 1) with
/// p = sigmoid(z), averaged over the batch.
template <typename T>
Var<T> weighted_iou(const Var<T>& logits, const Tensor<T>& gt, const Tensor<T>& w);

template <typename T>
struct LossTerms {
  Var<T> total;
  Var<T> bce;
  Var<T> iou;
};

/// Upsamples logits to the ground-truth size and returns IoU + BCE sharing a
/// single weight map.
template <typename T>
LossTerms<T> total_loss(const Var<T>& logits, const Tensor<T>& gt, const LossOptions& opts = {});

}  // namespace c2f

#pragma once

#include <vector>

#include "c2f/metrics.hpp"
#include "c2f/tensor.hpp"

// Naive 64-bit reference implementations used to cross-check the library.
namespace c2f::verify {

/// Direct-summation cross-correlation, padding dilation*(k-1)/2.
Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& weight,
                            const Tensor<double>* bias, int stride, int dilation);

/// Windowed mean; tiles when kernel == stride, otherwise pads (kernel-1)/2
/// and averages in-bounds elements.
Tensor<double> naive_avg_pool(const Tensor<double>& x, int kernel, int stride);

/// Per-pixel half-pixel-center bilinear interpolation.
Tensor<double> naive_resize_bilinear(const Tensor<double>& x, int out_h, int out_w);

/// Gaussian weights evaluated per tap, zero padding.
GrayMap naive_gaussian_blur(const GrayMap& x, int k, double sigma);

/// O(N*M) nearest-foreground search. Scans candidates column by column and
/// keeps the first strict minimum.
DistanceTransform brute_force_distance(const GrayMap& mask);

double reference_mae(const SegmentationPair& pair);
double reference_s_measure(const SegmentationPair& pair);
EMeasure reference_e_measure(const SegmentationPair& pair);
double reference_weighted_f(const SegmentationPair& pair);

/// 1 + lambda * |window mean - g| with an explicit k x k loop.
Tensor<double> reference_weight_map(const Tensor<double>& gt, double lambda, int k);

/// Probability-space weighted BCE with clamping, per-sample ratio averaged
/// over the batch.
double reference_weighted_bce(const Tensor<double>& logits, const Tensor<double>& gt,
                              const Tensor<double>& w);
double reference_weighted_iou(const Tensor<double>& logits, const Tensor<double>& gt,
                              const Tensor<double>& w);

}  // namespace c2f::verify

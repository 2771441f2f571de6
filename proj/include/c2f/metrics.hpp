#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "c2f/error.hpp"

namespace c2f {

/// Single-channel map used by the evaluation code, row-major.
struct GrayMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  GrayMap() = default;
  GrayMap(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  double& at(int y, int x) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Prediction in [0, 1] and binary ground truth of equal size.
struct SegmentationPair {
  GrayMap pred;
  GrayMap gt;

  /// Throws ShapeError on size mismatch and DataError on out-of-range values.
  void validate() const;
};

double mae(const SegmentationPair& pair);

/// Structure measure, alpha = 0.5.
double s_measure(const SegmentationPair& pair);

struct EMeasure {
  double mean = 0;
  double max = 0;
};

/// Enhanced-alignment measure over thresholds t = k/255, k = 0..255.
EMeasure e_measure(const SegmentationPair& pair);

struct WeightedF {
  double value = 0;
  bool empty_gt = false;  // no foreground: value is 0 by convention
};

/// Weighted F-measure with beta^2 = 1.
WeightedF weighted_f(const SegmentationPair& pair);

struct DistanceTransform {
  GrayMap dist;              // Euclidean distance to the nearest foreground pixel
  std::vector<int> nearest;  // row-major index of that pixel
};

/// Exact Euclidean distance transform of the foreground (values > 0.5).
/// Ties resolve to the nearest pixel with the smallest column, then the
/// smallest row. Throws ContractError when the mask has no foreground.
DistanceTransform distance_transform(const GrayMap& mask);

/// Normalized k x k Gaussian kernel, row-major.
std::vector<double> gaussian_kernel(int k, double sigma);

/// Correlation with the normalized Gaussian kernel, zero padding.
GrayMap gaussian_blur(const GrayMap& x, int k = 7, double sigma = 5.0);

struct ImageScores {
  std::string file;
  double mae = 0;
  double s_alpha = 0;
  double e_phi_mean = 0;
  double e_phi_max = 0;
  double f_w = 0;
  bool f_w_empty = false;
};

struct MetricReport {
  std::vector<ImageScores> images;
  ImageScores mean;  // unweighted average over images, file = "MEAN"
};

ImageScores score_pair(const std::string& file, const SegmentationPair& pair);

/// Builds the dataset means from per-image scores.
MetricReport summarize(std::vector<ImageScores> images);

/// Matches `<name>.pgm` files of both directories. Throws DataError listing
/// every file that lacks a counterpart.
MetricReport evaluate_set(const std::filesystem::path& pred_dir,
                          const std::filesystem::path& gt_dir);

/// `file,mae,s_alpha,e_phi_mean,e_phi_max,f_w` with 6 decimals and a final
/// MEAN row.
std::string report_csv(const MetricReport& report);

}  // namespace c2f

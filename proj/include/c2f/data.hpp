#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

struct ImageSample {
  Tensor<float> rgb;   // (1, 3, H, W) in [0, 1]
  Tensor<float> mask;  // (1, 1, H, W), strictly 0 or 1
  std::string id;

  /// Throws DataError if the mask is not binary or the extents disagree.
  void validate() const;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::string split;  // "train", "test" or empty
  std::vector<std::string> ids;
  std::uint64_t seed = 0;

  std::filesystem::path image_path(const std::string& id) const;
  std::filesystem::path mask_path(const std::string& id) const;
};

struct SynthOptions {
  std::uint64_t seed = 1;
  int count = 8;
  int size = 64;
  double contrast_delta = 0.15;
  int max_objects = 2;

  void validate() const;
};

/// One synthetic image: value-noise texture with up to `max_objects` blobs
/// whose texture is shifted by +-contrast_delta. Depends only on
/// (options, index).
ImageSample synth_sample(const SynthOptions& opts, int index);

/// Writes `<root>/images/<id>.ppm`, `<root>/masks/<id>.pgm` and
/// `<root>/manifest.txt`.
DatasetManifest synth_generate(const std::filesystem::path& root, const SynthOptions& opts);

/// Reads `<root>/manifest.txt` and checks that every listed file exists.
DatasetManifest load_manifest(const std::filesystem::path& root);

ImageSample load_sample(const DatasetManifest& manifest, const std::string& id);
std::vector<ImageSample> load_samples(const DatasetManifest& manifest);

/// Nearest multiple of 32 with ties rounded up, at least 32.
int round_to_stride(double extent);

/// Bilinear resize of the image; the mask is resized the same way and
/// re-binarized at 0.5.
ImageSample resize_sample(const ImageSample& s, double scale);

/// Same as resize_sample with an explicit target extent.
ImageSample resize_sample_to(const ImageSample& s, int height, int width);

/// Number of 4-connected foreground components.
int count_components(const Tensor<float>& mask);

}  // namespace c2f

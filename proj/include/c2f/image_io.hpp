#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "c2f/metrics.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

/// Decodes binary PGM (P5) or PPM (P6) with maxval 255 into a (1, c, H, W)
/// tensor with values byte/255. Throws ParseError(kHeader) or
/// ParseError(kPayload).
Tensor<float> decode_image(std::string_view bytes);

/// Encodes a (1, 1, H, W) tensor as P5 or a (1, 3, H, W) tensor as P6.
/// Values are clamped to [0, 1] and stored as round(255 * v).
std::string encode_image(const Tensor<float>& image);

Tensor<float> read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor<float>& image);

/// Reads a grayscale image as a map of values in [0, 1].
GrayMap read_gray_map(const std::filesystem::path& path);

/// round(255 * v) quantization applied by write_image.
unsigned char quantize_unit(float v) noexcept;

std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace c2f

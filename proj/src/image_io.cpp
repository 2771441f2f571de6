#include "c2f/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace c2f {
namespace {

class HeaderScanner {
 public:
  explicit HeaderScanner(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1 << 24)) throw ParseError(ParseErrorKind::kHeader, std::string(what) + " too large");
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(ParseErrorKind::kHeader, std::string("image header: missing ") + what);
    }
    return static_cast<int>(v);
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError(ParseErrorKind::kHeader, "image header: missing whitespace before raster");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

unsigned char quantize_unit(float v) noexcept {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

Tensor<float> decode_image(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError(ParseErrorKind::kHeader, "image header: expected P5 or P6 magic");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderScanner scan(bytes.substr(2));
  const int width = scan.number("width");
  const int height = scan.number("height");
  const int maxval = scan.number("maxval");
  if (width < 1 || height < 1) throw ParseError(ParseErrorKind::kHeader, "image header: empty image");
  if (maxval != 255) {
    throw ParseError(ParseErrorKind::kHeader,
                     "image header: only maxval 255 is supported, got " + std::to_string(maxval));
  }
  scan.single_space();
  const std::size_t offset = 2 + scan.pos();
  const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
  const std::size_t got = bytes.size() - offset;
  if (got != expected) {
    throw ParseError(ParseErrorKind::kPayload, "image payload has " + std::to_string(got) +
                                                   " bytes, expected " + std::to_string(expected));
  }
  Tensor<float> out(Shape{1, channels, height, width});
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) {
      const auto b = static_cast<unsigned char>(bytes[offset + i * channels + c]);
      out[c * plane + i] = static_cast<float>(b) / 255.0f;
    }
  }
  return out;
}

std::string encode_image(const Tensor<float>& image) {
  if (image.n() != 1 || (image.c() != 1 && image.c() != 3)) {
    throw ShapeError("encode_image: expected (1, 1|3, H, W), got " + image.shape().str());
  }
  const int channels = image.c();
  std::string out = (channels == 3 ? "P6\n" : "P5\n") + std::to_string(image.w()) + " " +
                    std::to_string(image.h()) + "\n255\n";
  const std::size_t plane = image.shape().plane();
  const std::size_t header = out.size();
  out.resize(header + plane * channels);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) {
      out[header + i * channels + c] = static_cast<char>(quantize_unit(image[c * plane + i]));
    }
  }
  return out;
}

std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_binary_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor<float> read_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_binary_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_image(const std::filesystem::path& path, const Tensor<float>& image) {
  write_binary_file(path, encode_image(image));
}

GrayMap read_gray_map(const std::filesystem::path& path) {
  const Tensor<float> img = read_image(path);
  if (img.c() != 1) throw DataError(path.string() + ": expected a grayscale (P5) image");
  GrayMap map(img.h(), img.w());
  for (std::size_t i = 0; i < map.size(); ++i) map.values[i] = img[i];
  return map;
}

}  // namespace c2f

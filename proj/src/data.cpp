#include "c2f/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "c2f/error.hpp"
#include "c2f/image_io.hpp"
#include "c2f/ops.hpp"
#include "c2f/parallel.hpp"
#include "c2f/rng.hpp"

namespace c2f {
namespace {

constexpr double kTextureAmplitude = 0.35;
constexpr double kPixelNoise = 0.03;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Sum of value-noise octaves, roughly in [0, 1].
std::vector<double> value_noise(Rng& rng, int size) {
  std::vector<double> out(static_cast<std::size_t>(size) * size, 0.0);
  const int cells[] = {4, 8, 16};
  const double weights[] = {0.5, 0.3, 0.2};
  for (int o = 0; o < 3; ++o) {
    const int g = cells[o];
    const double step = static_cast<double>(size) / g;
    std::vector<double> grid(static_cast<std::size_t>(g + 1) * (g + 1));
    for (auto& v : grid) v = rng.uniform();
    for (int y = 0; y < size; ++y) {
      const double gy = (y + 0.5) / step;
      const int y0 = std::min(static_cast<int>(gy), g - 1);
      const double ty = smoothstep(gy - y0);
      for (int x = 0; x < size; ++x) {
        const double gx = (x + 0.5) / step;
        const int x0 = std::min(static_cast<int>(gx), g - 1);
        const double tx = smoothstep(gx - x0);
        auto at = [&](int yy, int xx) { return grid[static_cast<std::size_t>(yy) * (g + 1) + xx]; };
        const double top = at(y0, x0) + (at(y0, x0 + 1) - at(y0, x0)) * tx;
        const double bottom = at(y0 + 1, x0) + (at(y0 + 1, x0 + 1) - at(y0 + 1, x0)) * tx;
        out[static_cast<std::size_t>(y) * size + x] += weights[o] * (top + (bottom - top) * ty);
      }
    }
  }
  return out;
}

/// Keeps the 4-connected component of `seed`; clears everything if the seed
/// pixel is background.
void keep_component(std::vector<unsigned char>& blob, int size, int seed) {
  std::vector<unsigned char> keep(blob.size(), 0);
  if (blob[seed]) {
    std::vector<int> stack{seed};
    keep[seed] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int y = i / size, x = i % size;
      const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& p : nb) {
        if (p[0] < 0 || p[0] >= size || p[1] < 0 || p[1] >= size) continue;
        const int j = p[0] * size + p[1];
        if (blob[j] && !keep[j]) {
          keep[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  blob.swap(keep);
}

/// Star-shaped blob r(theta) = r0 (1 + sum a_k cos(k theta + phase_k)).
std::vector<unsigned char> random_blob(Rng& rng, int size) {
  const double cy = rng.uniform(0.2, 0.8) * size;
  const double cx = rng.uniform(0.2, 0.8) * size;
  const double r0 = rng.uniform(0.1, 0.22) * size;
  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = rng.uniform(0.0, 0.15);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  std::vector<unsigned char> blob(static_cast<std::size_t>(size) * size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
      const double theta = std::atan2(dy, dx);
      double r = 1.0;
      for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
      if (std::hypot(dy, dx) <= r0 * r) blob[static_cast<std::size_t>(y) * size + x] = 1;
    }
  }
  const int sy = std::clamp(static_cast<int>(cy), 0, size - 1);
  const int sx = std::clamp(static_cast<int>(cx), 0, size - 1);
  keep_component(blob, size, sy * size + sx);
  return blob;
}

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

}  // namespace

void ImageSample::validate() const {
  if (rgb.n() != 1 || rgb.c() != 3 || mask.n() != 1 || mask.c() != 1 || rgb.h() != mask.h() ||
      rgb.w() != mask.w()) {
    throw DataError("sample " + id + ": image " + rgb.shape().str() + " and mask " +
                    mask.shape().str() + " do not match");
  }
  for (float v : mask.data()) {
    if (v != 0.0f && v != 1.0f) throw DataError("sample " + id + ": mask is not binary");
  }
}

std::filesystem::path DatasetManifest::image_path(const std::string& id) const {
  return root / "images" / (id + ".ppm");
}

std::filesystem::path DatasetManifest::mask_path(const std::string& id) const {
  return root / "masks" / (id + ".pgm");
}

void SynthOptions::validate() const {
  if (size < 32 || size % 32 != 0) {
    throw ConfigError("size " + std::to_string(size) + " is not a positive multiple of 32");
  }
  if (!(contrast_delta > 0.0 && contrast_delta <= 0.5)) {
    throw ConfigError("contrast must lie in (0, 0.5]");
  }
  if (count < 1) throw ConfigError("count must be positive");
  if (max_objects < 1) throw ConfigError("max_objects must be positive");
}

ImageSample synth_sample(const SynthOptions& opts, int index) {
  opts.validate();
  Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(index)));
  const int size = opts.size;
  const std::size_t plane = static_cast<std::size_t>(size) * size;

  const std::vector<double> texture = value_noise(rng, size);
  double base[3], gain[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.35, 0.65);
    gain[c] = rng.uniform(0.7, 1.0);
  }

  std::vector<unsigned char> mask(plane, 0);
  const int objects = rng.uniform_int(1, opts.max_objects);
  for (int o = 0; o < objects; ++o) {
    const auto blob = random_blob(rng, size);
    for (std::size_t i = 0; i < plane; ++i) mask[i] |= blob[i];
  }
  if (std::none_of(mask.begin(), mask.end(), [](unsigned char m) { return m != 0; })) {
    // Degenerate draw: fall back to a small disc at the center.
    const double r = 0.15 * size, c = 0.5 * size;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        if (std::hypot(y + 0.5 - c, x + 0.5 - c) <= r) mask[static_cast<std::size_t>(y) * size + x] = 1;
      }
    }
  }
  const double shift = (rng.uniform() < 0.5 ? -1.0 : 1.0) * opts.contrast_delta;

  ImageSample s;
  s.id = sample_id(index);
  s.rgb = Tensor<float>({1, 3, size, size});
  s.mask = Tensor<float>({1, 1, size, size});
  for (int c = 0; c < 3; ++c) {
    float* out = s.rgb.plane(0, c);
    for (std::size_t i = 0; i < plane; ++i) {
      double v = base[c] + gain[c] * kTextureAmplitude * (texture[i] - 0.5);
      v += kPixelNoise * rng.normal();
      if (mask[i]) v += shift;
      out[i] = static_cast<float>(quantize_unit(static_cast<float>(v))) / 255.0f;
    }
  }
  for (std::size_t i = 0; i < plane; ++i) s.mask[i] = mask[i] ? 1.0f : 0.0f;
  return s;
}

DatasetManifest synth_generate(const std::filesystem::path& root, const SynthOptions& opts) {
  opts.validate();
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  DatasetManifest m;
  m.root = root;
  m.seed = opts.seed;
  m.ids.resize(opts.count);
  parallel_for(opts.count, [&](int i) {
    const ImageSample s = synth_sample(opts, i);
    write_image(m.image_path(s.id), s.rgb);
    write_image(m.mask_path(s.id), s.mask);
    m.ids[i] = s.id;
  });
  std::string text = "seed=" + std::to_string(opts.seed) + "\n";
  for (const auto& id : m.ids) text += id + "\n";
  write_binary_file(root / "manifest.txt", text);
  const std::string leaf = root.filename().string();
  if (leaf == "train" || leaf == "test") m.split = leaf;
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw DataError("missing dataset manifest " + path.string());
  DatasetManifest m;
  m.root = root;
  std::string line;
  if (!std::getline(in, line) || line.rfind("seed=", 0) != 0) {
    throw DataError(path.string() + ": first line must be seed=<u64>");
  }
  try {
    m.seed = std::stoull(line.substr(5));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad seed line '" + line + "'");
  }
  std::string missing;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    m.ids.push_back(line);
    if (!std::filesystem::exists(m.image_path(line))) missing += " " + m.image_path(line).string();
    if (!std::filesystem::exists(m.mask_path(line))) missing += " " + m.mask_path(line).string();
  }
  if (!missing.empty()) throw DataError("dataset files missing:" + missing);
  if (m.ids.empty()) throw DataError("dataset " + root.string() + " is empty");
  const std::string leaf = root.filename().string();
  if (leaf == "train" || leaf == "test") m.split = leaf;
  return m;
}

ImageSample load_sample(const DatasetManifest& manifest, const std::string& id) {
  ImageSample s;
  s.id = id;
  s.rgb = read_image(manifest.image_path(id));
  s.mask = read_image(manifest.mask_path(id));
  if (s.rgb.c() != 3) throw DataError(manifest.image_path(id).string() + " is not an RGB image");
  if (s.mask.c() != 1) throw DataError(manifest.mask_path(id).string() + " is not a gray image");
  for (auto& v : s.mask.data()) v = v >= 0.5f ? 1.0f : 0.0f;
  s.validate();
  return s;
}

std::vector<ImageSample> load_samples(const DatasetManifest& manifest) {
  std::vector<ImageSample> out(manifest.ids.size());
  parallel_for(static_cast<int>(out.size()),
               [&](int i) { out[i] = load_sample(manifest, manifest.ids[i]); });
  return out;
}

int round_to_stride(double extent) {
  const int k = static_cast<int>(std::floor(extent / 32.0 + 0.5));
  return std::max(k, 1) * 32;
}

ImageSample resize_sample_to(const ImageSample& s, int height, int width) {
  if (height == s.rgb.h() && width == s.rgb.w()) return s;
  ImageSample out;
  out.id = s.id;
  out.rgb = Tensor<float>({1, 3, height, width});
  out.mask = Tensor<float>({1, 1, height, width});
  kernels::resize_bilinear(s.rgb, out.rgb);
  kernels::resize_bilinear(s.mask, out.mask);
  for (auto& v : out.mask.data()) v = v >= 0.5f ? 1.0f : 0.0f;
  return out;
}

ImageSample resize_sample(const ImageSample& s, double scale) {
  return resize_sample_to(s, round_to_stride(scale * s.rgb.h()), round_to_stride(scale * s.rgb.w()));
}

int count_components(const Tensor<float>& mask) {
  const int H = mask.h(), W = mask.w();
  std::vector<int> label(static_cast<std::size_t>(H) * W, 0);
  int count = 0;
  for (int start = 0; start < H * W; ++start) {
    if (mask[start] < 0.5f || label[start]) continue;
    ++count;
    std::vector<int> stack{start};
    label[start] = count;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int y = i / W, x = i % W;
      const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& p : nb) {
        if (p[0] < 0 || p[0] >= H || p[1] < 0 || p[1] >= W) continue;
        const int j = p[0] * W + p[1];
        if (mask[j] >= 0.5f && !label[j]) {
          label[j] = count;
          stack.push_back(j);
        }
      }
    }
  }
  return count;
}

}  // namespace c2f

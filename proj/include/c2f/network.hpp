#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/blocks.hpp"

namespace c2f {

/// Network configurations of the ablation study.
enum class Variant {
  kFull,       // RFB + two cascaded ACFM/DGCM stages
  kBasic,      // RFB outputs summed at stride 8
  kBasicAcfm,  // ACFMs connected directly, no DGCM
  kBasicDgcm,  // ACFMs replaced by upsample-and-add
  kMscaConv,   // Full with every MSCA replaced by sigmoid(conv3x3)
};

inline constexpr std::array<Variant, 5> kAllVariants{
    Variant::kBasic, Variant::kBasicAcfm, Variant::kBasicDgcm, Variant::kFull,
    Variant::kMscaConv};

std::string_view variant_name(Variant v) noexcept;

/// Accepts the names returned by variant_name(), case-insensitively.
/// Throws ConfigError for anything else.
Variant parse_variant(std::string_view name);

bool variant_has_acfm(Variant v) noexcept;
bool variant_has_dgcm(Variant v) noexcept;

struct NetworkConfig {
  std::vector<int> backbone_channels{16, 24, 32, 48, 64};
  int rfb_channels = 64;
  int msca_reduction = 4;
  bool msca_bn = true;
  Variant variant = Variant::kFull;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

template <typename T>
struct BackboneStage {
  ConvParams<T> down;  // 3x3 stride 2
  BatchNormState<T> bn1;
  ConvParams<T> conv;  // 3x3 stride 1
  BatchNormState<T> bn2;
};

/// f1..f5 at strides 2, 4, 8, 16, 32.
template <typename T>
struct BackboneFeatures {
  std::array<Var<T>, 5> levels;

  const Var<T>& f(int i) const { return levels.at(i - 1); }
};

template <typename T>
struct NetworkParams {
  NetworkConfig config;
  std::array<BackboneStage<T>, 5> stages;
  RfbParams<T> rfb3, rfb4, rfb5;
  std::optional<AcfmParams<T>> acfm1, acfm2;
  std::optional<DgcmParams<T>> dgcm1, dgcm2;
  ConvParams<T> head;

  /// Allocates every parameter for `config` with zero weights, unit BN scale.
  explicit NetworkParams(NetworkConfig config);

  /// Allocates and initializes from `rng` in a fixed order.
  NetworkParams(NetworkConfig config, Rng& rng);

  /// Every persisted tensor in a fixed order (also the checkpoint order).
  ParamList<T> params();

  std::vector<BatchNormState<T>*> bn_states();
  void set_mode(Mode mode);

  /// Same parameters in another precision.
  template <typename U>
  NetworkParams<U> cast() const;
};

/// Plain five-stage conv backbone. H and W must be divisible by 32.
template <typename T>
BackboneFeatures<T> backbone_forward(const Var<T>& image, NetworkParams<T>& p);

/// Everything after the backbone; reads only f3, f4 and f5.
template <typename T>
Var<T> decode(const BackboneFeatures<T>& features, NetworkParams<T>& p);

/// Logits of shape (n, 1, H/8, W/8).
template <typename T>
Var<T> forward(const Var<T>& image, NetworkParams<T>& p);

/// sigmoid(bilinear resize of logits to out_h x out_w), resized in logit space.
template <typename T>
Tensor<T> predict(const Tensor<T>& logits, int out_h, int out_w);

/// Eval-mode, gradient-free convenience wrapper around forward + predict.
Tensor<float> infer_probabilities(NetworkParams<float>& p, const Tensor<float>& image, int out_h,
                                  int out_w);

// ---------------------------------------------------------- checkpoints

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "C2FN", u32 version, u32 count, then per entry: u16 name length, name,
/// u8 ndim, u32 dims, f32 values. All integers and reals little-endian.
std::string serialize_checkpoint(NetworkParams<float>& p);
std::vector<CheckpointEntry> parse_checkpoint(std::string_view bytes);

/// Recovers the network configuration implied by a checkpoint's entries.
NetworkConfig infer_network_config(const std::vector<CheckpointEntry>& entries);

void save_checkpoint(NetworkParams<float>& p, const std::filesystem::path& path);
NetworkParams<float> load_checkpoint(const std::filesystem::path& path);

/// Throws ParseError(kManifest) naming the first entry that does not match
/// the parameter set of `expected`.
NetworkParams<float> load_checkpoint(const std::filesystem::path& path,
                                     const NetworkConfig& expected);

}  // namespace c2f

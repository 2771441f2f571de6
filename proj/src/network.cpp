#include "c2f/network.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace c2f {

// -------------------------------------------------------------- variants

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::kFull: return "Full";
    case Variant::kBasic: return "Basic";
    case Variant::kBasicAcfm: return "BasicAcfm";
    case Variant::kBasicDgcm: return "BasicDgcm";
    case Variant::kMscaConv: return "MscaConv";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
  };
  const std::string key = lower(name);
  for (Variant v : kAllVariants) {
    if (lower(variant_name(v)) == key) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected Full, Basic, BasicAcfm, BasicDgcm or MscaConv)");
}

bool variant_has_acfm(Variant v) noexcept {
  return v == Variant::kFull || v == Variant::kMscaConv || v == Variant::kBasicAcfm;
}

bool variant_has_dgcm(Variant v) noexcept {
  return v == Variant::kFull || v == Variant::kMscaConv || v == Variant::kBasicDgcm;
}

void NetworkConfig::validate() const {
  if (backbone_channels.size() != 5) {
    throw ConfigError("backbone_channels must list exactly 5 values");
  }
  for (int c : backbone_channels) {
    if (c < 1) throw ConfigError("backbone_channels must be positive");
  }
  if (rfb_channels < 1) throw ConfigError("rfb_channels must be positive");
  if (msca_reduction < 1) throw ConfigError("msca_reduction must be positive");
}

// ------------------------------------------------------------ parameters

template <typename T>
NetworkParams<T>::NetworkParams(NetworkConfig cfg) : config(std::move(cfg)) {
  config.validate();
  const auto& ch = config.backbone_channels;
  for (int i = 0; i < 5; ++i) {
    const int in = i == 0 ? 3 : ch[i - 1];
    stages[i].down = ConvParams<T>(in, ch[i], 3, 3, 2, 1);
    stages[i].bn1 = BatchNormState<T>(ch[i]);
    stages[i].conv = ConvParams<T>(ch[i], ch[i], 3, 3);
    stages[i].bn2 = BatchNormState<T>(ch[i]);
  }
  const int c = config.rfb_channels;
  rfb3 = RfbParams<T>(ch[2], c);
  rfb4 = RfbParams<T>(ch[3], c);
  rfb5 = RfbParams<T>(ch[4], c);
  const AttentionKind kind =
      config.variant == Variant::kMscaConv ? AttentionKind::kConv : AttentionKind::kMsca;
  if (variant_has_acfm(config.variant)) {
    acfm1.emplace(c, kind, config.msca_reduction, config.msca_bn);
    acfm2.emplace(c, kind, config.msca_reduction, config.msca_bn);
  }
  if (variant_has_dgcm(config.variant)) {
    dgcm1.emplace(c, kind, config.msca_reduction, config.msca_bn);
    dgcm2.emplace(c, kind, config.msca_reduction, config.msca_bn);
  }
  head = ConvParams<T>(c, 1, 1, 1);
}

template <typename T>
NetworkParams<T>::NetworkParams(NetworkConfig cfg, Rng& rng) : NetworkParams(std::move(cfg)) {
  for (auto& s : stages) {
    s.down.init(rng);
    s.conv.init(rng);
  }
  rfb3.init(rng);
  rfb4.init(rng);
  rfb5.init(rng);
  if (acfm1) acfm1->init(rng);
  if (dgcm1) dgcm1->init(rng);
  if (acfm2) acfm2->init(rng);
  if (dgcm2) dgcm2->init(rng);
  head.init(rng);
}

template <typename T>
ParamList<T> NetworkParams<T>::params() {
  ParamList<T> out;
  for (int i = 0; i < 5; ++i) {
    const std::string s = "backbone.s" + std::to_string(i + 1);
    stages[i].down.collect(s + ".down", out);
    stages[i].bn1.collect(s + ".bn1", out);
    stages[i].conv.collect(s + ".conv", out);
    stages[i].bn2.collect(s + ".bn2", out);
  }
  rfb3.collect("rfb3", out);
  rfb4.collect("rfb4", out);
  rfb5.collect("rfb5", out);
  if (acfm1) acfm1->collect("acfm1", out);
  if (dgcm1) dgcm1->collect("dgcm1", out);
  if (acfm2) acfm2->collect("acfm2", out);
  if (dgcm2) dgcm2->collect("dgcm2", out);
  head.collect("head", out);
  return out;
}

template <typename T>
std::vector<BatchNormState<T>*> NetworkParams<T>::bn_states() {
  std::vector<BatchNormState<T>*> out;
  for (auto& s : stages) {
    out.push_back(&s.bn1);
    out.push_back(&s.bn2);
  }
  if (acfm1) acfm1->bn_states(out);
  if (dgcm1) dgcm1->bn_states(out);
  if (acfm2) acfm2->bn_states(out);
  if (dgcm2) dgcm2->bn_states(out);
  return out;
}

template <typename T>
void NetworkParams<T>::set_mode(Mode mode) {
  for (auto* bn : bn_states()) bn->mode = mode;
}

template <typename T>
template <typename U>
NetworkParams<U> NetworkParams<T>::cast() const {
  auto& self = const_cast<NetworkParams<T>&>(*this);
  NetworkParams<U> out(config);
  ParamList<T> src = self.params();
  ParamList<U> dst = out.params();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
  const auto bn_src = self.bn_states();
  if (!bn_src.empty()) out.set_mode(bn_src.front()->mode);
  return out;
}

// --------------------------------------------------------------- forward

template <typename T>
BackboneFeatures<T> backbone_forward(const Var<T>& image, NetworkParams<T>& p) {
  const Shape s = image.shape();
  if (s.c != 3) throw ShapeError("backbone: expected an RGB image, got " + s.str());
  if (s.h % 32 != 0 || s.w % 32 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("backbone: image size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " is not divisible by 32; resize the input first");
  }
  BackboneFeatures<T> f;
  Var<T> x = image;
  for (int i = 0; i < 5; ++i) {
    auto& st = p.stages[i];
    x = relu(batch_norm(conv2d(x, st.down), st.bn1));
    x = relu(batch_norm(conv2d(x, st.conv), st.bn2));
    f.levels[i] = x;
  }
  return f;
}

namespace {

template <typename F>
auto at_stage(const char* stage, F&& fn) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

template <typename T>
Var<T> decode(const BackboneFeatures<T>& features, NetworkParams<T>& p) {
  Var<T> r3 = at_stage("rfb3", [&] { return rfb_forward(features.f(3), p.rfb3); });
  Var<T> r4 = at_stage("rfb4", [&] { return rfb_forward(features.f(4), p.rfb4); });
  Var<T> r5 = at_stage("rfb5", [&] { return rfb_forward(features.f(5), p.rfb5); });

  Var<T> top;
  switch (p.config.variant) {
    case Variant::kBasic:
      top = at_stage("basic fusion", [&] {
        return add(add(r3, upsample_bilinear(r4, 2)), upsample_bilinear(r5, 4));
      });
      break;
    case Variant::kBasicAcfm: {
      Var<T> f45 = at_stage("acfm1", [&] { return acfm_forward(r4, r5, *p.acfm1).fused; });
      top = at_stage("acfm2", [&] { return acfm_forward(r3, f45, *p.acfm2).fused; });
      break;
    }
    case Variant::kBasicDgcm: {
      Var<T> f45 = at_stage("fusion 4-5", [&] { return add(r4, upsample_bilinear(r5, 2)); });
      Var<T> d1 = at_stage("dgcm1", [&] { return dgcm_forward(f45, *p.dgcm1); });
      Var<T> f345 = at_stage("fusion 3-45", [&] { return add(r3, upsample_bilinear(d1, 2)); });
      top = at_stage("dgcm2", [&] { return dgcm_forward(f345, *p.dgcm2); });
      break;
    }
    case Variant::kFull:
    case Variant::kMscaConv: {
      Var<T> f45 = at_stage("acfm1", [&] { return acfm_forward(r4, r5, *p.acfm1).fused; });
      Var<T> d1 = at_stage("dgcm1", [&] { return dgcm_forward(f45, *p.dgcm1); });
      Var<T> f345 = at_stage("acfm2", [&] { return acfm_forward(r3, d1, *p.acfm2).fused; });
      top = at_stage("dgcm2", [&] { return dgcm_forward(f345, *p.dgcm2); });
      break;
    }
  }
  return conv2d(top, p.head);
}

template <typename T>
Var<T> forward(const Var<T>& image, NetworkParams<T>& p) {
  return decode(backbone_forward(image, p), p);
}

template <typename T>
Tensor<T> predict(const Tensor<T>& logits, int out_h, int out_w) {
  Tensor<T> up(Shape{logits.n(), logits.c(), out_h, out_w});
  kernels::resize_bilinear(logits, up);
  for (auto& v : up.data()) {
    v = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  return up;
}

Tensor<float> infer_probabilities(NetworkParams<float>& p, const Tensor<float>& image, int out_h,
                                  int out_w) {
  p.set_mode(Mode::kEval);
  Tape<float> tape;
  tape.set_grad_enabled(false);
  Var<float> logits = forward(tape.constant(image), p);
  return predict(logits.value(), out_h, out_w);
}

// ----------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[4] = {'C', '2', 'F', 'N'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(ParseErrorKind::kTruncated,
                       std::string("checkpoint truncated while reading ") + what);
    }
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint64_t uint(std::size_t width, const char* what) {
    std::string_view b = take(width, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string dims_str(const std::vector<std::uint32_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

std::vector<std::uint32_t> dims_of(const Shape& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

const CheckpointEntry* find_entry(const std::vector<CheckpointEntry>& entries,
                                  std::string_view name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const CheckpointEntry* find_suffix(const std::vector<CheckpointEntry>& entries,
                                   std::string_view suffix) {
  for (const auto& e : entries) {
    if (e.name.size() >= suffix.size() &&
        e.name.compare(e.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return &e;
    }
  }
  return nullptr;
}

bool has_prefix(const std::vector<CheckpointEntry>& entries, std::string_view prefix) {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const CheckpointEntry& e) { return e.name.starts_with(prefix); });
}

NetworkParams<float> fill_from_entries(const std::vector<CheckpointEntry>& entries,
                                       const NetworkConfig& config) {
  NetworkParams<float> p(config);
  ParamList<float> list = p.params();
  const std::size_t common = std::min(list.size(), entries.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& e = entries[i];
    const auto want = dims_of(list[i].tensor->shape());
    if (e.name != list[i].name || e.dims != want) {
      throw ParseError(ParseErrorKind::kManifest,
                       "checkpoint manifest mismatch at entry " + std::to_string(i) +
                           ": expected " + list[i].name + " " + dims_str(want) + ", found " +
                           e.name + " " + dims_str(e.dims));
    }
  }
  if (list.size() != entries.size()) {
    const std::size_t i = common;
    const std::string expected =
        i < list.size() ? list[i].name + " " + dims_str(dims_of(list[i].tensor->shape()))
                        : std::string("end of parameters");
    const std::string found =
        i < entries.size() ? entries[i].name + " " + dims_str(entries[i].dims)
                           : std::string("end of checkpoint");
    throw ParseError(ParseErrorKind::kManifest, "checkpoint manifest mismatch at entry " +
                                                    std::to_string(i) + ": expected " +
                                                    expected + ", found " + found);
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::copy(entries[i].values.begin(), entries[i].values.end(), list[i].tensor->data().begin());
  }
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string serialize_checkpoint(NetworkParams<float>& p) {
  ParamList<float> list = p.params();
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(list.size()));
  for (const auto& ref : list) {
    if (!all_finite(*ref.tensor)) {
      throw NumericError("refusing to save non-finite parameter " + ref.name);
    }
    put_u16(out, static_cast<std::uint16_t>(ref.name.size()));
    out += ref.name;
    const auto dims = dims_of(ref.tensor->shape());
    out.push_back(static_cast<char>(dims.size()));
    for (auto d : dims) put_u32(out, d);
    for (float v : ref.tensor->data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<CheckpointEntry> parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw ParseError(ParseErrorKind::kMagic, "not a checkpoint: magic bytes mismatch");
  }
  r.take(4, "magic");
  const auto version = r.uint(4, "version");
  if (version != kCheckpointVersion) {
    throw ParseError(ParseErrorKind::kVersion,
                     "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.uint(4, "entry count");
  std::vector<CheckpointEntry> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto len = r.uint(2, "name length");
    e.name = std::string(r.take(len, "name"));
    const auto ndim = r.uint(1, "ndim");
    std::uint64_t numel = 1;
    for (std::uint64_t d = 0; d < ndim; ++d) {
      e.dims.push_back(static_cast<std::uint32_t>(r.uint(4, "dims")));
      numel *= e.dims.back();
    }
    if (numel > (bytes.size() / 4)) {
      throw ParseError(ParseErrorKind::kTruncated, "checkpoint truncated in entry " + e.name);
    }
    e.values.resize(numel);
    for (auto& v : e.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4, "values")));
    entries.push_back(std::move(e));
  }
  if (!r.done()) {
    throw ParseError(ParseErrorKind::kTruncated, "checkpoint has trailing bytes after entries");
  }
  return entries;
}

NetworkConfig infer_network_config(const std::vector<CheckpointEntry>& entries) {
  NetworkConfig cfg;
  cfg.backbone_channels.assign(5, 0);
  for (int i = 0; i < 5; ++i) {
    const std::string name = "backbone.s" + std::to_string(i + 1) + ".down.weight";
    const CheckpointEntry* e = find_entry(entries, name);
    if (!e || e->dims.empty()) {
      throw ParseError(ParseErrorKind::kManifest, "checkpoint has no entry " + name);
    }
    cfg.backbone_channels[i] = static_cast<int>(e->dims[0]);
  }
  const CheckpointEntry* head = find_entry(entries, "head.weight");
  if (!head || head->dims.size() < 2) {
    throw ParseError(ParseErrorKind::kManifest, "checkpoint has no entry head.weight");
  }
  cfg.rfb_channels = static_cast<int>(head->dims[1]);

  const bool acfm = has_prefix(entries, "acfm1.");
  const bool dgcm = has_prefix(entries, "dgcm1.");
  const bool conv_attention = has_prefix(entries, "acfm1.attention.conv.") ||
                              has_prefix(entries, "dgcm1.attention_c.conv.");
  if (acfm && dgcm) {
    cfg.variant = conv_attention ? Variant::kMscaConv : Variant::kFull;
  } else if (acfm) {
    cfg.variant = Variant::kBasicAcfm;
  } else if (dgcm) {
    cfg.variant = Variant::kBasicDgcm;
  } else {
    cfg.variant = Variant::kBasic;
  }
  if (const CheckpointEntry* m = find_suffix(entries, ".msca.local.reduce.weight")) {
    const int hidden = static_cast<int>(m->dims[0]);
    const int channels = static_cast<int>(m->dims[1]);
    cfg.msca_reduction = std::max(1, channels / std::max(hidden, 1));
    cfg.msca_bn = find_suffix(entries, ".msca.local.bn1.gamma") != nullptr;
  }
  return cfg;
}

void save_checkpoint(NetworkParams<float>& p, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

NetworkParams<float> load_checkpoint(const std::filesystem::path& path) {
  const auto entries = parse_checkpoint(read_file(path));
  return fill_from_entries(entries, infer_network_config(entries));
}

NetworkParams<float> load_checkpoint(const std::filesystem::path& path,
                                     const NetworkConfig& expected) {
  return fill_from_entries(parse_checkpoint(read_file(path)), expected);
}

#define C2F_INSTANTIATE(T)                                                    \
  template struct NetworkParams<T>;                                           \
  template BackboneFeatures<T> backbone_forward(const Var<T>&, NetworkParams<T>&); \
  template Var<T> decode(const BackboneFeatures<T>&, NetworkParams<T>&);      \
  template Var<T> forward(const Var<T>&, NetworkParams<T>&);                  \
  template Tensor<T> predict(const Tensor<T>&, int, int);

C2F_INSTANTIATE(float)
C2F_INSTANTIATE(double)

template NetworkParams<double> NetworkParams<float>::cast<double>() const;
template NetworkParams<float> NetworkParams<double>::cast<float>() const;
template NetworkParams<float> NetworkParams<float>::cast<float>() const;

}  // namespace c2f

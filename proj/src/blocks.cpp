#include "c2f/blocks.hpp"

#include <algorithm>

namespace c2f {
namespace {

template <typename T>
void init_attention(AttentionParams<T>& a, Rng& rng) {
  std::visit([&](auto& p) { p.init(rng); }, a);
}

template <typename T>
void collect_attention(AttentionParams<T>& a, const std::string& prefix, ParamList<T>& out) {
  if (auto* m = std::get_if<MscaParams<T>>(&a)) {
    m->collect(prefix + ".msca", out);
  } else {
    std::get<ConvParams<T>>(a).collect(prefix + ".conv", out);
  }
}

template <typename T>
void attention_bn(AttentionParams<T>& a, std::vector<BatchNormState<T>*>& out) {
  if (auto* m = std::get_if<MscaParams<T>>(&a)) m->bn_states(out);
}

template <typename T>
Var<T> conv_bn_relu(const Var<T>& x, const ConvParams<T>& conv, BatchNormState<T>& bn) {
  return relu(batch_norm(conv2d(x, conv), bn));
}

}  // namespace

// ------------------------------------------------------------------ MSCA

template <typename T>
MscaParams<T>::MscaParams(int channels_, int reduction, bool use_bn_)
    : channels(channels_),
      hidden(std::max(channels_ / std::max(reduction, 1), 1)),
      use_bn(use_bn_),
      local_reduce(channels_, hidden, 1, 1),
      local_expand(hidden, channels_, 1, 1),
      local_bn1(hidden),
      local_bn2(channels_),
      global_reduce(channels_, hidden, 1, 1),
      global_expand(hidden, channels_, 1, 1),
      global_bn1(hidden),
      global_bn2(channels_) {}

template <typename T>
void MscaParams<T>::init(Rng& rng) {
  local_reduce.init(rng);
  local_expand.init(rng);
  global_reduce.init(rng);
  global_expand.init(rng);
}

template <typename T>
void MscaParams<T>::collect(const std::string& prefix, ParamList<T>& out) {
  local_reduce.collect(prefix + ".local.reduce", out);
  if (use_bn) local_bn1.collect(prefix + ".local.bn1", out);
  local_expand.collect(prefix + ".local.expand", out);
  if (use_bn) local_bn2.collect(prefix + ".local.bn2", out);
  global_reduce.collect(prefix + ".global.reduce", out);
  if (use_bn) global_bn1.collect(prefix + ".global.bn1", out);
  global_expand.collect(prefix + ".global.expand", out);
  if (use_bn) global_bn2.collect(prefix + ".global.bn2", out);
}

template <typename T>
void MscaParams<T>::bn_states(std::vector<BatchNormState<T>*>& out) {
  if (!use_bn) return;
  out.insert(out.end(), {&local_bn1, &local_bn2, &global_bn1, &global_bn2});
}

template <typename T>
Var<T> msca_forward(const Var<T>& x, MscaParams<T>& p) {
  if (x.shape().c != p.channels) {
    throw ShapeError("msca: input " + x.shape().str() + " does not have " +
                     std::to_string(p.channels) + " channels");
  }
  auto bottleneck = [&](Var<T> v, const ConvParams<T>& reduce, BatchNormState<T>& bn1,
                        const ConvParams<T>& expand, BatchNormState<T>& bn2) {
    v = conv2d(v, reduce);
    if (p.use_bn) v = batch_norm(v, bn1);
    v = relu(v);
    v = conv2d(v, expand);
    if (p.use_bn) v = batch_norm(v, bn2);
    return v;
  };
  Var<T> local = bottleneck(x, p.local_reduce, p.local_bn1, p.local_expand, p.local_bn2);
  Var<T> global = bottleneck(global_avg_pool(x), p.global_reduce, p.global_bn1, p.global_expand,
                             p.global_bn2);
  return sigmoid(add(local, global));
}

template <typename T>
Var<T> msca_conv_substitute(const Var<T>& x, const ConvParams<T>& p) {
  if (p.weight.h() != 3 || p.weight.w() != 3 || p.in_channels() != p.out_channels() ||
      p.stride != 1) {
    throw ContractError("msca_conv_substitute: expects a 3x3 channel-preserving stride-1 conv");
  }
  return sigmoid(conv2d(x, p));
}

template <typename T>
AttentionParams<T> make_attention(AttentionKind kind, int channels, int reduction, bool use_bn) {
  if (kind == AttentionKind::kMsca) return MscaParams<T>(channels, reduction, use_bn);
  return ConvParams<T>(channels, channels, 3, 3);
}

template <typename T>
Var<T> attention_forward(const Var<T>& x, AttentionParams<T>& p) {
  if (auto* m = std::get_if<MscaParams<T>>(&p)) return msca_forward(x, *m);
  return msca_conv_substitute(x, std::get<ConvParams<T>>(p));
}

// ------------------------------------------------------------------- RFB

template <typename T>
RfbParams<T>::RfbParams(int in_channels, int out_channels_)
    : out_channels(out_channels_),
      branch1(in_channels, out_channels_, 1, 1),
      shortcut(in_channels, out_channels_, 1, 1),
      merge(4 * out_channels_, out_channels_, 1, 1) {
  for (int k = 2; k <= 4; ++k) {
    const int size = 2 * k - 1;
    Branch& b = branches[k - 2];
    b.reduce = ConvParams<T>(in_channels, out_channels_, 1, 1);
    b.wide = ConvParams<T>(out_channels_, out_channels_, size, size);
    b.dilated = ConvParams<T>(out_channels_, out_channels_, 3, 3, 1, size);
  }
}

template <typename T>
void RfbParams<T>::init(Rng& rng) {
  branch1.init(rng);
  for (auto& b : branches) {
    b.reduce.init(rng);
    b.wide.init(rng);
    b.dilated.init(rng);
  }
  shortcut.init(rng);
  merge.init(rng);
}

template <typename T>
void RfbParams<T>::collect(const std::string& prefix, ParamList<T>& out) {
  branch1.collect(prefix + ".b1", out);
  for (int k = 2; k <= 4; ++k) {
    const std::string b = prefix + ".b" + std::to_string(k);
    branches[k - 2].reduce.collect(b + ".reduce", out);
    branches[k - 2].wide.collect(b + ".wide", out);
    branches[k - 2].dilated.collect(b + ".dilated", out);
  }
  shortcut.collect(prefix + ".b5", out);
  merge.collect(prefix + ".merge", out);
}

template <typename T>
Var<T> rfb_forward(const Var<T>& x, const RfbParams<T>& p) {
  if (x.shape().c != p.branch1.in_channels()) {
    throw ShapeError("rfb: input " + x.shape().str() + " does not have " +
                     std::to_string(p.branch1.in_channels()) + " channels");
  }
  std::vector<Var<T>> outs;
  outs.reserve(4);
  outs.push_back(conv2d(x, p.branch1));
  for (const auto& b : p.branches) {
    outs.push_back(conv2d(conv2d(conv2d(x, b.reduce), b.wide), b.dilated));
  }
  Var<T> merged = conv2d(concat_channels<T>(outs), p.merge);
  return relu(add(merged, conv2d(x, p.shortcut)));
}

// ------------------------------------------------------------------ ACFM

template <typename T>
AcfmParams<T>::AcfmParams(int channels, AttentionKind kind, int reduction, bool msca_bn)
    : attention(make_attention<T>(kind, channels, reduction, msca_bn)),
      fuse(channels, channels, 3, 3),
      fuse_bn(channels) {}

template <typename T>
void AcfmParams<T>::init(Rng& rng) {
  init_attention(attention, rng);
  fuse.init(rng);
}

template <typename T>
void AcfmParams<T>::collect(const std::string& prefix, ParamList<T>& out) {
  collect_attention(attention, prefix + ".attention", out);
  fuse.collect(prefix + ".fuse", out);
  fuse_bn.collect(prefix + ".fuse_bn", out);
}

template <typename T>
void AcfmParams<T>::bn_states(std::vector<BatchNormState<T>*>& out) {
  attention_bn(attention, out);
  out.push_back(&fuse_bn);
}

template <typename T>
AcfmOutput<T> acfm_forward(const Var<T>& fa, const Var<T>& fb, AcfmParams<T>& p) {
  const Shape sa = fa.shape(), sb = fb.shape();
  if (sa.n != sb.n || sa.c != sb.c || sa.h != 2 * sb.h || sa.w != 2 * sb.w) {
    throw ShapeError("acfm: high-level input " + sb.str() +
                     " must have half the spatial size of " + sa.str());
  }
  Var<T> fb_up = upsample_bilinear(fb, 2);
  Var<T> attention = attention_forward(add(fa, fb_up), p.attention);
  Var<T> pre = add(mul(attention, fa), mul(one_minus(attention), fb_up));
  Var<T> fused = conv_bn_relu(pre, p.fuse, p.fuse_bn);
  return {fused, pre};
}

// ------------------------------------------------------------------ DGCM

template <typename T>
DgcmParams<T>::DgcmParams(int channels, AttentionKind kind, int reduction, bool msca_bn)
    : conv_c(channels, channels, 3, 3),
      conv_p(channels, channels, 3, 3),
      attention_c(make_attention<T>(kind, channels, reduction, msca_bn)),
      attention_p(make_attention<T>(kind, channels, reduction, msca_bn)),
      conv_merge(channels, channels, 3, 3),
      conv_out(channels, channels, 3, 3) {}

template <typename T>
void DgcmParams<T>::init(Rng& rng) {
  conv_c.init(rng);
  conv_p.init(rng);
  init_attention(attention_c, rng);
  init_attention(attention_p, rng);
  conv_merge.init(rng);
  conv_out.init(rng);
}

template <typename T>
void DgcmParams<T>::collect(const std::string& prefix, ParamList<T>& out) {
  conv_c.collect(prefix + ".conv_c", out);
  conv_p.collect(prefix + ".conv_p", out);
  collect_attention(attention_c, prefix + ".attention_c", out);
  collect_attention(attention_p, prefix + ".attention_p", out);
  conv_merge.collect(prefix + ".conv_merge", out);
  conv_out.collect(prefix + ".conv_out", out);
}

template <typename T>
void DgcmParams<T>::bn_states(std::vector<BatchNormState<T>*>& out) {
  attention_bn(attention_c, out);
  attention_bn(attention_p, out);
}

template <typename T>
Var<T> dgcm_forward(const Var<T>& f, DgcmParams<T>& p) {
  const Shape s = f.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("dgcm: spatial size of " + s.str() +
                     " must be even; pad or resize the input to a multiple of 32");
  }
  Var<T> fc = conv2d(f, p.conv_c);
  Var<T> fcm = mul(fc, attention_forward(fc, p.attention_c));
  Var<T> fp = conv2d(avg_pool(f, 2, 2), p.conv_p);
  Var<T> fpm = mul(fp, attention_forward(fp, p.attention_p));
  Var<T> fcpm = conv2d(add(fcm, upsample_bilinear(fpm, 2)), p.conv_merge);
  return conv2d(add(f, fcpm), p.conv_out);
}

#define C2F_INSTANTIATE(T)                                                                 \
  template struct MscaParams<T>;                                                           \
  template struct RfbParams<T>;                                                            \
  template struct AcfmParams<T>;                                                           \
  template struct DgcmParams<T>;                                                           \
  template AttentionParams<T> make_attention<T>(AttentionKind, int, int, bool);            \
  template Var<T> msca_forward(const Var<T>&, MscaParams<T>&);                             \
  template Var<T> msca_conv_substitute(const Var<T>&, const ConvParams<T>&);               \
  template Var<T> attention_forward(const Var<T>&, AttentionParams<T>&);                   \
  template AcfmOutput<T> acfm_forward(const Var<T>&, const Var<T>&, AcfmParams<T>&);       \
  template Var<T> dgcm_forward(const Var<T>&, DgcmParams<T>&);                             \
  template Var<T> rfb_forward(const Var<T>&, const RfbParams<T>&);

C2F_INSTANTIATE(float)
C2F_INSTANTIATE(double)

}  // namespace c2f

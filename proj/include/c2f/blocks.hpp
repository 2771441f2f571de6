#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "c2f/layers.hpp"
#include "c2f/ops.hpp"

namespace c2f {

/// Multi-scale channel attention: a local branch at full resolution and a
/// global branch on pooled context, each a pointwise bottleneck
/// C -> max(C/r, 1) -> C. The branches do not share weights.
template <typename T>
struct MscaParams {
  int channels = 0;
  int hidden = 0;
  bool use_bn = true;
  ConvParams<T> local_reduce, local_expand;
  BatchNormState<T> local_bn1, local_bn2;
  ConvParams<T> global_reduce, global_expand;
  BatchNormState<T> global_bn1, global_bn2;

  MscaParams() = default;
  MscaParams(int channels, int reduction, bool use_bn);

  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList<T>& out);
  void bn_states(std::vector<BatchNormState<T>*>& out);
};

/// Attention slot of ACFM/DGCM: MSCA, or the plain 3x3 conv used by the
/// MSCA->Conv ablation.
template <typename T>
using AttentionParams = std::variant<MscaParams<T>, ConvParams<T>>;

enum class AttentionKind { kMsca, kConv };

template <typename T>
AttentionParams<T> make_attention(AttentionKind kind, int channels, int reduction, bool use_bn);

/// Receptive field block. Branch 1 is a 1x1 conv; branch k in {2,3,4} is a
/// 1x1 reduction, a (2k-1)x(2k-1) conv and a 3x3 conv with dilation 2k-1;
/// the shortcut is a 1x1 conv added after the 1x1 merge of branches 1-4.
template <typename T>
struct RfbParams {
  struct Branch {
    ConvParams<T> reduce, wide, dilated;
  };

  int out_channels = 0;
  ConvParams<T> branch1;
  std::array<Branch, 3> branches;  // k = 2, 3, 4
  ConvParams<T> shortcut;
  ConvParams<T> merge;

  RfbParams() = default;
  RfbParams(int in_channels, int out_channels);

  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList<T>& out);
};

/// Attention-induced cross-level fusion.
template <typename T>
struct AcfmParams {
  AttentionParams<T> attention;
  ConvParams<T> fuse;
  BatchNormState<T> fuse_bn;

  AcfmParams() = default;
  AcfmParams(int channels, AttentionKind kind, int reduction, bool msca_bn);

  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList<T>& out);
  void bn_states(std::vector<BatchNormState<T>*>& out);
};

/// Dual-branch global context module.
template <typename T>
struct DgcmParams {
  ConvParams<T> conv_c;
  ConvParams<T> conv_p;
  AttentionParams<T> attention_c;
  AttentionParams<T> attention_p;
  ConvParams<T> conv_merge;
  ConvParams<T> conv_out;

  DgcmParams() = default;
  DgcmParams(int channels, AttentionKind kind, int reduction, bool msca_bn);

  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList<T>& out);
  void bn_states(std::vector<BatchNormState<T>*>& out);
};

/// sigmoid(local(x) + broadcast(global(gap(x)))); every element lies in (0, 1).
template <typename T>
Var<T> msca_forward(const Var<T>& x, MscaParams<T>& p);

/// sigmoid(conv3x3(x)); stands in for MSCA in the MSCA->Conv variant.
template <typename T>
Var<T> msca_conv_substitute(const Var<T>& x, const ConvParams<T>& p);

template <typename T>
Var<T> attention_forward(const Var<T>& x, AttentionParams<T>& p);

template <typename T>
struct AcfmOutput {
  Var<T> fused;       // relu(BN(conv3x3(pre)))
  Var<T> pre_fusion;  // A*Fa + (1-A)*up(Fb)
};

/// Fb must have exactly half the spatial size of Fa.
///   S = Fa + up2(Fb), A = attention(S), pre = A*Fa + (1-A)*up2(Fb)
template <typename T>
AcfmOutput<T> acfm_forward(const Var<T>& fa, const Var<T>& fb, AcfmParams<T>& p);

/// Fc  = conv_c(F)           Fcm = Fc * att_c(Fc)
/// Fp  = conv_p(pool2(F))     Fpm = Fp * att_p(Fp)
/// F'  = conv_out(F + conv_merge(Fcm + up2(Fpm)))
/// Requires even spatial extents.
template <typename T>
Var<T> dgcm_forward(const Var<T>& f, DgcmParams<T>& p);

/// relu(merge(concat(b1..b4)) + shortcut(x)); preserves spatial size.
template <typename T>
Var<T> rfb_forward(const Var<T>& x, const RfbParams<T>& p);

}  // namespace c2f

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "c2f/blocks.hpp"
#include "c2f/error.hpp"
#include "c2f/rng.hpp"
#include "c2f/verify/oracles.hpp"

using namespace c2f;

namespace {

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Pointwise bottleneck reduce -> relu -> expand on one channel vector.
std::vector<double> bottleneck(const ConvParams<double>& reduce, const ConvParams<double>& expand,
                               const std::vector<double>& v) {
  std::vector<double> hidden(reduce.out_channels()), out(expand.out_channels());
  for (int h = 0; h < reduce.out_channels(); ++h) {
    double s = reduce.bias[h];
    for (std::size_t c = 0; c < v.size(); ++c) s += reduce.weight.at(h, c, 0, 0) * v[c];
    hidden[h] = std::max(s, 0.0);
  }
  for (int c = 0; c < expand.out_channels(); ++c) {
    double s = expand.bias[c];
    for (int h = 0; h < reduce.out_channels(); ++h) s += expand.weight.at(c, h, 0, 0) * hidden[h];
    out[c] = s;
  }
  return out;
}

}  // namespace

TEST(Msca, ZeroWeightsGiveHalf) {
  Tape<float> tape;
  MscaParams<float> p(8, 4, true);
  Rng rng(1);
  const auto a = msca_forward(tape.constant(random_tensor<float>(rng, {2, 8, 5, 5})), p).value();
  for (float v : a.data()) EXPECT_EQ(v, 0.5f);
}

TEST(Msca, OutputStrictlyInsideUnitInterval) {
  Rng rng(2);
  MscaParams<float> p(6, 4, true);
  p.init(rng);
  EXPECT_EQ(p.hidden, 1);
  Tape<float> tape;
  const auto a =
      msca_forward(tape.constant(random_tensor<float>(rng, {2, 6, 4, 4}, -5, 5)), p).value();
  for (float v : a.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Msca, ChannelMismatchRejected) {
  MscaParams<float> p(8, 4, true);
  Tape<float> tape;
  EXPECT_THROW(msca_forward(tape.constant(Tensor<float>({1, 4, 3, 3})), p), ShapeError);
}

TEST(Msca, ConstantInputMatchesScalarPipeline) {
  Rng rng(3);
  MscaParams<double> p(4, 2, false);
  p.init(rng);
  for (auto* conv : {&p.local_reduce, &p.local_expand, &p.global_reduce, &p.global_expand}) {
    for (auto& v : conv->bias.data()) v = rng.uniform(-0.5, 0.5);
  }
  const std::vector<double> v{0.3, -1.2, 0.8, 2.0};
  Tensor<double> x({1, 4, 5, 6});
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 30; ++i) x.plane(0, c)[i] = v[c];
  Tape<double> tape;
  const auto a = msca_forward(tape.constant(x), p).value();
  const auto local = bottleneck(p.local_reduce, p.local_expand, v);
  const auto global = bottleneck(p.global_reduce, p.global_expand, v);
  for (int c = 0; c < 4; ++c) {
    const double expect = sigmoid_scalar(local[c] + global[c]);
    for (int i = 0; i < 30; ++i) EXPECT_NEAR(a.plane(0, c)[i], expect, 1e-12);
  }
}

TEST(MscaConv, ZeroWeightsAndRange) {
  ConvParams<float> p(3, 3, 3, 3);
  Tape<float> tape;
  Rng rng(4);
  const auto x = tape.constant(random_tensor<float>(rng, {1, 3, 5, 5}, -4, 4));
  for (float v : msca_conv_substitute(x, p).value().data()) EXPECT_EQ(v, 0.5f);
  p.init(rng);
  for (float v : msca_conv_substitute(x, p).value().data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Acfm, EqualInputsPassThrough) {
  Rng rng(5);
  AcfmParams<double> p(4, AttentionKind::kMsca, 2, true);
  p.init(rng);
  Tape<double> tape;
  const auto fb = random_tensor<double>(rng, {2, 4, 3, 3});
  const auto fa = upsample_bilinear(tape.constant(fb), 2).value();
  const auto out = acfm_forward(tape.constant(fa), tape.constant(fb), p);
  for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_NEAR(out.pre_fusion.value()[i], fa[i], 1e-12);
}

TEST(Acfm, ZeroAttentionWeightsAverage) {
  Rng rng(6);
  AcfmParams<float> p(4, AttentionKind::kMsca, 2, true);
  Tape<float> tape;
  const auto fa = random_tensor<float>(rng, {2, 4, 6, 6});
  const auto fb = random_tensor<float>(rng, {2, 4, 3, 3});
  const auto up = upsample_bilinear(tape.constant(fb), 2).value();
  const auto pre = acfm_forward(tape.constant(fa), tape.constant(fb), p).pre_fusion.value();
  for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_NEAR(pre[i], 0.5f * fa[i] + 0.5f * up[i], 1e-6);
}

TEST(Acfm, ConvexEnvelope) {
  Rng rng(7);
  for (AttentionKind kind : {AttentionKind::kMsca, AttentionKind::kConv}) {
    AcfmParams<float> p(4, kind, 2, true);
    p.init(rng);
    for (int trial = 0; trial < 20; ++trial) {
      Tape<float> tape;
      const auto fa = random_tensor<float>(rng, {2, 4, 6, 6}, -3, 3);
      const auto fb = random_tensor<float>(rng, {2, 4, 3, 3}, -3, 3);
      const auto up = upsample_bilinear(tape.constant(fb), 2).value();
      const auto out = acfm_forward(tape.constant(fa), tape.constant(fb), p);
      const auto& pre = out.pre_fusion.value();
      for (std::size_t i = 0; i < fa.size(); ++i) {
        EXPECT_GE(pre[i], std::min(fa[i], up[i]));
        EXPECT_LE(pre[i], std::max(fa[i], up[i]));
      }
      EXPECT_EQ(out.fused.shape(), fa.shape());
    }
  }
}

TEST(Acfm, RequiresHalfSizeSecondInput) {
  AcfmParams<float> p(4, AttentionKind::kMsca, 2, true);
  Tape<float> tape;
  EXPECT_THROW(acfm_forward(tape.constant(Tensor<float>({1, 4, 6, 6})),
                            tape.constant(Tensor<float>({1, 4, 4, 4})), p),
               ShapeError);
}

TEST(Dgcm, PreservesShape) {
  Rng rng(8);
  DgcmParams<float> p(16, AttentionKind::kMsca, 4, true);
  p.init(rng);
  std::vector<BatchNormState<float>*> bns;
  p.bn_states(bns);
  for (auto* bn : bns) bn->mode = Mode::kEval;
  Tape<float> tape;
  EXPECT_EQ(dgcm_forward(tape.constant(random_tensor<float>(rng, {1, 16, 8, 8})), p).shape(),
            (Shape{1, 16, 8, 8}));
}

TEST(Dgcm, ResidualPathIsolation) {
  Rng rng(9);
  DgcmParams<float> p(3, AttentionKind::kMsca, 2, true);
  Tape<float> tape;
  const auto x = random_tensor<float>(rng, {2, 3, 6, 6});
  for (float v : dgcm_forward(tape.constant(x), p).value().data()) EXPECT_EQ(v, 0.0f);
  for (int c = 0; c < 3; ++c) p.conv_out.weight.at(c, c, 1, 1) = 1.0f;
  Tape<float> fresh;
  const auto y = dgcm_forward(fresh.constant(x), p).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]) << i;
}

TEST(Dgcm, OddSizeAsksForPadding) {
  DgcmParams<float> p(2, AttentionKind::kMsca, 2, true);
  Tape<float> tape;
  try {
    dgcm_forward(tape.constant(Tensor<float>({1, 2, 5, 6})), p);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos) << e.what();
  }
}

TEST(Dgcm, MatchesStepByStepOracle) {
  Rng rng(10);
  const int C = 3;
  DgcmParams<double> p(C, AttentionKind::kMsca, 2, false);
  p.init(rng);
  for (auto* conv : {&p.conv_c, &p.conv_p, &p.conv_merge, &p.conv_out}) {
    for (auto& v : conv->bias.data()) v = rng.uniform(-0.5, 0.5);
  }
  const auto f = random_tensor<double>(rng, {1, C, 6, 6});

  auto conv = [](const Tensor<double>& x, const ConvParams<double>& c) {
    return verify::naive_conv2d(x, c.weight, &c.bias, c.stride, c.dilation);
  };
  auto attend = [&](const Tensor<double>& x, AttentionParams<double>& ap) {
    auto& m = std::get<MscaParams<double>>(ap);
    Tensor<double> out(x.shape());
    std::vector<double> mean(C, 0.0);
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < x.h() * x.w(); ++i) mean[c] += x.plane(0, c)[i];
      mean[c] /= x.h() * x.w();
    }
    const auto global = bottleneck(m.global_reduce, m.global_expand, mean);
    for (int i = 0; i < x.h() * x.w(); ++i) {
      std::vector<double> v(C);
      for (int c = 0; c < C; ++c) v[c] = x.plane(0, c)[i];
      const auto local = bottleneck(m.local_reduce, m.local_expand, v);
      for (int c = 0; c < C; ++c) out.plane(0, c)[i] = x.plane(0, c)[i] * sigmoid_scalar(local[c] + global[c]);
    }
    return out;
  };
  const auto fcm = attend(conv(f, p.conv_c), p.attention_c);
  const auto fpm = attend(conv(verify::naive_avg_pool(f, 2, 2), p.conv_p), p.attention_p);
  auto merged = verify::naive_resize_bilinear(fpm, 6, 6);
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i] += fcm[i];
  auto residual = conv(merged, p.conv_merge);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] += f[i];
  const auto expect = conv(residual, p.conv_out);

  Tape<double> tape;
  const auto got = dgcm_forward(tape.constant(f), p).value();
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-5);
}

TEST(Rfb, ShapeContract) {
  Rng rng(11);
  RfbParams<float> p(32, 64);
  p.init(rng);
  Tape<float> tape;
  EXPECT_EQ(rfb_forward(tape.constant(random_tensor<float>(rng, {1, 32, 16, 16})), p).shape(),
            (Shape{1, 64, 16, 16}));
}

TEST(Rfb, ZeroWeightsGiveZero) {
  RfbParams<float> p(3, 4);
  Tape<float> tape;
  Rng rng(12);
  for (float v : rfb_forward(tape.constant(random_tensor<float>(rng, {1, 3, 8, 8})), p).value().data()) {
    EXPECT_EQ(v, 0.0f);
  }
}

TEST(Rfb, ImpulseResponseSupport) {
  Rng rng(13);
  RfbParams<double> p(1, 2);
  p.init(rng);
  ParamList<double> params;
  p.collect("rfb", params);
  for (auto& ref : params) {
    for (auto& v : ref.tensor->data()) v = std::fabs(v) + 0.01;
    if (ref.name.ends_with(".bias")) ref.tensor->fill(0.0);
  }
  const int size = 41, c = 20;
  Tensor<double> x({1, 1, size, size});
  x.at(0, 0, c, c) = 1.0;
  Tape<double> tape;
  const auto y = rfb_forward(tape.constant(x), p).value();
  int reach = 0;
  for (int yy = 0; yy < size; ++yy)
    for (int xx = 0; xx < size; ++xx) {
      if (y.at(0, 0, yy, xx) != 0.0) reach = std::max({reach, std::abs(yy - c), std::abs(xx - c)});
    }
  // 7x7 then 3x3 at dilation 7 reaches 3 + 7 pixels.
  EXPECT_EQ(reach, 10);
  EXPECT_LE(reach, 13);
}

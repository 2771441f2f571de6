#include <gtest/gtest.h>

#include <cmath>

#include "c2f/error.hpp"
#include "c2f/losses.hpp"
#include "c2f/rng.hpp"
#include "c2f/verify/oracles.hpp"

using namespace c2f;

namespace {

Tensor<double> random_mask(Rng& rng, Shape s, double p = 0.4) {
  Tensor<double> g(s);
  for (auto& v : g.data()) v = rng.uniform(0, 1) < p ? 1.0 : 0.0;
  return g;
}

Tensor<double> saturated(const Tensor<double>& g, double z = 20.0) {
  Tensor<double> out(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] > 0.5 ? z : -z;
  return out;
}

double scalar(const Var<double>& v) { return v.value()[0]; }

}  // namespace

TEST(WeightMap, ConstantMasksGiveUnitWeight) {
  for (double fill : {0.0, 1.0}) {
    const auto w = weight_map(Tensor<double>({1, 1, 12, 9}, fill));
    for (double v : w.data()) EXPECT_EQ(v, 1.0);
  }
}

TEST(WeightMap, SinglePixelHandCase) {
  Tensor<double> g({1, 1, 9, 9});
  g.at(0, 0, 4, 4) = 1.0;
  const auto w = weight_map(g, LossOptions{5.0, 3});
  EXPECT_NEAR(w.at(0, 0, 4, 4), 1.0 + 5.0 * (8.0 / 9.0), 1e-12);
  EXPECT_NEAR(w.at(0, 0, 4, 5), 1.0 + 5.0 / 9.0, 1e-12);
  EXPECT_EQ(w.at(0, 0, 0, 0), 1.0);
}

TEST(WeightMap, MatchesOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = random_mask(rng, {2, 1, 17, 23});
    const auto w = weight_map(g, LossOptions{5.0, 7});
    const auto ref = verify::reference_weight_map(g, 5.0, 7);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], ref[i], 1e-12);
  }
}

TEST(WeightMap, RejectsNonBinaryMask) {
  Tensor<double> g({1, 1, 4, 4});
  g[3] = 0.5;
  EXPECT_THROW(weight_map(g), DataError);
}

TEST(WeightedBce, SaturatedLogitsVanish) {
  Rng rng(2);
  const auto g = random_mask(rng, {2, 1, 8, 8});
  Tape<double> tape;
  EXPECT_LT(scalar(weighted_bce(tape.constant(saturated(g)), g, weight_map(g))), 1e-8);
}

TEST(WeightedBce, ZeroLogitsGiveLogTwo) {
  Rng rng(3);
  const auto g = random_mask(rng, {2, 1, 8, 8});
  Tensor<double> w(g.shape());
  for (auto& v : w.data()) v = rng.uniform(0.5, 3.0);
  Tape<double> tape;
  EXPECT_NEAR(scalar(weighted_bce(tape.constant(Tensor<double>(g.shape())), g, w)), std::log(2.0), 1e-12);
}

TEST(WeightedBce, ScaleInvariantInWeights) {
  Rng rng(4);
  const auto g = random_mask(rng, {1, 1, 6, 6});
  Tensor<double> z(g.shape()), w(g.shape()), w3(g.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = rng.uniform(-3, 3);
    w[i] = rng.uniform(1, 4);
    w3[i] = 3.0 * w[i];
  }
  Tape<double> tape;
  const auto x = tape.constant(z);
  EXPECT_NEAR(scalar(weighted_bce(x, g, w)), scalar(weighted_bce(x, g, w3)), 1e-12);
}

TEST(WeightedBce, RejectsShapeMismatch) {
  Tape<double> tape;
  const Tensor<double> g({1, 1, 4, 4});
  EXPECT_THROW(weighted_bce(tape.constant(Tensor<double>({1, 1, 4, 5})), g, g), ShapeError);
}

TEST(WeightedIou, HandCase) {
  const Tensor<double> g({1, 1, 4, 4}, 1.0);
  Tape<double> tape;
  const auto z = tape.constant(Tensor<double>(g.shape(), -60.0));
  EXPECT_NEAR(scalar(weighted_iou(z, g, Tensor<double>(g.shape(), 1.0))), 16.0 / 17.0, 1e-9);
}

TEST(WeightedIou, PerfectPredictionVanishes) {
  Rng rng(5);
  const auto g = random_mask(rng, {2, 1, 8, 8});
  Tape<double> tape;
  EXPECT_LT(scalar(weighted_iou(tape.constant(saturated(g, 40)), g, weight_map(g))), 1e-9);
}

TEST(WeightedIou, StaysInUnitInterval) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_mask(rng, {1, 1, 5, 5});
    Tensor<double> z(g.shape());
    for (auto& v : z.data()) v = rng.uniform(-8, 8);
    Tape<double> tape;
    const double loss = scalar(weighted_iou(tape.constant(z), g, weight_map(g, {5.0, 3})));
    EXPECT_GE(loss, 0.0);
    EXPECT_LT(loss, 1.0);
  }
}

TEST(Losses, MatchOracles) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = random_mask(rng, {2, 1, 9, 11});
    Tensor<double> z(g.shape());
    for (auto& v : z.data()) v = rng.uniform(-5, 5);
    const auto w = weight_map(g, {5.0, 5});
    Tape<double> tape;
    const auto x = tape.constant(z);
    EXPECT_NEAR(scalar(weighted_bce(x, g, w)), verify::reference_weighted_bce(z, g, w), 1e-10);
    EXPECT_NEAR(scalar(weighted_iou(x, g, w)), verify::reference_weighted_iou(z, g, w), 1e-10);
  }
}

TEST(TotalLoss, SumOfTermsAtGroundTruthSize) {
  Rng rng(8);
  const auto g = random_mask(rng, {2, 1, 16, 16});
  Tensor<double> z({2, 1, 4, 4});
  for (auto& v : z.data()) v = rng.uniform(-3, 3);
  Tape<double> tape;
  const auto terms = total_loss(tape.constant(z), g, {5.0, 7});
  EXPECT_NEAR(scalar(terms.total), scalar(terms.bce) + scalar(terms.iou), 1e-12);
  const auto up = verify::naive_resize_bilinear(z, 16, 16);
  const auto w = verify::reference_weight_map(g, 5.0, 7);
  EXPECT_NEAR(scalar(terms.bce), verify::reference_weighted_bce(up, g, w), 1e-10);
}

TEST(TotalLoss, PerfectPredictionVanishes) {
  Rng rng(9);
  const auto g = random_mask(rng, {1, 1, 8, 8});
  Tape<double> tape;
  EXPECT_LT(scalar(total_loss(tape.constant(saturated(g, 40)), g).total), 1e-6);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "c2f/image_io.hpp"
#include "c2f/metrics.hpp"
#include "c2f/rng.hpp"
#include "c2f/verify/oracles.hpp"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

GrayMap random_binary(Rng& rng, int h, int w, double p = 0.4) {
  GrayMap m(h, w);
  for (auto& v : m.values) v = rng.uniform(0, 1) < p ? 1.0 : 0.0;
  return m;
}

GrayMap random_soft(Rng& rng, int h, int w) {
  GrayMap m(h, w);
  for (auto& v : m.values) v = std::round(rng.uniform(0, 1) * 255.0) / 255.0;
  return m;
}

GrayMap blob(int h, int w) {
  GrayMap m(h, w);
  for (int y = h / 4; y < 3 * h / 4; ++y)
    for (int x = w / 3; x < 3 * w / 4; ++x) m.at(y, x) = 1.0;
  return m;
}

Tensor<float> as_tensor(const GrayMap& m) {
  Tensor<float> t({1, 1, m.height, m.width});
  for (std::size_t i = 0; i < m.size(); ++i) t[i] = static_cast<float>(m.values[i]);
  return t;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("c2f_metrics_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  return dir;
}

}  // namespace

TEST(Mae, Examples) {
  const auto g = blob(8, 8);
  EXPECT_EQ(mae({g, g}), 0.0);
  EXPECT_EQ(mae({GrayMap(4, 4, 1.0), GrayMap(4, 4, 0.0)}), 1.0);
}

TEST(Mae, SymmetricAndMonotone) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_soft(rng, 8, 8);
    const auto b = random_binary(rng, 8, 8);
    const double base = mae({a, b});
    EXPECT_NEAR(base, verify::reference_mae({a, b}), 1e-9);
    const auto c = random_binary(rng, 8, 8);
    EXPECT_EQ(mae({c, b}), mae({b, c}));
    GrayMap worse = a;
    for (std::size_t i = 0; i < worse.size(); ++i)
      worse.values[i] = b.values[i] > 0.5 ? std::min(a.values[i], 0.5) : std::max(a.values[i], 0.5);
    EXPECT_GE(mae({worse, b}), base);
  }
}

TEST(Metrics, RejectsMismatchedSizes) {
  EXPECT_THROW(mae({GrayMap(4, 4), GrayMap(4, 5)}), ShapeError);
}

TEST(SMeasure, Examples) {
  const auto g = blob(16, 16);
  EXPECT_NEAR(s_measure({g, g}), 1.0, 1e-12);
  EXPECT_EQ(s_measure({GrayMap(8, 8), GrayMap(8, 8)}), 1.0);
}

TEST(EMeasure, PerfectPredictionAgainstSweep) {
  const auto g = blob(16, 16);
  const auto e = e_measure({g, g});
  EXPECT_NEAR(e.max, 1.0, 1e-12);
  EXPECT_NEAR(e.mean, verify::reference_e_measure({g, g}).mean, 1e-12);
  const auto ones = e_measure({GrayMap(6, 6, 1.0), GrayMap(6, 6, 1.0)});
  EXPECT_NEAR(ones.mean, 1.0, 1e-12);
}

TEST(WeightedF, Examples) {
  const auto g = blob(16, 16);
  EXPECT_NEAR(weighted_f({g, g}).value, 1.0, 1e-6);
  const auto empty = weighted_f({GrayMap(8, 8, 0.3), GrayMap(8, 8)});
  EXPECT_TRUE(empty.empty_gt);
  EXPECT_EQ(empty.value, 0.0);
}

TEST(Metrics, MatchReferencesOnRandomPairs) {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const SegmentationPair pair{random_soft(rng, 8, 8), random_binary(rng, 8, 8)};
    EXPECT_NEAR(s_measure(pair), verify::reference_s_measure(pair), 1e-6);
    const auto e = e_measure(pair);
    const auto ref = verify::reference_e_measure(pair);
    EXPECT_NEAR(e.mean, ref.mean, 1e-6);
    EXPECT_NEAR(e.max, ref.max, 1e-6);
    EXPECT_GE(e.max, e.mean);
    EXPECT_NEAR(weighted_f(pair).value, verify::reference_weighted_f(pair), 1e-6);
    for (double v : {s_measure(pair), e.mean, e.max, weighted_f(pair).value, mae(pair)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(DistanceTransform, Examples) {
  GrayMap m(6, 6);
  m.at(0, 0) = 1.0;
  const auto d = distance_transform(m);
  EXPECT_DOUBLE_EQ(d.dist.at(3, 4), 5.0);
  EXPECT_EQ(d.dist.at(0, 0), 0.0);
  EXPECT_EQ(d.nearest[0], 0);
  EXPECT_THROW(distance_transform(GrayMap(3, 3)), ContractError);
}

TEST(DistanceTransform, MatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 1 + static_cast<int>(rng.uniform_int(0, 15));
    const int w = 1 + static_cast<int>(rng.uniform_int(0, 15));
    auto m = random_binary(rng, h, w, rng.uniform(0.02, 0.5));
    m.values[static_cast<std::size_t>(rng.uniform_int(0, h * w - 1))] = 1.0;
    const auto fast = distance_transform(m);
    const auto ref = verify::brute_force_distance(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_NEAR(fast.dist.values[i], ref.dist.values[i], 1e-9);
      EXPECT_EQ(fast.nearest[i], ref.nearest[i]);
      if (m.values[i] > 0.5) EXPECT_EQ(fast.nearest[i], static_cast<int>(i));
    }
  }
}

TEST(GaussianBlur, MatchesOracle) {
  Rng rng(4);
  const auto x = random_soft(rng, 13, 9);
  const auto fast = gaussian_blur(x);
  const auto ref = verify::naive_gaussian_blur(x, 7, 5.0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fast.values[i], ref.values[i], 1e-12);
  double total = 0;
  for (double v : gaussian_kernel(7, 5.0)) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(EvaluateSet, IdenticalDirectories) {
  const auto dir = scratch("identical");
  Rng rng(5);
  for (int i = 0; i < 3; ++i) {
    auto g = blob(32, 32);
    g.at(static_cast<int>(rng.uniform_int(0, 31)), 2) = 1.0;
    const auto name = "img" + std::to_string(i) + ".pgm";
    write_image(dir / "pred" / name, as_tensor(g));
    write_image(dir / "gt" / name, as_tensor(g));
  }
  const auto report = evaluate_set(dir / "pred", dir / "gt");
  ASSERT_EQ(report.images.size(), 3u);
  EXPECT_EQ(report.mean.file, "MEAN");
  EXPECT_EQ(report.mean.mae, 0.0);
  EXPECT_NEAR(report.mean.s_alpha, 1.0, 1e-6);
  EXPECT_NEAR(report.mean.e_phi_max, 1.0, 1e-6);
  EXPECT_NEAR(report.mean.f_w, 1.0, 1e-6);
}

TEST(EvaluateSet, MeansAverageImages) {
  const auto dir = scratch("average");
  Rng rng(6);
  std::vector<ImageScores> expect;
  for (int i = 0; i < 10; ++i) {
    const auto pred = random_soft(rng, 12, 10);
    const auto gt = random_binary(rng, 12, 10);
    const auto name = "p" + std::to_string(i) + ".pgm";
    write_image(dir / "pred" / name, as_tensor(pred));
    write_image(dir / "gt" / name, as_tensor(gt));
    expect.push_back(score_pair(name, {read_gray_map(dir / "pred" / name), gt}));
  }
  const auto report = evaluate_set(dir / "pred", dir / "gt");
  ImageScores avg;
  for (const auto& s : expect) {
    avg.mae += s.mae / 10;
    avg.s_alpha += s.s_alpha / 10;
    avg.e_phi_mean += s.e_phi_mean / 10;
    avg.e_phi_max += s.e_phi_max / 10;
    avg.f_w += s.f_w / 10;
  }
  EXPECT_NEAR(report.mean.mae, avg.mae, 1e-9);
  EXPECT_NEAR(report.mean.s_alpha, avg.s_alpha, 1e-9);
  EXPECT_NEAR(report.mean.e_phi_mean, avg.e_phi_mean, 1e-9);
  EXPECT_NEAR(report.mean.e_phi_max, avg.e_phi_max, 1e-9);
  EXPECT_NEAR(report.mean.f_w, avg.f_w, 1e-9);
}

TEST(EvaluateSet, SingleImageReportEqualsPairScores) {
  const auto dir = scratch("single");
  Rng rng(7);
  const auto pred = random_soft(rng, 16, 16);
  const auto gt = blob(16, 16);
  write_image(dir / "pred" / "a.pgm", as_tensor(pred));
  write_image(dir / "gt" / "a.pgm", as_tensor(gt));
  const auto report = evaluate_set(dir / "pred", dir / "gt");
  const auto single = score_pair("a.pgm", {read_gray_map(dir / "pred" / "a.pgm"), gt});
  EXPECT_EQ(report.mean.mae, single.mae);
  EXPECT_EQ(report.mean.s_alpha, single.s_alpha);
  EXPECT_EQ(report.mean.f_w, single.f_w);
}

TEST(EvaluateSet, MissingCounterpartsListed) {
  const auto dir = scratch("missing");
  const auto g = as_tensor(blob(8, 8));
  write_image(dir / "pred" / "a.pgm", g);
  write_image(dir / "gt" / "a.pgm", g);
  write_image(dir / "pred" / "only_pred.pgm", g);
  write_image(dir / "gt" / "only_gt.pgm", g);
  try {
    evaluate_set(dir / "pred", dir / "gt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("only_pred"), std::string::npos) << what;
    EXPECT_NE(what.find("only_gt"), std::string::npos) << what;
  }
}

TEST(ReportCsv, Format) {
  ImageScores a{"a.pgm", 0.1, 0.9, 0.8, 0.95, 0.7, false};
  const auto csv = report_csv(summarize({a}));
  EXPECT_EQ(csv,
            "file,mae,s_alpha,e_phi_mean,e_phi_max,f_w\n"
            "a.pgm,0.100000,0.900000,0.800000,0.950000,0.700000\n"
            "MEAN,0.100000,0.900000,0.800000,0.950000,0.700000\n");
}

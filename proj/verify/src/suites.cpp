#include "c2f/verify/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "c2f/blocks.hpp"
#include "c2f/error.hpp"
#include "c2f/losses.hpp"
#include "c2f/metrics.hpp"
#include "c2f/network.hpp"
#include "c2f/ops.hpp"
#include "c2f/rng.hpp"
#include "c2f/verify/oracles.hpp"

namespace c2f::verify {
namespace {

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

Tensor<double> random_mask(Rng& rng, Shape s, double density) {
  Tensor<double> t(s);
  for (auto& v : t.data()) v = rng.uniform() < density ? 1.0 : 0.0;
  return t;
}

void add_trainable(GradInputs& inputs, ParamList<double>& params) {
  for (auto& p : params) {
    if (p.role == ParamRole::kTrainable) inputs.emplace_back(p.name, p.tensor);
  }
}

std::string fmt(const char* format, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const GrayMap& a, const GrayMap& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

/// Runs a single-precision op on a double tensor and widens the result.
Tensor<double> run_float(const std::function<Var<float>(Tape<float>&, const Var<float>&)>& op,
                         const Tensor<double>& x) {
  Tape<float> tape;
  tape.set_grad_enabled(false);
  return op(tape, tape.constant(x.cast<float>())).value().cast<double>();
}

GrayMap random_map(Rng& rng, int h, int w) {
  GrayMap m(h, w);
  for (auto& v : m.values) v = rng.uniform();
  return m;
}

GrayMap random_binary_map(Rng& rng, int h, int w, double density) {
  GrayMap m(h, w);
  for (auto& v : m.values) v = rng.uniform() < density ? 1.0 : 0.0;
  return m;
}

void report_gradchecks(SuiteResult& r, const std::vector<GradcheckReport>& reports) {
  for (const auto& g : reports) {
    std::string line = g.name + ": " + std::to_string(g.checked) + " elements, max rel err " +
                       fmt("%.3g", g.max_rel_error);
    if (g.nondifferentiable) line += ", " + std::to_string(g.nondifferentiable) + " at kinks";
    if (!g.passed()) line += " worst " + g.worst;
    r.check(g.passed(), line);
  }
}

// --------------------------------------------------------------- suites

SuiteResult gradcheck_suite() {
  SuiteResult r;
  report_gradchecks(r, gradcheck_ops());
  report_gradchecks(r, gradcheck_blocks());
  report_gradchecks(r, gradcheck_losses());
  report_gradchecks(r, gradcheck_networks());
  return r;
}

SuiteResult conv_oracle_suite() {
  SuiteResult r;
  Rng rng(101);
  constexpr double kTol = 1e-5;

  struct ConvCase {
    Shape x;
    int out, k, stride, dilation;
    bool bias;
  };
  const ConvCase convs[] = {
      {{2, 3, 8, 8}, 4, 3, 1, 3, true},   {{2, 3, 9, 7}, 5, 3, 2, 1, true},
      {{1, 4, 16, 16}, 2, 5, 1, 1, false}, {{2, 2, 6, 10}, 3, 1, 1, 1, true},
      {{1, 3, 16, 16}, 4, 7, 1, 1, true},  {{2, 3, 11, 11}, 3, 3, 2, 2, true},
  };
  for (const auto& c : convs) {
    const auto x = random_tensor<double>(rng, c.x);
    const auto w = random_tensor<double>(rng, {c.out, c.x.c, c.k, c.k});
    const auto b = random_tensor<double>(rng, {1, c.out, 1, 1});
    const auto expect = naive_conv2d(x, w, c.bias ? &b : nullptr, c.stride, c.dilation);
    const auto got = run_float(
        [&](Tape<float>& t, const Var<float>& in) {
          return conv2d(in, t.constant(w.cast<float>()),
                        c.bias ? t.constant(b.cast<float>()) : Var<float>(),
                        ConvGeometry{c.stride, c.dilation});
        },
        x);
    const double err = max_abs_diff(got, expect);
    r.check(err < kTol, "conv2d " + c.x.str() + " k" + std::to_string(c.k) + " s" +
                            std::to_string(c.stride) + " d" + std::to_string(c.dilation) +
                            ": max abs err " + fmt("%.3g", err));
  }

  struct PoolCase {
    Shape x;
    int k, stride;
  };
  const PoolCase pools[] = {{{2, 3, 8, 8}, 2, 2},    {{1, 2, 16, 16}, 3, 1},
                            {{1, 1, 16, 16}, 31, 1}, {{2, 2, 9, 13}, 5, 1},
                            {{1, 2, 12, 12}, 4, 4},  {{1, 1, 9, 9}, 3, 2}};
  for (const auto& p : pools) {
    const auto x = random_tensor<double>(rng, p.x);
    const auto got = run_float(
        [&](Tape<float>&, const Var<float>& in) { return avg_pool(in, p.k, p.stride); }, x);
    const double err = max_abs_diff(got, naive_avg_pool(x, p.k, p.stride));
    r.check(err < kTol, "avg_pool " + p.x.str() + " k" + std::to_string(p.k) + " s" +
                            std::to_string(p.stride) + ": max abs err " + fmt("%.3g", err));
  }

  struct ResizeCase {
    Shape x;
    int oh, ow;
  };
  const ResizeCase resizes[] = {{{1, 1, 2, 2}, 4, 4},   {{2, 3, 8, 8}, 16, 16},
                                {{1, 2, 5, 7}, 9, 4},   {{1, 1, 16, 16}, 6, 11},
                                {{1, 2, 4, 4}, 12, 12}, {{1, 1, 3, 5}, 3, 5}};
  for (const auto& c : resizes) {
    const auto x = random_tensor<double>(rng, c.x);
    const auto got = run_float(
        [&](Tape<float>&, const Var<float>& in) { return resize_bilinear(in, c.oh, c.ow); }, x);
    const double err = max_abs_diff(got, naive_resize_bilinear(x, c.oh, c.ow));
    r.check(err < kTol, "resize_bilinear " + c.x.str() + " -> " + std::to_string(c.oh) + "x" +
                            std::to_string(c.ow) + ": max abs err " + fmt("%.3g", err));
  }
  for (int factor : {1, 2, 4}) {
    const auto x = random_tensor<double>(rng, {2, 2, 6, 5});
    const auto got = run_float(
        [&](Tape<float>&, const Var<float>& in) { return upsample_bilinear(in, factor); }, x);
    const double err = max_abs_diff(got, naive_resize_bilinear(x, 6 * factor, 5 * factor));
    r.check(err < kTol, "upsample_bilinear x" + std::to_string(factor) + ": max abs err " +
                            fmt("%.3g", err));
  }

  for (int trial = 0; trial < 6; ++trial) {
    const int h = 3 + trial * 2, w = 16 - trial;
    const GrayMap x = random_map(rng, h, w);
    const double err = max_abs_diff(gaussian_blur(x, 7, 5.0), naive_gaussian_blur(x, 7, 5.0));
    r.check(err < kTol, "gaussian_blur " + std::to_string(h) + "x" + std::to_string(w) +
                            ": max abs err " + fmt("%.3g", err));
  }
  return r;
}

SuiteResult edt_oracle_suite() {
  SuiteResult r;
  Rng rng(202);
  int dist_failures = 0, index_failures = 0;
  double worst = 0;
  constexpr int kMasks = 200;
  for (int trial = 0; trial < kMasks; ++trial) {
    const int h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16);
    GrayMap mask = random_binary_map(rng, h, w, rng.uniform(0.02, 0.6));
    mask.at(rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)) = 1.0;
    const DistanceTransform fast = distance_transform(mask);
    const DistanceTransform slow = brute_force_distance(mask);
    const double err = max_abs_diff(fast.dist, slow.dist);
    worst = std::max(worst, err);
    if (err >= 1e-9) ++dist_failures;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const int q = fast.nearest[i];
      const int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
      const double d = std::hypot(q / w - y, q % w - x);
      if (q < 0 || mask.values[q] <= 0.5 || std::fabs(d - slow.dist.values[i]) >= 1e-9 ||
          q != slow.nearest[i]) {
        ++index_failures;
        break;
      }
    }
  }
  r.check(dist_failures == 0, std::to_string(kMasks) + " random masks: distance max abs err " +
                                  fmt("%.3g", worst));
  r.check(index_failures == 0, std::to_string(kMasks) +
                                   " random masks: nearest indices agree with brute force (" +
                                   std::to_string(index_failures) + " mismatching masks)");
  GrayMap corner(5, 5);
  corner.at(0, 0) = 1.0;
  const double d = distance_transform(corner).dist.at(3, 4);
  r.check(std::fabs(d - 5.0) < 1e-12, "single pixel at origin: dist(3,4) = " + fmt("%.12g", d));
  bool threw = false;
  try {
    distance_transform(GrayMap(4, 4));
  } catch (const ContractError&) {
    threw = true;
  }
  r.check(threw, "empty mask rejected");
  return r;
}

SuiteResult metric_oracle_suite() {
  SuiteResult r;
  Rng rng(303);
  double worst[4] = {0, 0, 0, 0};
  double worst_e_max = 0;
  constexpr int kPairs = 200;
  for (int trial = 0; trial < kPairs; ++trial) {
    SegmentationPair pair;
    pair.gt = random_binary_map(rng, 8, 8, trial % 10 == 0 ? (trial % 20 == 0 ? 0.0 : 1.0)
                                                           : rng.uniform(0.1, 0.9));
    pair.pred = random_map(rng, 8, 8);
    if (trial % 3 == 0) {
      for (auto& v : pair.pred.values) v = std::round(v * 255.0) / 255.0;
    }
    const EMeasure e = e_measure(pair);
    const EMeasure re = reference_e_measure(pair);
    worst[0] = std::max(worst[0], std::fabs(mae(pair) - reference_mae(pair)));
    worst[1] = std::max(worst[1], std::fabs(s_measure(pair) - reference_s_measure(pair)));
    worst[2] = std::max(worst[2], std::fabs(e.mean - re.mean));
    worst_e_max = std::max(worst_e_max, std::fabs(e.max - re.max));
    worst[3] = std::max(worst[3], std::fabs(weighted_f(pair).value - reference_weighted_f(pair)));
  }
  const std::string n = std::to_string(kPairs) + " random 8x8 pairs: ";
  r.check(worst[0] < 1e-9, n + "mae max abs err " + fmt("%.3g", worst[0]));
  r.check(worst[1] < 1e-6, n + "S-measure max abs err " + fmt("%.3g", worst[1]));
  r.check(worst[2] < 1e-6 && worst_e_max < 1e-6,
          n + "E-measure mean/max max abs err " + fmt("%.3g", std::max(worst[2], worst_e_max)));
  r.check(worst[3] < 1e-6, n + "weighted F max abs err " + fmt("%.3g", worst[3]));

  // Perfect predictions on non-degenerate masks.
  double id_err = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SegmentationPair pair;
    pair.gt = random_binary_map(rng, rng.uniform_int(4, 24), rng.uniform_int(4, 24), 0.4);
    pair.gt.values[0] = 1.0;
    pair.gt.values[1] = 0.0;
    pair.pred = pair.gt;
    const EMeasure e = e_measure(pair);
    id_err = std::max({id_err, mae(pair), std::fabs(s_measure(pair) - 1.0),
                       std::fabs(e.max - 1.0), std::fabs(weighted_f(pair).value - 1.0),
                       std::fabs(e.mean - reference_e_measure(pair).mean)});
  }
  r.check(id_err < 1e-6, "pred == gt: mae 0, S 1, E max 1, E mean = threshold sweep, F 1 (err " +
                             fmt("%.3g", id_err) + ")");

  // Degenerate ground truth.
  SegmentationPair zeros{GrayMap(6, 6, 0.0), GrayMap(6, 6, 0.0)};
  SegmentationPair ones{GrayMap(6, 6, 1.0), GrayMap(6, 6, 1.0)};
  r.check(s_measure(zeros) == 1.0, "gt all 0, pred all 0: S = 1");
  r.check(s_measure(ones) == 1.0, "gt all 1, pred all 1: S = 1");
  const EMeasure e1 = e_measure(ones);
  r.check(e1.mean == 1.0 && e1.max == 1.0, "gt all 1, pred all 1: E = 1");
  const EMeasure e0 = e_measure(zeros);
  r.check(std::fabs(e0.mean - 255.0 / 256.0) < 1e-12 && e0.max == 1.0,
          "gt all 0, pred all 0: E = 1 above t = 0, 0 at t = 0");
  const WeightedF fe = weighted_f(zeros);
  r.check(fe.value == 0.0 && fe.empty_gt, "empty gt: weighted F = 0 with flag");
  // With zero recall everywhere except where the zero-padded blur leaks in at
  // the border, the score is small and shrinks as the image grows.
  double previous = 1.0;
  bool shrinking = true, agrees = true;
  for (int size : {8, 32, 128}) {
    SegmentationPair half{GrayMap(size, size, 0.0), GrayMap(size, size, 0.0)};
    for (int y = 0; y < size / 2; ++y)
      for (int x = 0; x < size; ++x) half.gt.at(y, x) = 1.0;
    const double f = weighted_f(half).value;
    shrinking = shrinking && f < previous;
    previous = f;
    if (size <= 32) agrees = agrees && std::fabs(f - reference_weighted_f(half)) < 1e-9;
  }
  r.check(shrinking && agrees && previous < 0.06,
          "pred all 0, gt half 1: weighted F -> 0 with image size (" + fmt("%.4f", previous) +
              " at 128x128)");
  SegmentationPair inverse{GrayMap(6, 6, 1.0), GrayMap(6, 6, 0.0)};
  r.check(mae(inverse) == 1.0, "pred all 1, gt all 0: mae = 1");
  GrayMap partial(6, 6, 0.25);
  r.check(std::fabs(s_measure({partial, GrayMap(6, 6, 0.0)}) - 0.75) < 1e-12,
          "gt all 0: S = 1 - mean(pred)");
  r.check(std::fabs(s_measure({partial, GrayMap(6, 6, 1.0)}) - 0.25) < 1e-12,
          "gt all 1: S = mean(pred)");
  return r;
}

SuiteResult loss_identity_suite() {
  SuiteResult r;
  Rng rng(404);

  // Saturated correct prediction.
  {
    const Tensor<double> gt = random_mask(rng, {2, 1, 16, 16}, 0.4);
    Tensor<double> z(gt.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = gt[i] > 0.5 ? 20.0 : -20.0;
    Tape<double> tape;
    const auto loss = total_loss(tape.constant(z), gt);
    const double total = loss.total.value()[0];
    r.check(total < 1e-6, "saturated correct logits: total loss " + fmt("%.3g", total));
    r.check(loss.bce.value()[0] < 1e-8, "saturated correct logits: weighted BCE " +
                                            fmt("%.3g", loss.bce.value()[0]));
    r.check(total == loss.bce.value()[0] + loss.iou.value()[0], "total == BCE + IoU");
  }
  // Hand cases.
  {
    Tensor<double> gt({1, 1, 4, 4}, 1.0), z({1, 1, 4, 4}, -1e3), w({1, 1, 4, 4}, 1.0);
    Tape<double> tape;
    const double iou = weighted_iou(tape.constant(z), gt, w).value()[0];
    r.check(std::fabs(iou - 16.0 / 17.0) < 1e-6, "IoU hand case 1 - 1/17: " + fmt("%.9f", iou));
  }
  {
    Tensor<double> gt({1, 1, 9, 9}, 0.0);
    gt.at(0, 0, 4, 4) = 1.0;
    const double lambda = 5.0;
    const double expected = 1.0 + lambda * std::fabs(1.0 / 9.0 - 1.0);
    const double got = weight_map(gt, LossOptions{lambda, 3}).at(0, 0, 4, 4);
    r.check(std::fabs(got - expected) < 1e-6,
            "weight map hand case 1 + 5*(8/9) = " + fmt("%.9f", expected) + ": " + fmt("%.9f", got));
  }
  {
    const Tensor<double> zeros({1, 1, 12, 12}, 0.0), ones({1, 1, 12, 12}, 1.0);
    bool flat = true;
    const auto w0 = weight_map(zeros), w1 = weight_map(ones);
    for (double v : w0.data()) flat = flat && v == 1.0;
    for (double v : w1.data()) flat = flat && v == 1.0;
    r.check(flat, "constant masks: weight map == 1");
  }
  // Oracle comparisons.
  {
    double worst_w = 0, worst_bce = 0, worst_iou = 0, worst_scale = 0, worst_log2 = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor<double> gt = random_mask(rng, {2, 1, 12, 10}, rng.uniform(0.1, 0.9));
      const Tensor<double> z = random_tensor<double>(rng, gt.shape(), -4.0, 4.0);
      const LossOptions opts{5.0, 5};
      const Tensor<double> w = weight_map(gt, opts);
      worst_w = std::max(worst_w, max_abs_diff(w, reference_weight_map(gt, 5.0, 5)));
      Tape<double> tape;
      const Var<double> zv = tape.constant(z);
      const double bce = weighted_bce(zv, gt, w).value()[0];
      worst_bce = std::max(worst_bce, std::fabs(bce - reference_weighted_bce(z, gt, w)));
      worst_iou = std::max(worst_iou, std::fabs(weighted_iou(zv, gt, w).value()[0] -
                                                reference_weighted_iou(z, gt, w)));
      Tensor<double> w3 = w;
      for (auto& v : w3.data()) v *= 3.0;
      worst_scale = std::max(worst_scale, std::fabs(weighted_bce(zv, gt, w3).value()[0] - bce));
      const double at_zero =
          weighted_bce(tape.constant(Tensor<double>(gt.shape(), 0.0)), gt, w).value()[0];
      worst_log2 = std::max(worst_log2, std::fabs(at_zero - std::log(2.0)));
    }
    r.check(worst_w < 1e-12, "weight map vs windowed-mean oracle: " + fmt("%.3g", worst_w));
    r.check(worst_bce < 1e-5, "weighted BCE vs probability-space oracle: " + fmt("%.3g", worst_bce));
    r.check(worst_iou < 1e-9, "weighted IoU vs direct oracle: " + fmt("%.3g", worst_iou));
    r.check(worst_scale < 1e-12, "weighted BCE invariant to weight scaling: " +
                                     fmt("%.3g", worst_scale));
    r.check(worst_log2 < 1e-12, "zero logits: weighted BCE = log 2 (" + fmt("%.3g", worst_log2) + ")");
  }
  // Range of the IoU term.
  {
    double lo = 1, hi = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor<double> gt = random_mask(rng, {1, 1, 6, 6}, rng.uniform(0.0, 1.0));
      const Tensor<double> z = random_tensor<double>(rng, gt.shape(), -30.0, 30.0);
      Tape<double> tape;
      const double v = weighted_iou(tape.constant(z), gt, weight_map(gt)).value()[0];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    r.check(lo >= 0.0 && hi < 1.0, "weighted IoU within [0, 1)");
  }
  bool threw = false;
  try {
    Tensor<double> g({1, 1, 4, 4}, 0.5);
    weight_map(g);
  } catch (const DataError&) {
    threw = true;
  }
  r.check(threw, "non-binary mask rejected by weight map");
  return r;
}

}  // namespace

void SuiteResult::check(bool ok, const std::string& what) {
  passed = passed && ok;
  lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"gradcheck", "conv-oracle", "edt-oracle",
                                              "metric-oracle", "loss-identities"};
  return names;
}

SuiteResult run_suite(const std::string& name) {
  static const std::map<std::string, SuiteResult (*)()> suites{
      {"gradcheck", gradcheck_suite},
      {"conv-oracle", conv_oracle_suite},
      {"edt-oracle", edt_oracle_suite},
      {"metric-oracle", metric_oracle_suite},
      {"loss-identities", loss_identity_suite},
  };
  const auto it = suites.find(name);
  if (it == suites.end()) throw ContractError("unknown suite '" + name + "'");
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r = it->second();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ----------------------------------------------------------- gradchecks

std::vector<GradcheckReport> gradcheck_ops() {
  std::vector<GradcheckReport> out;
  Rng rng(505);

  struct ConvCase {
    const char* name;
    Shape x;
    int out, k, stride, dilation;
    bool bias;
  };
  const ConvCase convs[] = {
      {"conv2d 3x3", {2, 3, 6, 6}, 4, 3, 1, 1, true},
      {"conv2d 3x3 stride 2", {2, 3, 7, 7}, 3, 3, 2, 1, false},
      {"conv2d 3x3 dilation 3", {2, 2, 8, 8}, 3, 3, 1, 3, true},
      {"conv2d 5x5", {1, 2, 6, 6}, 2, 5, 1, 1, true},
      {"conv2d 1x1", {2, 4, 5, 5}, 3, 1, 1, 1, true},
  };
  for (const auto& c : convs) {
    Tensor<double> x = random_tensor<double>(rng, c.x);
    Tensor<double> w = random_tensor<double>(rng, {c.out, c.x.c, c.k, c.k});
    Tensor<double> b = random_tensor<double>(rng, {1, c.out, 1, 1});
    GradInputs in{{"x", &x}, {"weight", &w}};
    if (c.bias) in.emplace_back("bias", &b);
    out.push_back(gradcheck(c.name, in, [&](Tape<double>& t) {
      return conv2d(t.param(x), t.param(w), c.bias ? t.param(b) : Var<double>(),
                    ConvGeometry{c.stride, c.dilation});
    }));
  }

  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    Tensor<double> x = random_tensor<double>(rng, {3, 3, 4, 4}, -2.0, 2.0);
    BatchNormState<double> bn(3);
    bn.gamma = random_tensor<double>(rng, {1, 3, 1, 1}, 0.5, 1.5);
    bn.beta = random_tensor<double>(rng, {1, 3, 1, 1});
    bn.running_mean = random_tensor<double>(rng, {1, 3, 1, 1});
    bn.running_var = random_tensor<double>(rng, {1, 3, 1, 1}, 0.5, 2.0);
    bn.mode = mode;
    out.push_back(gradcheck(mode == Mode::kTrain ? "batch_norm train" : "batch_norm eval",
                            {{"x", &x}, {"gamma", &bn.gamma}, {"beta", &bn.beta}},
                            [&](Tape<double>& t) { return batch_norm(t.param(x), bn); }));
  }

  {
    Tensor<double> x = random_tensor<double>(rng, {2, 2, 4, 4});
    out.push_back(gradcheck("relu", {{"x", &x}}, [&](Tape<double>& t) { return relu(t.param(x)); }));
    out.push_back(gradcheck("sigmoid", {{"x", &x}}, [&](Tape<double>& t) {
      return sigmoid(t.param(x));
    }));
    out.push_back(gradcheck("global_avg_pool", {{"x", &x}}, [&](Tape<double>& t) {
      return global_avg_pool(t.param(x));
    }));
    out.push_back(gradcheck("one_minus", {{"x", &x}}, [&](Tape<double>& t) {
      return one_minus(t.param(x));
    }));
    out.push_back(gradcheck("sum", {{"x", &x}}, [&](Tape<double>& t) { return sum(t.param(x)); }));
  }
  for (auto [k, s] : {std::pair{2, 2}, std::pair{3, 1}, std::pair{5, 1}, std::pair{3, 2}}) {
    Tensor<double> x = random_tensor<double>(rng, {2, 2, 6, 6});
    out.push_back(gradcheck("avg_pool k" + std::to_string(k) + " s" + std::to_string(s),
                            {{"x", &x}},
                            [&](Tape<double>& t) { return avg_pool(t.param(x), k, s); }));
  }
  for (auto [oh, ow] : {std::pair{10, 10}, std::pair{7, 9}, std::pair{3, 2}}) {
    Tensor<double> x = random_tensor<double>(rng, {2, 2, 5, 5});
    out.push_back(gradcheck("resize_bilinear 5x5 -> " + std::to_string(oh) + "x" +
                                std::to_string(ow),
                            {{"x", &x}},
                            [&](Tape<double>& t) { return resize_bilinear(t.param(x), oh, ow); }));
  }
  {
    Tensor<double> x = random_tensor<double>(rng, {2, 2, 4, 3});
    out.push_back(gradcheck("upsample_bilinear x2", {{"x", &x}}, [&](Tape<double>& t) {
      return upsample_bilinear(t.param(x), 2);
    }));
  }
  {
    Tensor<double> a = random_tensor<double>(rng, {2, 3, 4, 4});
    Tensor<double> b = random_tensor<double>(rng, {2, 3, 4, 4});
    Tensor<double> c = random_tensor<double>(rng, {2, 3, 1, 1});
    out.push_back(gradcheck("add", {{"a", &a}, {"b", &b}}, [&](Tape<double>& t) {
      return add(t.param(a), t.param(b));
    }));
    out.push_back(gradcheck("mul", {{"a", &a}, {"b", &b}}, [&](Tape<double>& t) {
      return mul(t.param(a), t.param(b));
    }));
    out.push_back(gradcheck("add broadcast", {{"a", &a}, {"c", &c}}, [&](Tape<double>& t) {
      return add(t.param(a), t.param(c));
    }));
    out.push_back(gradcheck("mul broadcast", {{"a", &a}, {"c", &c}}, [&](Tape<double>& t) {
      return mul(t.param(a), t.param(c));
    }));
    out.push_back(gradcheck("mul self", {{"a", &a}}, [&](Tape<double>& t) {
      const Var<double> v = t.param(a);
      return mul(v, v);
    }));
    Tensor<double> d = random_tensor<double>(rng, {2, 2, 4, 4});
    out.push_back(gradcheck("concat_channels", {{"a", &a}, {"d", &d}}, [&](Tape<double>& t) {
      const std::vector<Var<double>> xs{t.param(a), t.param(d)};
      return concat_channels<double>(xs);
    }));
  }
  return out;
}

std::vector<GradcheckReport> gradcheck_blocks() {
  std::vector<GradcheckReport> out;
  Rng rng(606);
  for (bool use_bn : {true, false}) {
    MscaParams<double> p(8, 4, use_bn);
    p.init(rng);
    Tensor<double> x = random_tensor<double>(rng, {2, 8, 5, 5});
    ParamList<double> params;
    p.collect("msca", params);
    GradInputs in{{"x", &x}};
    add_trainable(in, params);
    out.push_back(gradcheck(use_bn ? "MSCA" : "MSCA without BN", in,
                            [&](Tape<double>& t) { return msca_forward(t.param(x), p); }));
  }
  {
    ConvParams<double> p(4, 4, 3, 3);
    p.init(rng);
    Tensor<double> x = random_tensor<double>(rng, {2, 4, 5, 5});
    out.push_back(gradcheck("MSCA conv substitute",
                            {{"x", &x}, {"weight", &p.weight}, {"bias", &p.bias}},
                            [&](Tape<double>& t) { return msca_conv_substitute(t.param(x), p); }));
  }
  {
    RfbParams<double> p(5, 4);
    p.init(rng);
    Tensor<double> x = random_tensor<double>(rng, {2, 5, 8, 8});
    ParamList<double> params;
    p.collect("rfb", params);
    GradInputs in{{"x", &x}};
    add_trainable(in, params);
    out.push_back(gradcheck("RFB", in, [&](Tape<double>& t) { return rfb_forward(t.param(x), p); }));
  }
  for (AttentionKind kind : {AttentionKind::kMsca, AttentionKind::kConv}) {
    const std::string suffix = kind == AttentionKind::kMsca ? "" : " (conv attention)";
    {
      AcfmParams<double> p(4, kind, 2, true);
      p.init(rng);
      Tensor<double> fa = random_tensor<double>(rng, {2, 4, 6, 6});
      Tensor<double> fb = random_tensor<double>(rng, {2, 4, 3, 3});
      ParamList<double> params;
      p.collect("acfm", params);
      GradInputs in{{"fa", &fa}, {"fb", &fb}};
      add_trainable(in, params);
      out.push_back(gradcheck("ACFM" + suffix, in, [&](Tape<double>& t) {
        return acfm_forward(t.param(fa), t.param(fb), p).fused;
      }));
      out.push_back(gradcheck("ACFM pre-fusion" + suffix, in, [&](Tape<double>& t) {
        return acfm_forward(t.param(fa), t.param(fb), p).pre_fusion;
      }));
    }
    {
      DgcmParams<double> p(4, kind, 2, true);
      p.init(rng);
      Tensor<double> f = random_tensor<double>(rng, {2, 4, 6, 6});
      ParamList<double> params;
      p.collect("dgcm", params);
      GradInputs in{{"f", &f}};
      add_trainable(in, params);
      out.push_back(gradcheck("DGCM" + suffix, in,
                              [&](Tape<double>& t) { return dgcm_forward(t.param(f), p); }));
    }
  }
  return out;
}

std::vector<GradcheckReport> gradcheck_losses() {
  std::vector<GradcheckReport> out;
  Rng rng(707);
  const Tensor<double> gt = random_mask(rng, {2, 1, 12, 12}, 0.4);
  const Tensor<double> w = weight_map(gt, LossOptions{5.0, 5});
  Tensor<double> z = random_tensor<double>(rng, gt.shape(), -3.0, 3.0);
  out.push_back(gradcheck("weighted BCE", {{"logits", &z}}, [&](Tape<double>& t) {
    return weighted_bce(t.param(z), gt, w);
  }));
  out.push_back(gradcheck("weighted IoU", {{"logits", &z}}, [&](Tape<double>& t) {
    return weighted_iou(t.param(z), gt, w);
  }));
  Tensor<double> small = random_tensor<double>(rng, {2, 1, 3, 3}, -3.0, 3.0);
  out.push_back(gradcheck("total loss with upsampling", {{"logits", &small}},
                          [&](Tape<double>& t) {
                            return total_loss(t.param(small), gt, LossOptions{5.0, 5}).total;
                          }));
  return out;
}

std::vector<GradcheckReport> gradcheck_networks() {
  std::vector<GradcheckReport> out;
  for (Variant v : kAllVariants) {
    Rng rng(808);
    NetworkConfig cfg;
    cfg.backbone_channels = {3, 4, 4, 6, 6};
    cfg.rfb_channels = 4;
    cfg.msca_reduction = 2;
    cfg.variant = v;
    NetworkParams<double> net(cfg, rng);
    net.set_mode(Mode::kTrain);
    Tensor<double> image = random_tensor<double>(rng, {2, 3, 32, 32}, 0.0, 1.0);
    const Tensor<double> gt = random_mask(rng, {2, 1, 32, 32}, 0.3);
    ParamList<double> params = net.params();
    GradInputs in{{"image", &image}};
    add_trainable(in, params);
    GradcheckOptions opts;
    opts.max_elements = 6;
    out.push_back(gradcheck("network " + std::string(variant_name(v)) + " + total loss", in,
                            [&](Tape<double>& t) {
                              return total_loss(forward(t.param(image), net), gt,
                                                LossOptions{5.0, 7})
                                  .total;
                            },
                            opts));
  }
  return out;
}

}  // namespace c2f::verify

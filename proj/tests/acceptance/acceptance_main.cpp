#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "c2f/blocks.hpp"
#include "c2f/config.hpp"
#include "c2f/data.hpp"
#include "c2f/image_io.hpp"
#include "c2f/losses.hpp"
#include "c2f/metrics.hpp"
#include "c2f/rng.hpp"
#include "c2f/trainer.hpp"
#include "c2f/verify/gradcheck.hpp"
#include "c2f/verify/oracles.hpp"
#include "c2f/verify/suites.hpp"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Collects the individual checks of one criterion.
struct Outcome {
  bool passed = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    passed = passed && ok;
    details.push_back((ok ? "  ok   " : "  FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("  info " + what); }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

double max_abs_diff(const Tensor<float>& a, const Tensor<double>& b) {
  double d = a.shape() == b.shape() ? 0.0 : INFINITY;
  for (std::size_t i = 0; d < INFINITY && i < a.size(); ++i) {
    d = std::max(d, std::fabs(static_cast<double>(a[i]) - b[i]));
  }
  return d;
}

GrayMap random_binary(Rng& rng, int h, int w, double p) {
  GrayMap m(h, w);
  for (auto& v : m.values) v = rng.uniform(0, 1) < p ? 1.0 : 0.0;
  return m;
}

GrayMap random_soft(Rng& rng, int h, int w) {
  GrayMap m(h, w);
  for (auto& v : m.values) v = std::round(rng.uniform(0, 1) * 255.0) / 255.0;
  return m;
}

Config tiny_config() {
  return parse_config(
      "seed = 1\n"
      "image_size = 64\n"
      "backbone_channels = 8, 12, 16, 24, 32\n"
      "rfb_channels = 16\n"
      "batch_size = 4\n"
      "scales = 1.0\n"
      "lr = 3e-3\n"
      "epochs = 100\n"
      "decay_epoch = 75\n");
}

// ------------------------------------------------------------- criteria

Outcome gradient_suite() {
  Outcome out;
  const auto start = Clock::now();
  std::vector<verify::GradcheckReport> reports;
  for (auto group : {verify::gradcheck_ops, verify::gradcheck_blocks, verify::gradcheck_losses,
                     verify::gradcheck_networks}) {
    for (auto& r : group()) reports.push_back(std::move(r));
  }
  double worst = 0;
  for (const auto& r : reports) {
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed()) {
      out.check(false, r.name + " max rel error " + fmt("%.3g", r.max_rel_error) + " at " + r.worst);
    }
  }
  const double secs = seconds_since(start);
  out.check(reports.size() > 0, std::to_string(reports.size()) + " gradient checks, worst relative error " +
                                    fmt("%.3g", worst));
  out.check(secs < 180.0, "runtime " + fmt("%.1f", secs) + " s (limit 180 s)");
  return out;
}

Outcome oracle_equivalence() {
  Outcome out;
  Rng rng(2024);
  double conv = 0, pool = 0, resize = 0, blur = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 2 * static_cast<int>(rng.uniform_int(2, 8)), w = 2 * static_cast<int>(rng.uniform_int(2, 8));
    const auto x = random_tensor<double>(rng, {2, 3, h, w});
    const int k = 1 + 2 * static_cast<int>(rng.uniform_int(0, 2));
    const int dilation = static_cast<int>(rng.uniform_int(1, 3));
    const int stride = static_cast<int>(rng.uniform_int(1, 2));
    ConvParams<float> p(3, 4, k, k, stride, dilation);
    p.weight = random_tensor<float>(rng, p.weight.shape());
    p.bias = random_tensor<float>(rng, p.bias.shape());
    Tape<float> tape;
    const auto xv = tape.constant(x.cast<float>());
    const auto wd = p.weight.cast<double>(), bd = p.bias.cast<double>();
    conv = std::max(conv, max_abs_diff(conv2d(xv, p).value(),
                                       verify::naive_conv2d(x.cast<float>().cast<double>(), wd, &bd, stride, dilation)));
    const auto xf = x.cast<float>().cast<double>();
    pool = std::max(pool, max_abs_diff(avg_pool(xv, 2, 2).value(), verify::naive_avg_pool(xf, 2, 2)));
    pool = std::max(pool, max_abs_diff(avg_pool(xv, 5, 1).value(), verify::naive_avg_pool(xf, 5, 1)));
    const int oh = static_cast<int>(rng.uniform_int(2, 32)), ow = static_cast<int>(rng.uniform_int(2, 32));
    resize = std::max(resize, max_abs_diff(resize_bilinear(xv, oh, ow).value(),
                                           verify::naive_resize_bilinear(xf, oh, ow)));
    resize = std::max(resize, max_abs_diff(upsample_bilinear(xv, 2).value(),
                                           verify::naive_resize_bilinear(xf, 2 * h, 2 * w)));
    const auto g = random_soft(rng, h, w);
    const auto fast = gaussian_blur(g), ref = verify::naive_gaussian_blur(g, 7, 5.0);
    for (std::size_t i = 0; i < g.size(); ++i) blur = std::max(blur, std::fabs(fast.values[i] - ref.values[i]));
  }
  out.check(conv < 1e-5, "conv2d max abs error " + fmt("%.3g", conv));
  out.check(pool < 1e-5, "avg_pool max abs error " + fmt("%.3g", pool));
  out.check(resize < 1e-5, "bilinear resize/upsample max abs error " + fmt("%.3g", resize));
  out.check(blur < 1e-5, "gaussian_blur max abs error " + fmt("%.3g", blur));

  double dist = 0;
  int index_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = static_cast<int>(rng.uniform_int(1, 16)), w = static_cast<int>(rng.uniform_int(1, 16));
    auto m = random_binary(rng, h, w, rng.uniform(0.01, 0.6));
    m.values[static_cast<std::size_t>(rng.uniform_int(0, h * w - 1))] = 1.0;
    const auto fast = distance_transform(m), ref = verify::brute_force_distance(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      dist = std::max(dist, std::fabs(fast.dist.values[i] - ref.dist.values[i]));
      const int y = fast.nearest[i] / w, x = fast.nearest[i] % w;
      const double via_index = std::hypot(static_cast<int>(i) / w - y, static_cast<int>(i) % w - x);
      index_mismatch += std::fabs(via_index - ref.dist.values[i]) > 1e-9;
    }
  }
  out.check(dist < 1e-9, "distance transform on 200 masks, max distance error " + fmt("%.3g", dist));
  out.check(index_mismatch == 0, "nearest indices reproduce brute-force distances (" +
                                     std::to_string(index_mismatch) + " mismatches)");
  return out;
}

Outcome metric_identities() {
  Outcome out;
  Rng rng(77);
  double worst_id = 0, worst_e_mean = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_binary(rng, 24, 24, rng.uniform(0.1, 0.6));
    g.at(0, 0) = 1.0;
    g.at(23, 23) = 0.0;
    const SegmentationPair pair{g, g};
    const auto e = e_measure(pair);
    worst_id = std::max({worst_id, mae(pair), 1 - s_measure(pair), 1 - e.max, 1 - weighted_f(pair).value});
    worst_e_mean = std::max(worst_e_mean, std::fabs(e.mean - verify::reference_e_measure(pair).mean));
  }
  out.check(worst_id < 1e-6, "pred == gt: mae 0, S_alpha = max E_phi = F_w = 1, worst deviation " +
                                 fmt("%.3g", worst_id));
  out.check(worst_e_mean < 1e-6, "pred == gt: mean E_phi over thresholds matches the sweep oracle, deviation " +
                                     fmt("%.3g", worst_e_mean));

  const GrayMap zeros(8, 8, 0.0), ones(8, 8, 1.0), soft(8, 8, 0.3);
  out.check(s_measure({zeros, zeros}) == 1.0, "empty gt, empty pred: S_alpha = 1");
  out.check(std::fabs(s_measure({soft, zeros}) - 0.7) < 1e-12, "empty gt: S_alpha = 1 - mean(pred)");
  out.check(std::fabs(s_measure({soft, ones}) - 0.3) < 1e-12, "full gt: S_alpha = mean(pred)");
  out.check(std::fabs(e_measure({ones, ones}).mean - 1.0) < 1e-12, "full gt, full pred: E_phi = 1");
  const auto e_empty = e_measure({zeros, zeros});
  out.check(e_empty.max == 1.0 && std::fabs(e_empty.mean - verify::reference_e_measure({zeros, zeros}).mean) < 1e-12,
            "empty gt, empty pred: max E_phi = 1, mean matches the sweep oracle");
  const auto f_empty = weighted_f({soft, zeros});
  out.check(f_empty.empty_gt && f_empty.value == 0.0, "empty gt: F_w = 0 and flagged");

  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const SegmentationPair pair{random_soft(rng, 8, 8), random_binary(rng, 8, 8, rng.uniform(0.05, 0.7))};
    const auto e = e_measure(pair), re = verify::reference_e_measure(pair);
    worst = std::max({worst, std::fabs(mae(pair) - verify::reference_mae(pair)),
                      std::fabs(s_measure(pair) - verify::reference_s_measure(pair)),
                      std::fabs(e.mean - re.mean), std::fabs(e.max - re.max),
                      std::fabs(weighted_f(pair).value - verify::reference_weighted_f(pair))});
  }
  out.check(worst < 1e-6, "200 random 8x8 pairs vs 64-bit references, max deviation " + fmt("%.3g", worst));
  return out;
}

Outcome loss_identities() {
  Outcome out;
  Rng rng(5);
  Tensor<double> g({2, 1, 16, 16});
  for (auto& v : g.data()) v = rng.uniform(0, 1) < 0.4 ? 1.0 : 0.0;
  Tensor<double> z(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) z[i] = g[i] > 0.5 ? 40.0 : -40.0;
  Tape<double> tape;
  const double total = total_loss(tape.constant(z), g).total.value()[0];
  out.check(total < 1e-6, "saturated correct prediction: total loss " + fmt("%.3g", total));

  const Tensor<double> full({1, 1, 4, 4}, 1.0);
  const double iou =
      weighted_iou(tape.constant(Tensor<double>(full.shape(), -60.0)), full, Tensor<double>(full.shape(), 1.0))
          .value()[0];
  out.check(std::fabs(iou - 16.0 / 17.0) < 1e-6, "weighted IoU hand case 16/17: " + fmt("%.9f", iou));

  Tensor<double> dot({1, 1, 9, 9});
  dot.at(0, 0, 4, 4) = 1.0;
  const double w = weight_map(dot, LossOptions{5.0, 3}).at(0, 0, 4, 4);
  out.check(std::fabs(w - 49.0 / 9.0) < 1e-6,
            "weight map single-pixel hand case 1 + 5 * 8/9 = 49/9: " + fmt("%.9f", w));
  return out;
}

Outcome fusion_envelope() {
  Outcome out;
  Rng rng(31);
  long long elements = 0, violations = 0;
  for (int eval = 0; eval < 1000; ++eval) {
    AcfmParams<double> p(4, eval % 2 ? AttentionKind::kConv : AttentionKind::kMsca, 2, true);
    p.init(rng);
    const double scale = rng.uniform(0.1, 10.0);
    const auto fa = random_tensor<double>(rng, {2, 4, 8, 8}, -scale, scale);
    const auto fb = random_tensor<double>(rng, {2, 4, 4, 4}, -scale, scale);
    Tape<double> tape;
    tape.set_grad_enabled(false);
    const auto up = upsample_bilinear(tape.constant(fb), 2).value();
    const auto pre = acfm_forward(tape.constant(fa), tape.constant(fb), p).pre_fusion.value();
    for (std::size_t i = 0; i < pre.size(); ++i) {
      const double lo = std::min(fa[i], up[i]), hi = std::max(fa[i], up[i]);
      const double slack = 1e-12 * (std::fabs(lo) + std::fabs(hi));
      violations += pre[i] < lo - slack || pre[i] > hi + slack;
      ++elements;
    }
  }
  out.check(violations == 0, "1000 evaluations, " + std::to_string(elements) + " elements, " +
                                 std::to_string(violations) + " outside the envelope");
  return out;
}

Outcome overfit(const fs::path& work) {
  Outcome out;
  const auto start = Clock::now();
  SynthOptions o;
  o.count = 8;
  o.size = 64;
  o.seed = 1;
  const auto data = synth_generate(work / "data", o);
  const Config cfg = tiny_config();
  const auto result = train(data, cfg, work / "run");
  const double final_loss = result.epoch_loss.back();
  const auto report = evaluate(result.checkpoint, data, work / "pred");
  const double secs = seconds_since(start);
  out.check(result.steps == 200, std::to_string(result.steps) + " optimizer steps");
  out.check(final_loss < 0.15, "final training loss " + fmt("%.4f", final_loss) + " (limit 0.15)");
  out.check(report.mean.s_alpha > 0.9, "train-set S_alpha " + fmt("%.4f", report.mean.s_alpha) + " (limit 0.9)");
  double worst = 0.0;
  for (std::size_t e = 4; e < result.epoch_loss.size(); ++e) {
    worst = std::max(worst, result.epoch_loss[e] / result.epoch_loss[e - 1]);
  }
  out.note("largest epoch-to-epoch loss ratio after epoch 3: " + fmt("%.3f", worst));
  out.check(secs < 600.0, "runtime " + fmt("%.1f", secs) + " s (limit 600 s)");
  return out;
}

Outcome ablation_direction(const fs::path& work) {
  Outcome out;
  SynthOptions o;
  o.size = 64;
  o.count = 200;
  o.seed = 101;
  synth_generate(work / "data" / "train", o);
  o.count = 50;
  o.seed = 202;
  synth_generate(work / "data" / "test", o);
  Config cfg = tiny_config();
  cfg.epochs = 30;
  cfg.decay_epoch = 24;
  const auto rows = ablate(cfg, work / "data", work / "out");
  std::printf("%s", ablation_csv(rows).c_str());
  const ImageScores* full = nullptr;
  const ImageScores* basic = nullptr;
  for (const auto& r : rows) {
    if (r.variant == Variant::kFull) full = &r.mean;
    if (r.variant == Variant::kBasic) basic = &r.mean;
  }
  out.check(rows.size() == 5 && full && basic, std::to_string(rows.size()) + " variants evaluated");
  if (full && basic) {
    out.check(full->s_alpha >= basic->s_alpha,
              "S_alpha Full " + fmt("%.4f", full->s_alpha) + " >= Basic " + fmt("%.4f", basic->s_alpha));
    out.check(full->f_w >= basic->f_w, "F_w Full " + fmt("%.4f", full->f_w) + " >= Basic " + fmt("%.4f", basic->f_w));
  }
  return out;
}

Outcome determinism(const fs::path& work) {
  Outcome out;
  SynthOptions o;
  o.count = 8;
  o.size = 64;
  o.seed = 5;
  synth_generate(work / "a" / "data", o);
  synth_generate(work / "b" / "data", o);
  Config cfg = tiny_config();
  cfg.epochs = 4;
  cfg.scales = {0.75, 1.0, 1.25};
  for (const char* run : {"a", "b"}) {
    const auto dir = work / run;
    const auto data = load_manifest(dir / "data");
    const auto result = train(data, cfg, dir / "run");
    auto params = load_checkpoint(result.checkpoint);
    infer_directory(params, dir / "data" / "images", dir / "pred");
    write_binary_file(dir / "report.csv", report_csv(evaluate_set(dir / "pred", dir / "data" / "masks")));
  }
  auto same_tree = [&](const fs::path& rel) {
    std::set<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(work / "a" / rel)) {
      if (e.is_regular_file()) files.insert(fs::relative(e.path(), work / "a"));
    }
    bool same = !files.empty();
    for (const auto& f : files) {
      same = same && fs::exists(work / "b" / f) &&
             read_binary_file(work / "a" / f) == read_binary_file(work / "b" / f);
    }
    return same;
  };
  out.check(same_tree("data"), "synthetic datasets identical");
  out.check(same_tree("run"), "checkpoints and loss logs identical");
  out.check(same_tree("pred"), "predictions identical");
  out.check(read_binary_file(work / "a" / "report.csv") == read_binary_file(work / "b" / "report.csv"),
            "CSV reports identical");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "c2f_acceptance").string();
  app.add_option("--only", only, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(work);
  auto fresh = [&](const std::string& name) {
    const auto dir = root / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"oracle equivalence", oracle_equivalence},
      {"metric identities", metric_identities},
      {"loss identities", loss_identities},
      {"fusion convex envelope", fusion_envelope},
      {"overfit check", [&] { return overfit(fresh("overfit")); }},
      {"ablation direction", [&] { return ablation_direction(fresh("ablation")); }},
      {"determinism", [&] { return determinism(fresh("determinism")); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& line : outcome.details) std::printf("%s\n", line.c_str());
    std::printf("criterion %d %s: %s (%.1f s)\n", id, outcome.passed ? "PASS" : "FAIL",
                criteria[i].first.c_str(), seconds_since(start));
    std::fflush(stdout);
    failures += !outcome.passed;
  }
  return failures == 0 ? 0 : 1;
}

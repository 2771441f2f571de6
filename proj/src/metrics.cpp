#include "c2f/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "c2f/image_io.hpp"
#include "c2f/parallel.hpp"

namespace c2f {
namespace {

constexpr double kEps = 2.220446049250313e-16;

bool is_fg(double v) { return v > 0.5; }

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation; 0 for fewer than two values.
double stddev_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double object_score(const std::vector<double>& x) {
  const double m = mean_of(x);
  return 2.0 * m / (m * m + 1.0 + stddev_of(x, m) + kEps);
}

double s_object(const SegmentationPair& pair) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < pair.gt.size(); ++i) {
    if (is_fg(pair.gt.values[i])) {
      fg.push_back(pair.pred.values[i]);
    } else {
      bg.push_back(1.0 - pair.pred.values[i]);
    }
  }
  const double u = static_cast<double>(fg.size()) / static_cast<double>(pair.gt.size());
  return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

/// Structural similarity of one region; 0/0 counts as a perfect match.
double region_ssim(const SegmentationPair& pair, int y0, int y1, int x0, int x1) {
  const int n = (y1 - y0) * (x1 - x0);
  if (n <= 0) return 0.0;
  double mx = 0, my = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      mx += pair.pred.at(y, x);
      my += pair.gt.at(y, x);
    }
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0, cxy = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double dx = pair.pred.at(y, x) - mx, dy = pair.gt.at(y, x) - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  }
  const double denom = std::max(n - 1, 1);
  vx /= denom;
  vy /= denom;
  cxy /= denom;
  const double alpha = 4.0 * mx * my * cxy;
  const double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const SegmentationPair& pair) {
  const int H = pair.gt.height, W = pair.gt.width;
  double sy = 0, sx = 0;
  std::size_t count = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (is_fg(pair.gt.at(y, x))) {
        sy += y;
        sx += x;
        ++count;
      }
    }
  }
  // Split point one past the rounded centroid (half-to-even rounding).
  const int cx = static_cast<int>(std::nearbyint(sx / static_cast<double>(count))) + 1;
  const int cy = static_cast<int>(std::nearbyint(sy / static_cast<double>(count))) + 1;
  const double area = static_cast<double>(H) * W;
  const double w1 = static_cast<double>(cx) * cy / area;
  const double w2 = static_cast<double>(W - cx) * cy / area;
  const double w3 = static_cast<double>(cx) * (H - cy) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * region_ssim(pair, 0, cy, 0, cx) + w2 * region_ssim(pair, 0, cy, cx, W) +
         w3 * region_ssim(pair, cy, H, 0, cx) + w4 * region_ssim(pair, cy, H, cx, W);
}

double gt_mean(const GrayMap& gt) {
  std::size_t fg = 0;
  for (double v : gt.values) fg += is_fg(v);
  return static_cast<double>(fg) / static_cast<double>(gt.size());
}

}  // namespace

void SegmentationPair::validate() const {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("prediction " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " does not match ground truth " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  if (gt.size() == 0) throw ShapeError("empty segmentation maps");
  if (pred.values.size() != pred.size() || gt.values.size() != gt.size()) {
    throw ShapeError("segmentation map storage does not match its extent");
  }
  for (double v : pred.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("prediction values must lie in [0, 1]");
  }
  for (double v : gt.values) {
    if (v != 0.0 && v != 1.0) throw DataError("ground truth must be binary");
  }
}

double mae(const SegmentationPair& pair) {
  pair.validate();
  double s = 0;
  for (std::size_t i = 0; i < pair.gt.size(); ++i) {
    s += std::abs(pair.pred.values[i] - pair.gt.values[i]);
  }
  return s / static_cast<double>(pair.gt.size());
}

double s_measure(const SegmentationPair& pair) {
  pair.validate();
  const double y = gt_mean(pair.gt);
  double score;
  if (y == 0.0) {
    score = 1.0 - mean_of(pair.pred.values);
  } else if (y == 1.0) {
    score = mean_of(pair.pred.values);
  } else {
    score = 0.5 * s_object(pair) + 0.5 * s_region(pair);
  }
  return std::clamp(score, 0.0, 1.0);
}

EMeasure e_measure(const SegmentationPair& pair) {
  pair.validate();
  constexpr int kLevels = 256;
  // level[i] = largest k with pred >= k/255; B(t_k) = 1 iff k <= level.
  std::vector<std::size_t> hist_fg(kLevels, 0), hist_bg(kLevels, 0);
  for (std::size_t i = 0; i < pair.gt.size(); ++i) {
    const double p = pair.pred.values[i];
    int k = std::clamp(static_cast<int>(std::floor(p * 255.0)), 0, kLevels - 1);
    while (k + 1 < kLevels && p >= (k + 1) / 255.0) ++k;
    while (k > 0 && p < k / 255.0) --k;
    (is_fg(pair.gt.values[i]) ? hist_fg : hist_bg)[k]++;
  }
  const double total = static_cast<double>(pair.gt.size());
  const double mg = gt_mean(pair.gt);
  // Pixels with level >= k, accumulated from the top.
  std::size_t above_fg = 0, above_bg = 0;
  std::vector<double> scores(kLevels);
  for (int k = kLevels - 1; k >= 0; --k) {
    above_fg += hist_fg[k];
    above_bg += hist_bg[k];
    const double n_fg = std::round(mg * total);
    const double count[2][2] = {
        {total - n_fg - static_cast<double>(above_bg), n_fg - static_cast<double>(above_fg)},
        {static_cast<double>(above_bg), static_cast<double>(above_fg)}};  // [B][g]
    const double mb = static_cast<double>(above_fg + above_bg) / total;
    double sum = 0;
    for (int b = 0; b < 2; ++b) {
      for (int g = 0; g < 2; ++g) {
        if (count[b][g] == 0) continue;
        double enhanced;
        if (mg == 0.0) {
          enhanced = 1.0 - b;
        } else if (mg == 1.0) {
          enhanced = b;
        } else {
          const double pb = b - mb, pg = g - mg;
          const double align = 2.0 * pb * pg / (pb * pb + pg * pg + kEps);
          enhanced = (align + 1.0) * (align + 1.0) / 4.0;
        }
        sum += count[b][g] * enhanced;
      }
    }
    scores[k] = sum / total;
  }
  EMeasure out;
  for (double s : scores) {
    out.mean += s;
    out.max = std::max(out.max, s);
  }
  out.mean /= kLevels;
  return out;
}

DistanceTransform distance_transform(const GrayMap& mask) {
  const int H = mask.height, W = mask.width;
  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  // Column pass: nearest foreground row per (y, x), upper row on ties.
  std::vector<long long> col_dist(static_cast<std::size_t>(H) * W, kInf);
  std::vector<int> col_row(static_cast<std::size_t>(H) * W, -1);
  bool any = false;
  for (int x = 0; x < W; ++x) {
    int above = -1;
    std::vector<int> up(H, -1), down(H, -1);
    for (int y = 0; y < H; ++y) {
      if (is_fg(mask.at(y, x))) above = y;
      up[y] = above;
    }
    int below = -1;
    for (int y = H - 1; y >= 0; --y) {
      if (is_fg(mask.at(y, x))) below = y;
      down[y] = below;
    }
    for (int y = 0; y < H; ++y) {
      int best = -1;
      if (up[y] >= 0) best = up[y];
      if (down[y] >= 0 && (best < 0 || down[y] - y < y - best)) best = down[y];
      if (best >= 0) {
        any = true;
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        col_row[i] = best;
        col_dist[i] = static_cast<long long>(best - y) * (best - y);
      }
    }
  }
  if (!any) throw ContractError("distance_transform: mask has no foreground pixel");

  DistanceTransform out{GrayMap(H, W), std::vector<int>(static_cast<std::size_t>(H) * W, -1)};
  std::vector<int> v(W);
  std::vector<double> z(W + 1);
  for (int y = 0; y < H; ++y) {
    const long long* f = col_dist.data() + static_cast<std::size_t>(y) * W;
    // Lower envelope of parabolas (x - q)^2 + f(q) over columns with a
    // foreground pixel; at equal values the smaller column wins.
    int k = -1;
    for (int q = 0; q < W; ++q) {
      if (f[q] >= kInf) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -std::numeric_limits<double>::infinity();
        z[1] = std::numeric_limits<double>::infinity();
        continue;
      }
      double s;
      while (true) {
        const int p = v[k];
        s = static_cast<double>((f[q] + static_cast<long long>(q) * q) -
                                (f[p] + static_cast<long long>(p) * p)) /
            static_cast<double>(2 * (q - p));
        if (s <= z[k]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = std::numeric_limits<double>::infinity();
    }
    int j = 0;
    for (int x = 0; x < W; ++x) {
      while (z[j + 1] < x) ++j;
      const int q = v[j];
      const long long d2 = static_cast<long long>(x - q) * (x - q) + f[q];
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      out.dist.values[i] = std::sqrt(static_cast<double>(d2));
      out.nearest[i] = col_row[static_cast<std::size_t>(y) * W + q] * W + q;
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(int k, double sigma) {
  if (k < 1 || k % 2 == 0) throw ContractError("gaussian_kernel: size must be odd");
  const int r = k / 2;
  std::vector<double> kernel(static_cast<std::size_t>(k) * k);
  double total = 0;
  for (int i = -r; i <= r; ++i) {
    for (int j = -r; j <= r; ++j) {
      const double v = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      kernel[(i + r) * k + (j + r)] = v;
      total += v;
    }
  }
  for (auto& v : kernel) v /= total;
  return kernel;
}

GrayMap gaussian_blur(const GrayMap& x, int k, double sigma) {
  const auto kernel = gaussian_kernel(k, sigma);
  const int r = k / 2;
  GrayMap out(x.height, x.width);
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        const int sy = y + i;
        if (sy < 0 || sy >= x.height) continue;
        for (int j = -r; j <= r; ++j) {
          const int sx = xx + j;
          if (sx < 0 || sx >= x.width) continue;
          acc += kernel[(i + r) * k + (j + r)] * x.at(sy, sx);
        }
      }
      out.at(y, xx) = acc;
    }
  }
  return out;
}

WeightedF weighted_f(const SegmentationPair& pair) {
  pair.validate();
  const GrayMap& gt = pair.gt;
  if (std::none_of(gt.values.begin(), gt.values.end(), is_fg)) return {0.0, true};

  const DistanceTransform dt = distance_transform(gt);
  const std::size_t n = gt.size();
  GrayMap err(gt.height, gt.width), spread(gt.height, gt.width);
  for (std::size_t i = 0; i < n; ++i) err.values[i] = std::abs(pair.pred.values[i] - gt.values[i]);
  for (std::size_t i = 0; i < n; ++i) {
    spread.values[i] = is_fg(gt.values[i]) ? err.values[i] : err.values[dt.nearest[i]];
  }
  const GrayMap blurred = gaussian_blur(spread, 7, 5.0);

  double fg_count = 0, fg_err = 0, bg_err = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool fg = is_fg(gt.values[i]);
    double e = err.values[i];
    if (fg && blurred.values[i] < e) e = blurred.values[i];
    const double importance = fg ? 1.0 : 2.0 - std::exp(std::log(0.5) / 5.0 * dt.dist.values[i]);
    const double ew = e * importance;
    if (fg) {
      fg_count += 1;
      fg_err += ew;
    } else {
      bg_err += ew;
    }
  }
  const double tp = fg_count - fg_err;
  const double recall = 1.0 - fg_err / fg_count;
  const double precision = tp / (tp + bg_err + kEps);
  const double f = 2.0 * recall * precision / (recall + precision + kEps);
  return {std::clamp(f, 0.0, 1.0), false};
}

ImageScores score_pair(const std::string& file, const SegmentationPair& pair) {
  ImageScores s;
  s.file = file;
  s.mae = mae(pair);
  s.s_alpha = s_measure(pair);
  const EMeasure e = e_measure(pair);
  s.e_phi_mean = e.mean;
  s.e_phi_max = e.max;
  const WeightedF f = weighted_f(pair);
  s.f_w = f.value;
  s.f_w_empty = f.empty_gt;
  return s;
}

MetricReport summarize(std::vector<ImageScores> images) {
  MetricReport report;
  report.images = std::move(images);
  report.mean.file = "MEAN";
  if (report.images.empty()) return report;
  for (const auto& s : report.images) {
    report.mean.mae += s.mae;
    report.mean.s_alpha += s.s_alpha;
    report.mean.e_phi_mean += s.e_phi_mean;
    report.mean.e_phi_max += s.e_phi_max;
    report.mean.f_w += s.f_w;
    report.mean.f_w_empty = report.mean.f_w_empty || s.f_w_empty;
  }
  const double n = static_cast<double>(report.images.size());
  report.mean.mae /= n;
  report.mean.s_alpha /= n;
  report.mean.e_phi_mean /= n;
  report.mean.e_phi_max /= n;
  report.mean.f_w /= n;
  return report;
}

namespace {

std::set<std::string> pgm_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::set<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      out.insert(entry.path().filename().string());
    }
  }
  return out;
}

}  // namespace

MetricReport evaluate_set(const std::filesystem::path& pred_dir,
                          const std::filesystem::path& gt_dir) {
  const auto preds = pgm_files(pred_dir);
  const auto gts = pgm_files(gt_dir);
  std::string missing;
  for (const auto& f : gts) {
    if (!preds.count(f)) missing += " " + f + " (no prediction)";
  }
  for (const auto& f : preds) {
    if (!gts.count(f)) missing += " " + f + " (no ground truth)";
  }
  if (!missing.empty()) throw DataError("unmatched files:" + missing);
  if (gts.empty()) throw DataError("no .pgm files in " + gt_dir.string());

  const std::vector<std::string> files(gts.begin(), gts.end());
  std::vector<ImageScores> scores(files.size());
  parallel_for(static_cast<int>(files.size()), [&](int i) {
    SegmentationPair pair{read_gray_map(pred_dir / files[i]), read_gray_map(gt_dir / files[i])};
    for (auto& v : pair.gt.values) v = v >= 0.5 ? 1.0 : 0.0;
    scores[i] = score_pair(files[i], pair);
  });
  return summarize(std::move(scores));
}

std::string report_csv(const MetricReport& report) {
  std::string out = "file,mae,s_alpha,e_phi_mean,e_phi_max,f_w\n";
  auto row = [&](const ImageScores& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.file.c_str(), s.mae,
                  s.s_alpha, s.e_phi_mean, s.e_phi_max, s.f_w);
    out += buf;
  };
  for (const auto& s : report.images) row(s);
  row(report.mean);
  return out;
}

}  // namespace c2f

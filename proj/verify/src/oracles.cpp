#include "c2f/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace c2f::verify {

Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& weight,
                            const Tensor<double>* bias, int stride, int dilation) {
  const int kh = weight.h(), kw = weight.w();
  const int ph = dilation * (kh - 1) / 2, pw = dilation * (kw - 1) / 2;
  const int oh = (x.h() + 2 * ph - dilation * (kh - 1) - 1) / stride + 1;
  const int ow = (x.w() + 2 * pw - dilation * (kw - 1) - 1) / stride + 1;
  Tensor<double> out({x.n(), weight.n(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < weight.n(); ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias ? bias->at(0, o, 0, 0) : 0.0;
          for (int i = 0; i < x.c(); ++i)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int sy = y * stride - ph + ky * dilation;
                const int sx = xx * stride - pw + kx * dilation;
                if (sy < 0 || sy >= x.h() || sx < 0 || sx >= x.w()) continue;
                acc += weight.at(o, i, ky, kx) * x.at(n, i, sy, sx);
              }
          out.at(n, o, y, xx) = acc;
        }
  return out;
}

Tensor<double> naive_avg_pool(const Tensor<double>& x, int kernel, int stride) {
  const int pad = kernel == stride ? 0 : (kernel - 1) / 2;
  const int oh = (x.h() + 2 * pad - kernel) / stride + 1;
  const int ow = (x.w() + 2 * pad - kernel) / stride + 1;
  Tensor<double> out({x.n(), x.c(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = 0;
          int count = 0;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
              const int sy = y * stride - pad + ky, sx = xx * stride - pad + kx;
              if (sy < 0 || sy >= x.h() || sx < 0 || sx >= x.w()) continue;
              acc += x.at(n, c, sy, sx);
              ++count;
            }
          out.at(n, c, y, xx) = acc / count;
        }
  return out;
}

Tensor<double> naive_resize_bilinear(const Tensor<double>& x, int out_h, int out_w) {
  Tensor<double> out({x.n(), x.c(), out_h, out_w});
  auto source = [](int o, int in, int out) {
    double s = (o + 0.5) * in / out - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < out_h; ++y)
        for (int xx = 0; xx < out_w; ++xx) {
          const double sy = source(y, x.h(), out_h), sx = source(xx, x.w(), out_w);
          const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
          const int y1 = std::min(y0 + 1, x.h() - 1), x1 = std::min(x0 + 1, x.w() - 1);
          const double fy = sy - y0, fx = sx - x0;
          out.at(n, c, y, xx) = (1 - fy) * (1 - fx) * x.at(n, c, y0, x0) +
                                (1 - fy) * fx * x.at(n, c, y0, x1) +
                                fy * (1 - fx) * x.at(n, c, y1, x0) + fy * fx * x.at(n, c, y1, x1);
        }
  return out;
}

GrayMap naive_gaussian_blur(const GrayMap& x, int k, double sigma) {
  const int r = k / 2;
  double norm = 0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) norm += std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  GrayMap out(x.height, x.width);
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx) {
      double acc = 0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) {
          const int sy = y + i, sx = xx + j;
          if (sy < 0 || sy >= x.height || sx < 0 || sx >= x.width) continue;
          acc += std::exp(-(i * i + j * j) / (2 * sigma * sigma)) / norm * x.at(sy, sx);
        }
      out.at(y, xx) = acc;
    }
  return out;
}

DistanceTransform brute_force_distance(const GrayMap& mask) {
  DistanceTransform out{GrayMap(mask.height, mask.width),
                        std::vector<int>(mask.size(), -1)};
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      long long best = std::numeric_limits<long long>::max();
      int best_index = -1;
      for (int qx = 0; qx < mask.width; ++qx)
        for (int qy = 0; qy < mask.height; ++qy) {
          if (mask.at(qy, qx) <= 0.5) continue;
          const long long d = static_cast<long long>(qy - y) * (qy - y) +
                              static_cast<long long>(qx - x) * (qx - x);
          if (d < best) {
            best = d;
            best_index = qy * mask.width + qx;
          }
        }
      out.dist.at(y, x) = std::sqrt(static_cast<double>(best));
      out.nearest[y * mask.width + x] = best_index;
    }
  return out;
}

double reference_mae(const SegmentationPair& pair) {
  double s = 0;
  for (int y = 0; y < pair.gt.height; ++y)
    for (int x = 0; x < pair.gt.width; ++x) s += std::fabs(pair.pred.at(y, x) - pair.gt.at(y, x));
  return s / (pair.gt.height * pair.gt.width);
}

namespace {

constexpr double kEps = 2.220446049250313e-16;

double object(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(var / (x.size() - 1)) : 0.0;
  return 2 * mean / (mean * mean + 1 + sd + kEps);
}

double ssim(const std::vector<double>& p, const std::vector<double>& g) {
  const std::size_t n = p.size();
  if (n == 0) return 0.0;
  double mp = 0, mg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += p[i];
    mg += g[i];
  }
  mp /= n;
  mg /= n;
  double sp = 0, sg = 0, spg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sp += (p[i] - mp) * (p[i] - mp);
    sg += (g[i] - mg) * (g[i] - mg);
    spg += (p[i] - mp) * (g[i] - mg);
  }
  const double d = n > 1 ? n - 1.0 : 1.0;
  sp /= d;
  sg /= d;
  spg /= d;
  const double a = 4 * mp * mg * spg;
  const double b = (mp * mp + mg * mg) * (sp + sg);
  if (a != 0) return a / (b + kEps);
  if (b == 0) return 1.0;
  return 0.0;
}

}  // namespace

double reference_s_measure(const SegmentationPair& pair) {
  const int H = pair.gt.height, W = pair.gt.width;
  double fg_count = 0, pred_sum = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      fg_count += pair.gt.at(y, x);
      pred_sum += pair.pred.at(y, x);
    }
  const double area = static_cast<double>(H) * W;
  const double mu = fg_count / area;
  if (mu == 0) return std::clamp(1.0 - pred_sum / area, 0.0, 1.0);
  if (mu == 1) return std::clamp(pred_sum / area, 0.0, 1.0);

  std::vector<double> fg, bg;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (pair.gt.at(y, x) == 1) {
        fg.push_back(pair.pred.at(y, x));
      } else {
        bg.push_back(1 - pair.pred.at(y, x));
      }
    }
  const double s_object = mu * object(fg) + (1 - mu) * object(bg);

  double ry = 0, rx = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (pair.gt.at(y, x) == 1) {
        ry += y;
        rx += x;
      }
  const int cy = static_cast<int>(std::nearbyint(ry / fg_count)) + 1;
  const int cx = static_cast<int>(std::nearbyint(rx / fg_count)) + 1;
  double s_region = 0;
  const int ys[3] = {0, cy, H}, xs[3] = {0, cx, W};
  double weight_used = 0;
  for (int qy = 0; qy < 2; ++qy)
    for (int qx = 0; qx < 2; ++qx) {
      std::vector<double> p, g;
      for (int y = ys[qy]; y < ys[qy + 1]; ++y)
        for (int x = xs[qx]; x < xs[qx + 1]; ++x) {
          p.push_back(pair.pred.at(y, x));
          g.push_back(pair.gt.at(y, x));
        }
      double weight = static_cast<double>(ys[qy + 1] - ys[qy]) * (xs[qx + 1] - xs[qx]) / area;
      if (qy == 1 && qx == 1) weight = 1 - weight_used;
      weight_used += weight;
      s_region += weight * ssim(p, g);
    }
  return std::clamp(0.5 * s_object + 0.5 * s_region, 0.0, 1.0);
}

EMeasure reference_e_measure(const SegmentationPair& pair) {
  const std::size_t n = pair.gt.size();
  double mg = 0;
  for (double g : pair.gt.values) mg += g;
  mg /= n;
  EMeasure out;
  for (int k = 0; k <= 255; ++k) {
    const double t = k / 255.0;
    std::vector<double> b(n);
    double mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = pair.pred.values[i] >= t ? 1.0 : 0.0;
      mb += b[i];
    }
    mb /= n;
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mg == 0) {
        e += 1 - b[i];
      } else if (mg == 1) {
        e += b[i];
      } else {
        const double fb = b[i] - mb, fg = pair.gt.values[i] - mg;
        const double xi = 2 * fb * fg / (fb * fb + fg * fg + kEps);
        e += (xi + 1) * (xi + 1) / 4;
      }
    }
    e /= n;
    out.mean += e / 256;
    out.max = std::max(out.max, e);
  }
  return out;
}

double reference_weighted_f(const SegmentationPair& pair) {
  const GrayMap& gt = pair.gt;
  const int H = gt.height, W = gt.width;
  bool any = false;
  for (double g : gt.values) any = any || g == 1;
  if (!any) return 0.0;
  const DistanceTransform near = brute_force_distance(gt);
  GrayMap err(H, W), subst(H, W);
  for (int i = 0; i < H * W; ++i) err.values[i] = std::fabs(pair.pred.values[i] - gt.values[i]);
  for (int i = 0; i < H * W; ++i) subst.values[i] = err.values[near.nearest[i]];
  const GrayMap ea = naive_gaussian_blur(subst, 7, 5.0);
  double sum_gt = 0, ew_fg = 0, ew_bg = 0;
  for (int i = 0; i < H * W; ++i) {
    const bool fg = gt.values[i] == 1;
    const double e = fg ? std::min(err.values[i], ea.values[i]) : err.values[i];
    const double b = fg ? 1.0 : 2 - std::exp(std::log(0.5) / 5 * near.dist.values[i]);
    if (fg) {
      sum_gt += 1;
      ew_fg += e * b;
    } else {
      ew_bg += e * b;
    }
  }
  const double tp = sum_gt - ew_fg;
  const double r = 1 - ew_fg / sum_gt;
  const double p = tp / (kEps + tp + ew_bg);
  return std::clamp(2 * r * p / (kEps + r + p), 0.0, 1.0);
}

Tensor<double> reference_weight_map(const Tensor<double>& gt, double lambda, int k) {
  Tensor<double> out(gt.shape());
  const int r = k / 2;
  for (int n = 0; n < gt.n(); ++n)
    for (int c = 0; c < gt.c(); ++c)
      for (int y = 0; y < gt.h(); ++y)
        for (int x = 0; x < gt.w(); ++x) {
          double s = 0;
          int count = 0;
          for (int sy = y - r; sy <= y + r; ++sy)
            for (int sx = x - r; sx <= x + r; ++sx) {
              if (sy < 0 || sy >= gt.h() || sx < 0 || sx >= gt.w()) continue;
              s += gt.at(n, c, sy, sx);
              ++count;
            }
          out.at(n, c, y, x) = 1 + lambda * std::fabs(s / count - gt.at(n, c, y, x));
        }
  return out;
}

double reference_weighted_bce(const Tensor<double>& logits, const Tensor<double>& gt,
                              const Tensor<double>& w) {
  double total = 0;
  const std::size_t plane = gt.size() / gt.n();
  for (int n = 0; n < gt.n(); ++n) {
    double num = 0, den = 0;
    for (std::size_t i = n * plane; i < (n + 1) * plane; ++i) {
      const double p = std::clamp(1 / (1 + std::exp(-logits[i])), 1e-15, 1 - 1e-15);
      num += w[i] * -(gt[i] * std::log(p) + (1 - gt[i]) * std::log(1 - p));
      den += w[i];
    }
    total += num / den;
  }
  return total / gt.n();
}

double reference_weighted_iou(const Tensor<double>& logits, const Tensor<double>& gt,
                              const Tensor<double>& w) {
  double total = 0;
  const std::size_t plane = gt.size() / gt.n();
  for (int n = 0; n < gt.n(); ++n) {
    double inter = 0, uni = 0;
    for (std::size_t i = n * plane; i < (n + 1) * plane; ++i) {
      const double p = 1 / (1 + std::exp(-logits[i]));
      inter += w[i] * p * gt[i];
      uni += w[i] * (p + gt[i] - p * gt[i]);
    }
    total += 1 - (inter + 1) / (uni + 1);
  }
  return total / gt.n();
}

}  // namespace c2f::verify

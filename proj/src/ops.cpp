#include "c2f/ops.hpp"

#include <algorithm>
#include <cmath>

#include "c2f/parallel.hpp"

namespace c2f {
namespace {

/// Output indices o in [lo, hi) for which o*stride + offset lies in [0, in).
struct Range {
  int lo;
  int hi;
};

Range valid_range(int in, int out, int offset, int stride) {
  const int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const int last = in - 1 - offset;
  const int hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  return {lo, std::max(lo, hi)};
}

template <typename T>
bool wants(Tape<T>& tape, const Var<T>& v) {
  return v.valid() && tape.requires_grad(v.id());
}

/// Per-axis bilinear taps with half-pixel centers.
struct AxisTaps {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

AxisTaps bilinear_taps(int in, int out) {
  AxisTaps taps;
  taps.i0.resize(out);
  taps.i1.resize(out);
  taps.frac.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = ((o + 0.5) * in) / out - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    taps.i0[o] = i0;
    taps.i1[o] = std::min(i0 + 1, in - 1);
    taps.frac[o] = src - i0;
  }
  return taps;
}

}  // namespace

// ---------------------------------------------------------------- conv2d

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geom) {
  const Tensor<T>& in = x.value();
  const Tensor<T>& w = weight.value();
  if (in.c() != w.c()) {
    throw ShapeError("conv2d: input " + in.shape().str() + " does not match weight " +
                     w.shape().str());
  }
  if (w.h() % 2 == 0 || w.w() % 2 == 0) throw ContractError("conv2d: kernel extents must be odd");
  if (geom.stride < 1 || geom.dilation < 1) {
    throw ContractError("conv2d: stride and dilation must be >= 1");
  }
  if (bias.valid() && bias.value().size() != static_cast<std::size_t>(w.n())) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " does not match weight " +
                     w.shape().str());
  }
  const int s = geom.stride, d = geom.dilation;
  const int kh = w.h(), kw = w.w();
  const int ph = d * (kh - 1) / 2, pw = d * (kw - 1) / 2;
  const int H = in.h(), W = in.w();
  const int OH = conv_out_size(H, kh, ph, s, d), OW = conv_out_size(W, kw, pw, s, d);
  if (OH < 1 || OW < 1) throw ShapeError("conv2d: input " + in.shape().str() + " too small");
  const int N = in.n(), IC = in.c(), OC = w.n();

  Tensor<T> out(Shape{N, OC, OH, OW});
  parallel_for(N * OC, [&](int job) {
    const int n = job / OC, oc = job % OC;
    T* op = out.plane(n, oc);
    std::fill(op, op + static_cast<std::size_t>(OH) * OW, bias.valid() ? bias.value()[oc] : T(0));
    for (int ic = 0; ic < IC; ++ic) {
      const T* ip = in.plane(n, ic);
      for (int ky = 0; ky < kh; ++ky) {
        const int dy = ky * d - ph;
        const Range ry = valid_range(H, OH, dy, s);
        for (int kx = 0; kx < kw; ++kx) {
          const int dx = kx * d - pw;
          const Range rx = valid_range(W, OW, dx, s);
          const T wv = w.at(oc, ic, ky, kx);
          for (int oy = ry.lo; oy < ry.hi; ++oy) {
            const T* irow = ip + static_cast<std::size_t>(oy * s + dy) * W + dx;
            T* orow = op + static_cast<std::size_t>(oy) * OW;
            if (s == 1) {
              for (int ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * irow[ox];
            } else {
              for (int ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * irow[ox * s];
            }
          }
        }
      }
    }
  });

  std::vector<Var<T>> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return x.tape().record(
      std::move(out), parents,
      [x, weight, bias, s, d, kh, kw, ph, pw, H, W, OH, OW, N, IC, OC](Tape<T>& tape,
                                                                        const Tensor<T>& g) {
        const Tensor<T>& in = tape.value(x.id());
        const Tensor<T>& w = tape.value(weight.id());
        if (wants(tape, x)) {
          Tensor<T>& gx = tape.grad_buffer(x.id());
          parallel_for(N * IC, [&](int job) {
            const int n = job / IC, ic = job % IC;
            T* gp = gx.plane(n, ic);
            for (int oc = 0; oc < OC; ++oc) {
              const T* gop = g.plane(n, oc);
              for (int ky = 0; ky < kh; ++ky) {
                const int dy = ky * d - ph;
                const Range ry = valid_range(H, OH, dy, s);
                for (int kx = 0; kx < kw; ++kx) {
                  const int dx = kx * d - pw;
                  const Range rx = valid_range(W, OW, dx, s);
                  const T wv = w.at(oc, ic, ky, kx);
                  for (int oy = ry.lo; oy < ry.hi; ++oy) {
                    T* grow = gp + static_cast<std::size_t>(oy * s + dy) * W + dx;
                    const T* orow = gop + static_cast<std::size_t>(oy) * OW;
                    if (s == 1) {
                      for (int ox = rx.lo; ox < rx.hi; ++ox) grow[ox] += wv * orow[ox];
                    } else {
                      for (int ox = rx.lo; ox < rx.hi; ++ox) grow[ox * s] += wv * orow[ox];
                    }
                  }
                }
              }
            }
          });
        }
        if (wants(tape, weight)) {
          Tensor<T>& gw = tape.grad_buffer(weight.id());
          parallel_for(OC, [&](int oc) {
            for (int ic = 0; ic < IC; ++ic) {
              for (int ky = 0; ky < kh; ++ky) {
                const int dy = ky * d - ph;
                const Range ry = valid_range(H, OH, dy, s);
                for (int kx = 0; kx < kw; ++kx) {
                  const int dx = kx * d - pw;
                  const Range rx = valid_range(W, OW, dx, s);
                  T acc = 0;
                  for (int n = 0; n < N; ++n) {
                    const T* ip = in.plane(n, ic);
                    const T* gop = g.plane(n, oc);
                    for (int oy = ry.lo; oy < ry.hi; ++oy) {
                      const T* irow = ip + static_cast<std::size_t>(oy * s + dy) * W + dx;
                      const T* orow = gop + static_cast<std::size_t>(oy) * OW;
                      if (s == 1) {
                        for (int ox = rx.lo; ox < rx.hi; ++ox) acc += orow[ox] * irow[ox];
                      } else {
                        for (int ox = rx.lo; ox < rx.hi; ++ox) acc += orow[ox] * irow[ox * s];
                      }
                    }
                  }
                  gw.at(oc, ic, ky, kx) += acc;
                }
              }
            }
          });
        }
        if (wants(tape, bias)) {
          Tensor<T>& gb = tape.grad_buffer(bias.id());
          const std::size_t plane = static_cast<std::size_t>(OH) * OW;
          for (int oc = 0; oc < OC; ++oc) {
            T acc = 0;
            for (int n = 0; n < N; ++n) {
              const T* gop = g.plane(n, oc);
              for (std::size_t i = 0; i < plane; ++i) acc += gop[i];
            }
            gb[oc] += acc;
          }
        }
      });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const ConvParams<T>& p) {
  Tape<T>& tape = x.tape();
  return conv2d(x, tape.param(p.weight), tape.param(p.bias), ConvGeometry{p.stride, p.dilation});
}

// ------------------------------------------------------------ batch_norm

template <typename T>
Var<T> batch_norm(const Var<T>& x, BatchNormState<T>& state) {
  const Tensor<T>& in = x.value();
  const int N = in.n(), C = in.c();
  if (C != state.channels()) {
    throw ShapeError("batch_norm: input " + in.shape().str() + " has " + std::to_string(C) +
                     " channels, state has " + std::to_string(state.channels()));
  }
  const std::size_t plane = in.shape().plane();
  const std::size_t count = plane * N;
  const bool train = state.mode == Mode::kTrain;
  if (train && count < 2) {
    throw ContractError("batch_norm: degenerate statistics, train mode needs n*h*w >= 2, got " +
                        in.shape().str());
  }

  Tape<T>& tape = x.tape();
  Var<T> gamma = tape.param(state.gamma);
  Var<T> beta = tape.param(state.beta);

  std::vector<T> mean(C), invstd(C);
  for (int c = 0; c < C; ++c) {
    if (train) {
      double s = 0;
      for (int n = 0; n < N; ++n) {
        const T* p = in.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double v = 0;
      for (int n = 0; n < N; ++n) {
        const T* p = in.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      }
      const double var = v / static_cast<double>(count);
      mean[c] = static_cast<T>(m);
      invstd[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(state.eps)));
      const double unbiased = v / static_cast<double>(count - 1);
      state.running_mean[c] =
          static_cast<T>((1 - state.momentum) * state.running_mean[c] + state.momentum * m);
      state.running_var[c] =
          static_cast<T>((1 - state.momentum) * state.running_var[c] + state.momentum * unbiased);
    } else {
      mean[c] = state.running_mean[c];
      invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) +
                                                 static_cast<double>(state.eps)));
    }
  }

  Tensor<T> out(in.shape());
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* p = in.plane(n, c);
      T* o = out.plane(n, c);
      const T scale = invstd[c] * gamma.value()[c];
      const T shift = beta.value()[c];
      for (std::size_t i = 0; i < plane; ++i) o[i] = (p[i] - mean[c]) * scale + shift;
    }
  }

  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean, invstd, train, N, C, plane, count](Tape<T>& tape,
                                                               const Tensor<T>& g) {
        const Tensor<T>& in = tape.value(x.id());
        const Tensor<T>& gm = tape.value(gamma.id());
        Tensor<T>* gx = wants(tape, x) ? &tape.grad_buffer(x.id()) : nullptr;
        Tensor<T>* ggamma = wants(tape, gamma) ? &tape.grad_buffer(gamma.id()) : nullptr;
        Tensor<T>* gbeta = wants(tape, beta) ? &tape.grad_buffer(beta.id()) : nullptr;
        for (int c = 0; c < C; ++c) {
          double sum_g = 0, sum_gx = 0;
          for (int n = 0; n < N; ++n) {
            const T* gp = g.plane(n, c);
            const T* p = in.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += gp[i];
              sum_gx += gp[i] * (p[i] - mean[c]) * invstd[c];
            }
          }
          if (ggamma) (*ggamma)[c] += static_cast<T>(sum_gx);
          if (gbeta) (*gbeta)[c] += static_cast<T>(sum_g);
          if (!gx) continue;
          const T k = gm[c] * invstd[c];
          if (train) {
            const T mg = static_cast<T>(sum_g / static_cast<double>(count));
            const T mgx = static_cast<T>(sum_gx / static_cast<double>(count));
            for (int n = 0; n < N; ++n) {
              const T* gp = g.plane(n, c);
              const T* p = in.plane(n, c);
              T* o = gx->plane(n, c);
              for (std::size_t i = 0; i < plane; ++i) {
                const T xhat = (p[i] - mean[c]) * invstd[c];
                o[i] += k * (gp[i] - mg - xhat * mgx);
              }
            }
          } else {
            for (int n = 0; n < N; ++n) {
              const T* gp = g.plane(n, c);
              T* o = gx->plane(n, c);
              for (std::size_t i = 0; i < plane; ++i) o[i] += k * gp[i];
            }
          }
        }
      });
}

// ------------------------------------------------------------ activation

template <typename T>
Var<T> activation(const Var<T>& x, Activation kind) {
  const Tensor<T>& in = x.value();
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in[i];
    if (kind == Activation::kRelu) {
      out[i] = v > T(0) ? v : T(0);
    } else if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  Tape<T>& tape = x.tape();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), {x}, [x, kind, self](Tape<T>& tape, const Tensor<T>& g) {
    const Tensor<T>& y = tape.value(self);
    Tensor<T>& gx = tape.grad_buffer(x.id());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (kind == Activation::kRelu) {
        if (y[i] > T(0)) gx[i] += g[i];
      } else {
        gx[i] += g[i] * y[i] * (T(1) - y[i]);
      }
    }
  });
}

// --------------------------------------------------------------- pooling

template <typename T>
Var<T> avg_pool(const Var<T>& x, int kernel, int stride) {
  if (kernel < 1 || stride < 1) {
    throw ContractError("avg_pool: kernel and stride must be >= 1, got k=" +
                        std::to_string(kernel) + " stride=" + std::to_string(stride));
  }
  const Tensor<T>& in = x.value();
  const int H = in.h(), W = in.w();
  const bool block = kernel == stride;
  if (block && (H % stride != 0 || W % stride != 0)) {
    throw ShapeError("avg_pool: spatial size of " + in.shape().str() +
                     " is not divisible by stride " + std::to_string(stride));
  }
  const int pad = block ? 0 : (kernel - 1) / 2;
  const int OH = conv_out_size(H, kernel, pad, stride, 1);
  const int OW = conv_out_size(W, kernel, pad, stride, 1);
  if (OH < 1 || OW < 1) throw ShapeError("avg_pool: input " + in.shape().str() + " too small");

  // Window bounds per output row/column, clipped to the input.
  auto bounds = [&](int out, int size) {
    std::vector<std::pair<int, int>> b(out);
    for (int o = 0; o < out; ++o) {
      const int start = o * stride - pad;
      b[o] = {std::max(start, 0), std::min(start + kernel, size)};
    }
    return b;
  };
  const auto by = bounds(OH, H), bx = bounds(OW, W);

  Tensor<T> out(Shape{in.n(), in.c(), OH, OW});
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      const T* p = in.plane(n, c);
      T* o = out.plane(n, c);
      for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
          T acc = 0;
          for (int y = by[oy].first; y < by[oy].second; ++y) {
            for (int xx = bx[ox].first; xx < bx[ox].second; ++xx) acc += p[y * W + xx];
          }
          const int cnt = (by[oy].second - by[oy].first) * (bx[ox].second - bx[ox].first);
          o[oy * OW + ox] = acc / static_cast<T>(cnt);
        }
      }
    }
  }
  return x.tape().record(std::move(out), {x}, [x, by, bx, OH, OW, W](Tape<T>& tape,
                                                                      const Tensor<T>& g) {
    Tensor<T>& gx = tape.grad_buffer(x.id());
    for (int n = 0; n < gx.n(); ++n) {
      for (int c = 0; c < gx.c(); ++c) {
        const T* gp = g.plane(n, c);
        T* o = gx.plane(n, c);
        for (int oy = 0; oy < OH; ++oy) {
          for (int ox = 0; ox < OW; ++ox) {
            const int cnt = (by[oy].second - by[oy].first) * (bx[ox].second - bx[ox].first);
            const T share = gp[oy * OW + ox] / static_cast<T>(cnt);
            for (int y = by[oy].first; y < by[oy].second; ++y) {
              for (int xx = bx[ox].first; xx < bx[ox].second; ++xx) o[y * W + xx] += share;
            }
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Tensor<T>& in = x.value();
  const std::size_t plane = in.shape().plane();
  if (plane == 0) throw ShapeError("global_avg_pool: empty spatial extent " + in.shape().str());
  Tensor<T> out(Shape{in.n(), in.c(), 1, 1});
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      const T* p = in.plane(n, c);
      double acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out.at(n, c, 0, 0) = static_cast<T>(acc / static_cast<double>(plane));
    }
  }
  return x.tape().record(std::move(out), {x}, [x, plane](Tape<T>& tape, const Tensor<T>& g) {
    Tensor<T>& gx = tape.grad_buffer(x.id());
    for (int n = 0; n < gx.n(); ++n) {
      for (int c = 0; c < gx.c(); ++c) {
        const T share = g.at(n, c, 0, 0) / static_cast<T>(plane);
        T* o = gx.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) o[i] += share;
      }
    }
  });
}

// -------------------------------------------------------------- bilinear

namespace kernels {

template <typename T>
void resize_bilinear(const Tensor<T>& in, Tensor<T>& out) {
  if (in.n() != out.n() || in.c() != out.c()) {
    throw ShapeError("resize_bilinear: " + in.shape().str() + " -> " + out.shape().str());
  }
  const AxisTaps ty = bilinear_taps(in.h(), out.h());
  const AxisTaps tx = bilinear_taps(in.w(), out.w());
  const int W = in.w(), OW = out.w();
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      const T* p = in.plane(n, c);
      T* o = out.plane(n, c);
      for (int oy = 0; oy < out.h(); ++oy) {
        const T ly = static_cast<T>(ty.frac[oy]);
        const T* r0 = p + static_cast<std::size_t>(ty.i0[oy]) * W;
        const T* r1 = p + static_cast<std::size_t>(ty.i1[oy]) * W;
        for (int ox = 0; ox < OW; ++ox) {
          const T lx = static_cast<T>(tx.frac[ox]);
          const T top = (T(1) - lx) * r0[tx.i0[ox]] + lx * r0[tx.i1[ox]];
          const T bot = (T(1) - lx) * r1[tx.i0[ox]] + lx * r1[tx.i1[ox]];
          o[oy * OW + ox] = (T(1) - ly) * top + ly * bot;
        }
      }
    }
  }
}

template <typename T>
Tensor<T> box_mean(const Tensor<T>& in, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ContractError("box_mean: kernel must be odd");
  const int r = kernel / 2;
  const int H = in.h(), W = in.w();
  Tensor<T> out(in.shape());
  std::vector<double> sat(static_cast<std::size_t>(H + 1) * (W + 1));
  auto S = [&](int y, int x) -> double& { return sat[static_cast<std::size_t>(y) * (W + 1) + x]; };
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      const T* p = in.plane(n, c);
      for (int y = 0; y < H; ++y) {
        double row = 0;
        for (int x = 0; x < W; ++x) {
          row += p[y * W + x];
          S(y + 1, x + 1) = S(y, x + 1) + row;
        }
      }
      T* o = out.plane(n, c);
      for (int y = 0; y < H; ++y) {
        const int y0 = std::max(0, y - r), y1 = std::min(H, y + r + 1);
        for (int x = 0; x < W; ++x) {
          const int x0 = std::max(0, x - r), x1 = std::min(W, x + r + 1);
          const double total = S(y1, x1) - S(y0, x1) - S(y1, x0) + S(y0, x0);
          o[y * W + x] = static_cast<T>(total / ((y1 - y0) * (x1 - x0)));
        }
      }
    }
  }
  return out;
}

}  // namespace kernels

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w) {
  const Tensor<T>& in = x.value();
  if (out_h < 1 || out_w < 1) throw ContractError("resize_bilinear: output size must be positive");
  Tensor<T> out(Shape{in.n(), in.c(), out_h, out_w});
  kernels::resize_bilinear(in, out);
  const int H = in.h(), W = in.w();
  return x.tape().record(std::move(out), {x}, [x, H, W, out_h, out_w](Tape<T>& tape,
                                                                       const Tensor<T>& g) {
    const AxisTaps ty = bilinear_taps(H, out_h);
    const AxisTaps tx = bilinear_taps(W, out_w);
    Tensor<T>& gx = tape.grad_buffer(x.id());
    for (int n = 0; n < gx.n(); ++n) {
      for (int c = 0; c < gx.c(); ++c) {
        const T* gp = g.plane(n, c);
        T* o = gx.plane(n, c);
        for (int oy = 0; oy < out_h; ++oy) {
          const T ly = static_cast<T>(ty.frac[oy]);
          T* r0 = o + static_cast<std::size_t>(ty.i0[oy]) * W;
          T* r1 = o + static_cast<std::size_t>(ty.i1[oy]) * W;
          for (int ox = 0; ox < out_w; ++ox) {
            const T lx = static_cast<T>(tx.frac[ox]);
            const T v = gp[oy * out_w + ox];
            r0[tx.i0[ox]] += (T(1) - ly) * (T(1) - lx) * v;
            r0[tx.i1[ox]] += (T(1) - ly) * lx * v;
            r1[tx.i0[ox]] += ly * (T(1) - lx) * v;
            r1[tx.i1[ox]] += ly * lx * v;
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int factor) {
  if (factor < 1) throw ContractError("upsample_bilinear: factor must be >= 1");
  return resize_bilinear(x, x.shape().h * factor, x.shape().w * factor);
}

// ----------------------------------------------------------- elementwise

template <typename T>
Var<T> elementwise(const Var<T>& a, const Var<T>& b, Elementwise kind) {
  const Tensor<T>& ta = a.value();
  const Tensor<T>& tb = b.value();
  const bool same = ta.shape() == tb.shape();
  const bool bcast = !same && tb.n() == ta.n() && tb.c() == ta.c() && tb.h() == 1 && tb.w() == 1;
  if (!same && !bcast) {
    throw ShapeError("elementwise: incompatible shapes " + ta.shape().str() + " and " +
                     tb.shape().str());
  }
  const std::size_t plane = same ? 1 : ta.shape().plane();
  Tensor<T> out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const T bv = tb[i / plane];
    out[i] = kind == Elementwise::kAdd ? ta[i] + bv : ta[i] * bv;
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, kind, plane](Tape<T>& tape,
                                                                       const Tensor<T>& g) {
    const Tensor<T>& ta = tape.value(a.id());
    const Tensor<T>& tb = tape.value(b.id());
    if (wants(tape, a)) {
      Tensor<T>& ga = tape.grad_buffer(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += kind == Elementwise::kAdd ? g[i] : g[i] * tb[i / plane];
      }
    }
    if (wants(tape, b)) {
      Tensor<T>& gb = tape.grad_buffer(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) {
        gb[i / plane] += kind == Elementwise::kAdd ? g[i] : g[i] * ta[i];
      }
    }
  });
}

template <typename T>
Var<T> one_minus(const Var<T>& x) {
  const Tensor<T>& in = x.value();
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = T(1) - in[i];
  return x.tape().record(std::move(out), {x}, [x](Tape<T>& tape, const Tensor<T>& g) {
    Tensor<T>& gx = tape.grad_buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
  });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> xs) {
  if (xs.empty()) throw ContractError("concat_channels: empty input list");
  const Shape first = xs.front().shape();
  int channels = 0;
  for (const auto& v : xs) {
    const Shape s = v.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " does not match " + first.str());
    }
    channels += s.c;
  }
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  std::vector<Var<T>> parents(xs.begin(), xs.end());
  std::vector<int> offsets;
  int offset = 0;
  for (const auto& v : xs) {
    const Tensor<T>& t = v.value();
    for (int n = 0; n < first.n; ++n) {
      std::copy_n(t.plane(n, 0), plane * t.c(), out.plane(n, offset));
    }
    offsets.push_back(offset);
    offset += t.c();
  }
  return xs.front().tape().record(
      std::move(out), parents, [parents, offsets, plane](Tape<T>& tape, const Tensor<T>& g) {
        for (std::size_t k = 0; k < parents.size(); ++k) {
          if (!wants(tape, parents[k])) continue;
          Tensor<T>& gx = tape.grad_buffer(parents[k].id());
          for (int n = 0; n < gx.n(); ++n) {
            const T* src = g.plane(n, offsets[k]);
            T* dst = gx.plane(n, 0);
            for (std::size_t i = 0; i < plane * gx.c(); ++i) dst[i] += src[i];
          }
        }
      });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  double acc = 0;
  for (T v : x.value().data()) acc += v;
  return x.tape().record(Tensor<T>::scalar(static_cast<T>(acc)), {x},
                         [x](Tape<T>& tape, const Tensor<T>& g) {
                           Tensor<T>& gx = tape.grad_buffer(x.id());
                           for (auto& v : gx.data()) v += g[0];
                         });
}

#define C2F_INSTANTIATE(T)                                                             \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);   \
  template Var<T> conv2d(const Var<T>&, const ConvParams<T>&);                         \
  template Var<T> batch_norm(const Var<T>&, BatchNormState<T>&);                       \
  template Var<T> activation(const Var<T>&, Activation);                               \
  template Var<T> avg_pool(const Var<T>&, int, int);                                   \
  template Var<T> global_avg_pool(const Var<T>&);                                      \
  template Var<T> resize_bilinear(const Var<T>&, int, int);                            \
  template Var<T> upsample_bilinear(const Var<T>&, int);                               \
  template Var<T> elementwise(const Var<T>&, const Var<T>&, Elementwise);              \
  template Var<T> one_minus(const Var<T>&);                                            \
  template Var<T> concat_channels(std::span<const Var<T>>);                            \
  template Var<T> sum(const Var<T>&);                                                  \
  template void kernels::resize_bilinear(const Tensor<T>&, Tensor<T>&);                \
  template Tensor<T> kernels::box_mean(const Tensor<T>&, int);

C2F_INSTANTIATE(float)
C2F_INSTANTIATE(double)

}  // namespace c2f

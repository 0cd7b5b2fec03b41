// SPDX-License-Identifier: Apache-2.0
#include "enrol/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "enrol/core/error.hpp"
#include "enrol/simd/kernels.hpp"

namespace enrol::ops {
namespace {

void require_rank(const Var& v, std::size_t rank, const char* op, const char* what) {
  if (v.shape().size() != rank)
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_string(v.shape()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

std::size_t spatial_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t i = 2; i < s.size(); ++i) n *= s[i];
  return n;
}

struct ConvGeometry {
  std::size_t cin, d, h, w;
  std::size_t k, stride, pad;
  std::size_t od, oh, ow;

  std::size_t in_volume() const { return d * h * w; }
  std::size_t out_volume() const { return od * oh * ow; }
  std::size_t col_rows() const { return cin * k * k * k; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

// Unfolds one sample [Cin,D,H,W] into patch rows [OD*OH*OW, Cin*k^3]; row p
// holds the receptive field of output position p.
// Only rows [p0, p1) are produced so a tile stays cache resident.
template <std::size_t K>
void im2row_fixed(const ConvGeometry& g, const Real* in, std::size_t p0, std::size_t p1,
                  Real* rows) {
  const std::size_t k = K ? K : g.k;
  const std::size_t width = g.col_rows();
  const long d = static_cast<long>(g.d), h = static_cast<long>(g.h), w = static_cast<long>(g.w);
  Real* dst = rows;
  for (std::size_t p = p0; p < p1; ++p, dst += width) {
    const std::size_t x = p % g.ow, y = (p / g.ow) % g.oh, z = p / (g.ow * g.oh);
    const long z0 = static_cast<long>(z * g.stride) - static_cast<long>(g.pad);
    const long y0 = static_cast<long>(y * g.stride) - static_cast<long>(g.pad);
    const long x0 = static_cast<long>(x * g.stride) - static_cast<long>(g.pad);
    const bool x_inside = x0 >= 0 && x0 + static_cast<long>(k) <= w;
    Real* out = dst;
    for (std::size_t c = 0; c < g.cin; ++c) {
      const Real* plane = in + c * g.in_volume();
      for (std::size_t kd = 0; kd < k; ++kd) {
        const long iz = z0 + static_cast<long>(kd);
        for (std::size_t kh = 0; kh < k; ++kh, out += k) {
          const long iy = y0 + static_cast<long>(kh);
          if (iz < 0 || iz >= d || iy < 0 || iy >= h) {
            for (std::size_t kw = 0; kw < k; ++kw) out[kw] = 0;
            continue;
          }
          const Real* src = plane + (iz * h + iy) * w;
          if (x_inside) {
            for (std::size_t kw = 0; kw < k; ++kw) out[kw] = src[x0 + static_cast<long>(kw)];
          } else {
            for (std::size_t kw = 0; kw < k; ++kw) {
              const long ix = x0 + static_cast<long>(kw);
              out[kw] = (ix < 0 || ix >= w) ? Real(0) : src[ix];
            }
          }
        }
      }
    }
  }
}

void im2row(const ConvGeometry& g, const Real* in, std::size_t p0, std::size_t p1, Real* rows) {
  if (g.k == 3)
    im2row_fixed<3>(g, in, p0, p1, rows);
  else
    im2row_fixed<0>(g, in, p0, p1, rows);
}

// Scatter-adds patch rows back onto [Cin,D,H,W].
template <std::size_t K>
void row2im_fixed(const ConvGeometry& g, const Real* rows, std::size_t p0, std::size_t p1, Real* in) {
  const std::size_t k = K ? K : g.k;
  const std::size_t width = g.col_rows();
  const long d = static_cast<long>(g.d), h = static_cast<long>(g.h), w = static_cast<long>(g.w);
  const Real* srcrow = rows;
  for (std::size_t p = p0; p < p1; ++p, srcrow += width) {
    const std::size_t x = p % g.ow, y = (p / g.ow) % g.oh, z = p / (g.ow * g.oh);
    const long z0 = static_cast<long>(z * g.stride) - static_cast<long>(g.pad);
    const long y0 = static_cast<long>(y * g.stride) - static_cast<long>(g.pad);
    const long x0 = static_cast<long>(x * g.stride) - static_cast<long>(g.pad);
    const bool x_inside = x0 >= 0 && x0 + static_cast<long>(k) <= w;
    const Real* src = srcrow;
    for (std::size_t c = 0; c < g.cin; ++c) {
      Real* plane = in + c * g.in_volume();
      for (std::size_t kd = 0; kd < k; ++kd) {
        const long iz = z0 + static_cast<long>(kd);
        for (std::size_t kh = 0; kh < k; ++kh, src += k) {
          const long iy = y0 + static_cast<long>(kh);
          if (iz < 0 || iz >= d || iy < 0 || iy >= h) continue;
          Real* dst = plane + (iz * h + iy) * w;
          if (x_inside) {
            for (std::size_t kw = 0; kw < k; ++kw) dst[x0 + static_cast<long>(kw)] += src[kw];
          } else {
            for (std::size_t kw = 0; kw < k; ++kw) {
              const long ix = x0 + static_cast<long>(kw);
              if (ix >= 0 && ix < w) dst[ix] += src[kw];
            }
          }
        }
      }
    }
  }
}

void row2im(const ConvGeometry& g, const Real* rows, std::size_t p0, std::size_t p1, Real* in) {
  if (g.k == 3)
    row2im_fixed<3>(g, rows, p0, p1, in);
  else
    row2im_fixed<0>(g, rows, p0, p1, in);
}

// Patch rows per tile; 256 rows of a 8-channel 3^3 kernel is about 440 KB.
std::size_t tile_rows(std::size_t width) {
  return std::max<std::size_t>(16, (std::size_t{1} << 16) / std::max<std::size_t>(width, 1));
}

void check_distribution_rows(const Tensor& t, const char* op, const char* what) {
  const std::size_t n = t.dim(0), k = t.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    Real s = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const Real v = t[i * k + j];
      if (v < 0) throw InputError(std::string(op) + ": " + what + " has a negative entry");
      s += v;
    }
    if (std::abs(s - 1) > 1e-6)
      throw InputError(std::string(op) + ": " + what + " row " + std::to_string(i) +
                       " sums to " + std::to_string(s) + ", expected 1");
  }
}

void check_one_hot(const Tensor& labels, const Shape& expect, const char* op) {
  if (labels.shape() != expect)
    throw ShapeError(std::string(op) + ": labels shape " + shape_string(labels.shape()) +
                     " does not match " + shape_string(expect));
  const std::size_t n = expect[0], k = expect[1];
  for (std::size_t i = 0; i < n; ++i) {
    int ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const Real v = labels[i * k + j];
      if (v == 1) {
        ++ones;
      } else if (v != 0) {
        throw InputError(std::string(op) + ": label row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (ones != 1)
      throw InputError(std::string(op) + ": label row " + std::to_string(i) + " is not one-hot");
  }
}

std::size_t true_class(const Tensor& labels, std::size_t row, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j)
    if (labels[row * k + j] == 1) return j;
  return 0;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                               std::size_t padding) {
  return (in + 2 * padding - k) / stride + 1;
}

Var conv3d(Var input, Var kernel, std::size_t stride, std::size_t padding) {
  require_rank(input, 5, "conv3d", "input");
  require_rank(kernel, 5, "conv3d", "kernel");
  if (stride == 0) throw ShapeError("conv3d: stride must be positive");
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  if (ks[1] != is[1])
    throw ShapeError("conv3d: kernel expects " + std::to_string(ks[1]) +
                     " input channels, input has " + std::to_string(is[1]));
  if (ks[2] != ks[3] || ks[2] != ks[4])
    throw ShapeError("conv3d: kernel must be cubic, got " + shape_string(ks));
  const std::size_t k = ks[2];
  for (std::size_t a = 2; a < 5; ++a)
    if (k > is[a] + 2 * padding)
      throw ShapeError("conv3d: kernel size " + std::to_string(k) +
                       " exceeds padded input extent " + std::to_string(is[a] + 2 * padding) +
                       " on axis " + std::to_string(a));

  auto g = std::make_shared<ConvGeometry>();
  g->cin = is[1];
  g->d = is[2];
  g->h = is[3];
  g->w = is[4];
  g->k = k;
  g->stride = stride;
  g->pad = padding;
  g->od = conv_output_extent(g->d, k, stride, padding);
  g->oh = conv_output_extent(g->h, k, stride, padding);
  g->ow = conv_output_extent(g->w, k, stride, padding);

  const std::size_t n = is[0], cout = ks[0];
  const std::size_t ov = g->out_volume(), width = g->col_rows();
  Tensor out(Shape{n, cout, g->od, g->oh, g->ow}, 0);
  const Real* x = input.value().raw();
  const Real* w = kernel.value().raw();
  if (g->pointwise()) {
    for (std::size_t s = 0; s < n; ++s)
      simd::gemm_nn(cout, ov, width, w, x + s * g->cin * g->in_volume(), out.raw() + s * cout * ov);
  } else {
    const std::size_t tile = std::min(ov, tile_rows(width));
    std::vector<Real> patches(tile * width), out_t(tile * cout);
    for (std::size_t s = 0; s < n; ++s) {
      Real* os = out.raw() + s * cout * ov;
      for (std::size_t p0 = 0; p0 < ov; p0 += tile) {
        const std::size_t rows = std::min(tile, ov - p0);
        im2row(*g, x + s * g->cin * g->in_volume(), p0, p0 + rows, patches.data());
        std::fill(out_t.begin(), out_t.end(), Real(0));
        simd::gemm_nt(rows, cout, width, patches.data(), w, out_t.data());
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cout; ++c) os[c * ov + p0 + r] = out_t[r * cout + c];
      }
    }
  }

  return input.tape().record(
      "conv3d", std::move(out), {input, kernel}, [input, kernel, g](Tape& tape, const Tensor& dy) {
        Tensor* dx = tape.grad_sink(input);
        Tensor* dw = tape.grad_sink(kernel);
        const std::size_t n = input.shape()[0], cout = kernel.shape()[0];
        const std::size_t ov = g->out_volume(), width = g->col_rows();
        const std::size_t in_stride = g->cin * g->in_volume();
        const Real* x = input.value().raw();
        const Real* w = kernel.value().raw();
        if (g->pointwise()) {
          for (std::size_t s = 0; s < n; ++s) {
            const Real* dys = dy.raw() + s * cout * ov;
            if (dw) simd::gemm_nt(cout, width, ov, dys, x + s * in_stride, dw->raw());
            if (dx) simd::gemm_tn(width, ov, cout, w, dys, dx->raw() + s * in_stride);
          }
          return;
        }
        const std::size_t tile = std::min(ov, tile_rows(width));
        std::vector<Real> patches(tile * width), dy_tile(tile * cout), dy_t(tile * cout);
        for (std::size_t s = 0; s < n; ++s) {
          const Real* dys = dy.raw() + s * cout * ov;
          for (std::size_t p0 = 0; p0 < ov; p0 += tile) {
            const std::size_t rows = std::min(tile, ov - p0);
            if (dw) {
              // dy columns [p0, p0+rows) as a contiguous [cout, rows] block.
              for (std::size_t c = 0; c < cout; ++c)
                std::copy_n(dys + c * ov + p0, rows, dy_tile.data() + c * rows);
              im2row(*g, x + s * in_stride, p0, p0 + rows, patches.data());
              simd::gemm_nn(cout, width, rows, dy_tile.data(), patches.data(), dw->raw());
            }
            if (dx) {
              for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cout; ++c) dy_t[r * cout + c] = dys[c * ov + p0 + r];
              std::fill(patches.begin(), patches.end(), Real(0));
              simd::gemm_nn(rows, width, cout, dy_t.data(), w, patches.data());
              row2im(*g, patches.data(), p0, p0 + rows, dx->raw() + s * in_stride);
            }
          }
        }
      });
}

Var group_norm(Var x, std::size_t num_groups, Real eps, Var gain, Var bias) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("group_norm: input must be [N,C,...], got " + shape_string(s));
  const std::size_t n = s[0], c = s[1];
  if (num_groups == 0 || c % num_groups != 0)
    throw ConfigError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                      std::to_string(num_groups) + " groups");
  if (!(eps > 0)) throw ConfigError("group_norm: eps must be positive");
  if (gain.shape() != Shape{c} || bias.shape() != Shape{c})
    throw ShapeError("group_norm: gain and bias must have shape [" + std::to_string(c) + "]");

  const std::size_t spatial = spatial_size(s);
  const std::size_t per_channel = spatial;
  const std::size_t cg = c / num_groups;
  const std::size_t group_len = cg * spatial;

  // Normalized activations and 1/std per (sample, group), reused in backward.
  auto xhat = std::make_shared<std::vector<Real>>(x.value().size());
  auto inv_std = std::make_shared<std::vector<Real>>(n * num_groups);
  Tensor out(s, 0);
  const Real* xv = x.value().raw();
  const Real* gv = gain.value().raw();
  const Real* bv = bias.value().raw();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t grp = 0; grp < num_groups; ++grp) {
      const std::size_t base = (i * c + grp * cg) * spatial;
      Real mu = 0;
      for (std::size_t e = 0; e < group_len; ++e) mu += xv[base + e];
      mu /= static_cast<Real>(group_len);
      Real var = 0;
      for (std::size_t e = 0; e < group_len; ++e) {
        const Real d = xv[base + e] - mu;
        var += d * d;
      }
      var /= static_cast<Real>(group_len);
      const Real inv = Real(1) / std::sqrt(var + eps);
      (*inv_std)[i * num_groups + grp] = inv;
      for (std::size_t ch = 0; ch < cg; ++ch) {
        const std::size_t channel = grp * cg + ch;
        const std::size_t off = base + ch * per_channel;
        for (std::size_t e = 0; e < per_channel; ++e) {
          const Real h = (xv[off + e] - mu) * inv;
          (*xhat)[off + e] = h;
          out[off + e] = gv[channel] * h + bv[channel];
        }
      }
    }
  }

  return x.tape().record(
      "group_norm", std::move(out), {x, gain, bias},
      [x, gain, bias, num_groups, xhat, inv_std](Tape& tape, const Tensor& dy) {
        Tensor* dx = tape.grad_sink(x);
        Tensor* dg = tape.grad_sink(gain);
        Tensor* db = tape.grad_sink(bias);
        const Shape& s = x.shape();
        const std::size_t n = s[0], c = s[1];
        const std::size_t spatial = spatial_size(s);
        const std::size_t cg = c / num_groups;
        const std::size_t group_len = cg * spatial;
        const Real* gv = gain.value().raw();
        const std::vector<Real>& h = *xhat;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t grp = 0; grp < num_groups; ++grp) {
            const std::size_t base = (i * c + grp * cg) * spatial;
            Real sum_dh = 0, sum_dh_h = 0;
            for (std::size_t ch = 0; ch < cg; ++ch) {
              const std::size_t channel = grp * cg + ch;
              const std::size_t off = base + ch * spatial;
              Real sg = 0, sb = 0;
              for (std::size_t e = 0; e < spatial; ++e) {
                const Real g = dy[off + e];
                sg += g * h[off + e];
                sb += g;
                const Real dh = g * gv[channel];
                sum_dh += dh;
                sum_dh_h += dh * h[off + e];
              }
              if (dg) (*dg)[channel] += sg;
              if (db) (*db)[channel] += sb;
            }
            if (dx) {
              const Real inv = (*inv_std)[i * num_groups + grp];
              const Real m = static_cast<Real>(group_len);
              for (std::size_t ch = 0; ch < cg; ++ch) {
                const std::size_t channel = grp * cg + ch;
                const std::size_t off = base + ch * spatial;
                for (std::size_t e = 0; e < spatial; ++e) {
                  const Real dh = dy[off + e] * gv[channel];
                  (*dx)[off + e] += inv * (dh - sum_dh / m - h[off + e] * sum_dh_h / m);
                }
              }
            }
          }
        }
      });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (Real& v : out.data()) v = v > 0 ? v : Real(0);
  return x.tape().record("relu", std::move(out), {x}, [x](Tape& tape, const Tensor& dy) {
    Tensor* dx = tape.grad_sink(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (xv[i] > 0) (*dx)[i] += dy[i];
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (Real& v : out.data()) v = Real(1) / (Real(1) + std::exp(-v));
  const std::size_t self = x.tape().size();
  return x.tape().record("sigmoid", std::move(out), {x}, [x, self](Tape& tape, const Tensor& dy) {
    Tensor* dx = tape.grad_sink(x);
    const Tensor& y = tape.value(self);
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i] * y[i] * (1 - y[i]);
  });
}

Var dense(Var x, Var weights, Var bias) {
  require_rank(x, 2, "dense", "input");
  require_rank(weights, 2, "dense", "weights");
  const std::size_t n = x.shape()[0], fin = x.shape()[1], fout = weights.shape()[1];
  if (weights.shape()[0] != fin)
    throw ShapeError("dense: input has " + std::to_string(fin) + " features, weights expect " +
                     std::to_string(weights.shape()[0]));
  if (bias.shape() != Shape{fout})
    throw ShapeError("dense: bias must have shape [" + std::to_string(fout) + "], got " +
                     shape_string(bias.shape()));
  Tensor out(Shape{n, fout}, 0);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(bias.value().raw(), bias.value().raw() + fout, out.raw() + i * fout);
  simd::gemm_nn(n, fout, fin, x.value().raw(), weights.value().raw(), out.raw());
  return x.tape().record(
      "dense", std::move(out), {x, weights, bias}, [x, weights, bias](Tape& tape, const Tensor& dy) {
        const std::size_t n = x.shape()[0], fin = x.shape()[1], fout = weights.shape()[1];
        if (Tensor* dx = tape.grad_sink(x))
          simd::gemm_nt(n, fin, fout, dy.raw(), weights.value().raw(), dx->raw());
        if (Tensor* dw = tape.grad_sink(weights))
          simd::gemm_tn(fin, fout, n, x.value().raw(), dy.raw(), dw->raw());
        if (Tensor* db = tape.grad_sink(bias))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < fout; ++j) (*db)[j] += dy[i * fout + j];
      });
}

Var global_avg_pool(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 3) throw ShapeError("global_avg_pool: input must be [N,C,...], got " + shape_string(s));
  const std::size_t n = s[0], c = s[1], sp = spatial_size(s);
  Tensor out(Shape{n, c}, 0);
  const Real* xv = x.value().raw();
  for (std::size_t i = 0; i < n * c; ++i) {
    Real acc = 0;
    for (std::size_t e = 0; e < sp; ++e) acc += xv[i * sp + e];
    out[i] = acc / static_cast<Real>(sp);
  }
  return x.tape().record("global_avg_pool", std::move(out), {x},
                         [x, n, c, sp](Tape& tape, const Tensor& dy) {
                           Tensor* dx = tape.grad_sink(x);
                           for (std::size_t i = 0; i < n * c; ++i) {
                             const Real g = dy[i] / static_cast<Real>(sp);
                             for (std::size_t e = 0; e < sp; ++e) (*dx)[i * sp + e] += g;
                           }
                         });
}

Var channel_scale(Var x, Var scale) {
  const Shape& s = x.shape();
  if (s.size() < 2 || scale.shape() != Shape{s[0], s[1]})
    throw ShapeError("channel_scale: scale must be [N,C] for input " + shape_string(s) + ", got " +
                     shape_string(scale.shape()));
  const std::size_t nc = s[0] * s[1], sp = spatial_size(s);
  Tensor out = x.value();
  for (std::size_t i = 0; i < nc; ++i) {
    const Real f = scale.value()[i];
    for (std::size_t e = 0; e < sp; ++e) out[i * sp + e] *= f;
  }
  return x.tape().record("channel_scale", std::move(out), {x, scale},
                         [x, scale, nc, sp](Tape& tape, const Tensor& dy) {
                           Tensor* dx = tape.grad_sink(x);
                           Tensor* ds = tape.grad_sink(scale);
                           const Tensor& xv = x.value();
                           const Tensor& sv = scale.value();
                           for (std::size_t i = 0; i < nc; ++i) {
                             Real acc = 0;
                             for (std::size_t e = 0; e < sp; ++e) {
                               const std::size_t at = i * sp + e;
                               if (dx) (*dx)[at] += dy[at] * sv[i];
                               acc += dy[at] * xv[at];
                             }
                             if (ds) (*ds)[i] += acc;
                           }
                         });
}

Var softmax(Var logits) {
  require_rank(logits, 2, "softmax", "logits");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (k < 2) throw ShapeError("softmax: need at least 2 classes");
  Tensor out = logits.value();
  for (std::size_t i = 0; i < n; ++i) {
    Real* row = out.raw() + i * k;
    const Real mx = *std::max_element(row, row + k);
    Real z = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < k; ++j) row[j] /= z;
  }
  const std::size_t self = logits.tape().size();
  return logits.tape().record("softmax", std::move(out), {logits},
                              [logits, self, n, k](Tape& tape, const Tensor& dy) {
                                Tensor* dx = tape.grad_sink(logits);
                                const Tensor& y = tape.value(self);
                                for (std::size_t i = 0; i < n; ++i) {
                                  Real dot = 0;
                                  for (std::size_t j = 0; j < k; ++j)
                                    dot += dy[i * k + j] * y[i * k + j];
                                  for (std::size_t j = 0; j < k; ++j)
                                    (*dx)[i * k + j] += y[i * k + j] * (dy[i * k + j] - dot);
                                }
                              });
}

Var cross_entropy(Var probs, const Tensor& labels) {
  require_rank(probs, 2, "cross_entropy", "probs");
  check_one_hot(labels, probs.shape(), "cross_entropy");
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  const Tensor& p = probs.value();
  auto cls = std::make_shared<std::vector<std::size_t>>(n);
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*cls)[i] = true_class(labels, i, k);
    total -= std::log(std::max(p[i * k + (*cls)[i]], kProbFloor));
  }
  return probs.tape().record(
      "cross_entropy", Tensor::scalar(total / static_cast<Real>(n)), {probs},
      [probs, cls, n, k](Tape& tape, const Tensor& dy) {
        Tensor* dp = tape.grad_sink(probs);
        const Tensor& p = probs.value();
        const Real g = dy[0] / static_cast<Real>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const Real v = p[i * k + (*cls)[i]];
          if (v > kProbFloor) (*dp)[i * k + (*cls)[i]] -= g / v;
        }
      });
}

Var kl_divergence(Var p, Var q) {
  require_rank(p, 2, "kl_divergence", "p");
  require_same_shape(p, q, "kl_divergence");
  check_distribution_rows(p.value(), "kl_divergence", "p");
  check_distribution_rows(q.value(), "kl_divergence", "q");
  const std::size_t n = p.shape()[0], k = p.shape()[1];
  const Tensor& pv = p.value();
  const Tensor& qv = q.value();
  Tensor out(Shape{n}, 0);
  for (std::size_t i = 0; i < n; ++i) {
    Real acc = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const Real a = pv[i * k + j];
      if (a > 0) acc += a * std::log(a / std::max(qv[i * k + j], kProbFloor));
    }
    out[i] = std::max(acc, Real(0));
  }
  return p.tape().record("kl_divergence", std::move(out), {p, q},
                         [p, q, n, k](Tape& tape, const Tensor& dy) {
                           Tensor* dp = tape.grad_sink(p);
                           Tensor* dq = tape.grad_sink(q);
                           const Tensor& pv = p.value();
                           const Tensor& qv = q.value();
                           for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = 0; j < k; ++j) {
                               const std::size_t at = i * k + j;
                               const Real a = pv[at];
                               const Real b = std::max(qv[at], kProbFloor);
                               if (dp && a > 0) (*dp)[at] += dy[i] * (std::log(a / b) + 1);
                               if (dq && qv[at] > kProbFloor) (*dq)[at] -= dy[i] * a / b;
                             }
                           }
                         });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& dy) {
    if (Tensor* da = tape.grad_sink(a))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i];
    if (Tensor* db = tape.grad_sink(b))
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& dy) {
    if (Tensor* da = tape.grad_sink(a))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * b.value()[i];
    if (Tensor* db = tape.grad_sink(b))
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * a.value()[i];
  });
}

Var mul_const(Var a, const Tensor& weights) {
  if (weights.shape() != a.shape())
    throw ShapeError("mul_const: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(weights.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= weights[i];
  return a.tape().record("mul_const", std::move(out), {a},
                         [a, weights](Tape& tape, const Tensor& dy) {
                           Tensor* da = tape.grad_sink(a);
                           for (std::size_t i = 0; i < dy.size(); ++i)
                             (*da)[i] += dy[i] * weights[i];
                         });
}

Var scale(Var a, Real factor) {
  Tensor out = a.value();
  for (Real& v : out.data()) v *= factor;
  return a.tape().record("scale", std::move(out), {a}, [a, factor](Tape& tape, const Tensor& dy) {
    Tensor* da = tape.grad_sink(a);
    for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * factor;
  });
}

Var sum(Var a) {
  Real acc = 0;
  for (Real v : a.value().data()) acc += v;
  return a.tape().record("sum", Tensor::scalar(acc), {a}, [a](Tape& tape, const Tensor& dy) {
    Tensor* da = tape.grad_sink(a);
    for (Real& g : da->data()) g += dy[0];
  });
}

Var mean(Var a) {
  const Real count = static_cast<Real>(a.value().size());
  Real acc = 0;
  for (Real v : a.value().data()) acc += v;
  return a.tape().record("mean", Tensor::scalar(acc / count), {a},
                         [a, count](Tape& tape, const Tensor& dy) {
                           Tensor* da = tape.grad_sink(a);
                           for (Real& g : da->data()) g += dy[0] / count;
                         });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record("reshape", std::move(out), {a}, [a](Tape& tape, const Tensor& dy) {
    Tensor* da = tape.grad_sink(a);
    for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i];
  });
}

std::vector<Real> per_sample_cross_entropy(const Tensor& probs, const Tensor& labels) {
  if (probs.rank() != 2) throw ShapeError("per_sample_cross_entropy: probs must be [N,K]");
  check_one_hot(labels, probs.shape(), "per_sample_cross_entropy");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = -std::log(std::max(probs[i * k + true_class(labels, i, k)], kProbFloor));
  return out;
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  Tensor out(Shape{labels.size(), num_classes}, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw InputError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    out[i * num_classes + static_cast<std::size_t>(labels[i])] = 1;
  }
  return out;
}

}  // namespace enrol::ops

#include "tdseg/nn.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace tdseg {

namespace {

struct Geometry {
  int batch, ch, h, w;
  bool batched;
};

Geometry geom(const Tensor& x, const char* what) {
  require(x.rank() == 3 || x.rank() == 4, "shape",
          std::string(what) + ": expected rank-3/4 input, got rank " + std::to_string(x.rank()));
  if (x.rank() == 4) return {x.extent(0), x.extent(1), x.extent(2), x.extent(3), true};
  return {1, x.extent(0), x.extent(1), x.extent(2), false};
}

std::vector<int> like_rank(const Geometry& g, int ch, int h, int w) {
  if (g.batched) return {g.batch, ch, h, w};
  return {ch, h, w};
}

int conv_out_extent(int in, int pad, int k, int stride) {
  return (in + 2 * pad - k) / stride + 1;
}

void check_conv_pre(const Geometry& g, const ConvParams& p, int in_ch_axis, const char* what) {
  require(p.kernel.rank() == 4, "shape", std::string(what) + ": kernel must be rank 4");
  require(p.kernel.extent(2) == p.kernel.extent(3), "shape",
          std::string(what) + ": kernel must be square");
  require(p.stride == 1 || p.stride == 2, "shape",
          std::string(what) + ": stride must be 1 or 2, got " + std::to_string(p.stride));
  require(p.padding >= 0, "shape", std::string(what) + ": negative padding");
  int want_in = p.kernel.extent(in_ch_axis);
  require(g.ch == want_in, "shape",
          std::string(what) + ": input channels " + std::to_string(g.ch) +
              " do not match kernel in_ch " + std::to_string(want_in));
}

using ColMatrix = MatrixRM;

// col(ci*k*k + ky*k + kx, oy*out_w + ox) = x(ci, oy*s-p+ky, ox*s-p+kx), 0 outside.
void im2col(const float* x, int ch, int h, int w, int k, int stride, int pad, int out_h,
            int out_w, ColMatrix& col) {
  col.setZero(ch * k * k, static_cast<Eigen::Index>(out_h) * out_w);
  for (int ci = 0; ci < ch; ++ci) {
    const float* xc = x + static_cast<std::int64_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        int row = (ci * k + ky) * k + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            col(row, static_cast<Eigen::Index>(oy) * out_w + ox) =
                xc[static_cast<std::int64_t>(iy) * w + ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im_add(const MatrixRMd& col, int ch, int h, int w, int k, int stride, int pad,
                int out_h, int out_w, double* x) {
  for (int ci = 0; ci < ch; ++ci) {
    double* xc = x + static_cast<std::int64_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        int row = (ci * k + ky) * k + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            xc[static_cast<std::int64_t>(iy) * w + ix] +=
                col(row, static_cast<Eigen::Index>(oy) * out_w + ox);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const ConvParams& p) {
  Geometry g = geom(x, "conv2d");
  check_conv_pre(g, p, 1, "conv2d");
  const int k = p.k();
  const int out_ch = p.kernel.extent(0);
  require(p.bias.size() == out_ch, "shape", "conv2d: bias length does not match out_ch");
  const int out_h = conv_out_extent(g.h, p.padding, k, p.stride);
  const int out_w = conv_out_extent(g.w, p.padding, k, p.stride);
  require(out_h >= 1 && out_w >= 1, "shape",
          "conv2d: output extent would be empty for input " + std::to_string(g.h) + "x" +
              std::to_string(g.w) + " with k=" + std::to_string(k));

  Tensor out(like_rank(g, out_ch, out_h, out_w));
  Eigen::Map<const MatrixRM> kmat(p.kernel.data(), out_ch, g.ch * k * k);
  ColMatrix col;
  for (int b = 0; b < g.batch; ++b) {
    const float* xb = x.data() + static_cast<std::int64_t>(b) * g.ch * g.h * g.w;
    im2col(xb, g.ch, g.h, g.w, k, p.stride, p.padding, out_h, out_w, col);
    Eigen::Map<MatrixRM> ob(out.data() + static_cast<std::int64_t>(b) * out_ch * out_h * out_w,
                            out_ch, static_cast<Eigen::Index>(out_h) * out_w);
    ob.noalias() = kmat * col;
    for (int co = 0; co < out_ch; ++co) ob.row(co).array() += p.bias[co];
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out) {
  Geometry g = geom(x, "conv2d_backward");
  check_conv_pre(g, p, 1, "conv2d_backward");
  const int k = p.k();
  const int out_ch = p.kernel.extent(0);
  const int out_h = conv_out_extent(g.h, p.padding, k, p.stride);
  const int out_w = conv_out_extent(g.w, p.padding, k, p.stride);
  require(grad_out.size() ==
              static_cast<std::int64_t>(g.batch) * out_ch * out_h * out_w,
          "shape", "conv2d_backward: grad_out shape does not match forward output");

  ConvGrads grads{Tensor(x.shape()), Tensor(p.kernel.shape()), Tensor(p.bias.shape())};
  MatrixRMd kgrad = MatrixRMd::Zero(out_ch, g.ch * k * k);
  Eigen::VectorXd bgrad = Eigen::VectorXd::Zero(out_ch);
  MatrixRMd kmatd =
      Eigen::Map<const MatrixRM>(p.kernel.data(), out_ch, g.ch * k * k).cast<double>();
  std::vector<double> gx(static_cast<std::size_t>(g.ch) * g.h * g.w);

  ColMatrix col;
  for (int b = 0; b < g.batch; ++b) {
    const float* xb = x.data() + static_cast<std::int64_t>(b) * g.ch * g.h * g.w;
    im2col(xb, g.ch, g.h, g.w, k, p.stride, p.padding, out_h, out_w, col);
    MatrixRMd cold = col.cast<double>();
    MatrixRMd gob =
        Eigen::Map<const MatrixRM>(
            grad_out.data() + static_cast<std::int64_t>(b) * out_ch * out_h * out_w, out_ch,
            static_cast<Eigen::Index>(out_h) * out_w)
            .cast<double>();
    kgrad.noalias() += gob * cold.transpose();
    bgrad += gob.rowwise().sum();
    MatrixRMd gcol = kmatd.transpose() * gob;
    std::fill(gx.begin(), gx.end(), 0.0);
    col2im_add(gcol, g.ch, g.h, g.w, k, p.stride, p.padding, out_h, out_w, gx.data());
    float* gxb = grads.x.data() + static_cast<std::int64_t>(b) * g.ch * g.h * g.w;
    for (std::size_t i = 0; i < gx.size(); ++i) gxb[i] = static_cast<float>(gx[i]);
  }
  for (std::int64_t i = 0; i < grads.kernel.size(); ++i)
    grads.kernel[i] = static_cast<float>(kgrad(i / (g.ch * k * k), i % (g.ch * k * k)));
  for (int co = 0; co < out_ch; ++co) grads.bias[co] = static_cast<float>(bgrad(co));
  return grads;
}

Tensor transposed_conv2d_forward(const Tensor& x, const ConvParams& p) {
  Geometry g = geom(x, "transposed_conv2d");
  check_conv_pre(g, p, 0, "transposed_conv2d");
  const int k = p.k();
  const int out_ch = p.kernel.extent(1);
  require(p.bias.size() == out_ch, "shape",
          "transposed_conv2d: bias length does not match out_ch");
  const int out_h = (g.h - 1) * p.stride - 2 * p.padding + k;
  const int out_w = (g.w - 1) * p.stride - 2 * p.padding + k;
  require(out_h >= 1 && out_w >= 1, "shape", "transposed_conv2d: empty output extent");

  Tensor out(like_rank(g, out_ch, out_h, out_w));
  std::vector<double> acc(static_cast<std::size_t>(out_ch) * out_h * out_w);
  for (int b = 0; b < g.batch; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int co = 0; co < out_ch; ++co) {
      double* oc = acc.data() + static_cast<std::int64_t>(co) * out_h * out_w;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(out_h) * out_w; ++i)
        oc[i] = p.bias[co];
    }
    for (int ci = 0; ci < g.ch; ++ci) {
      const float* xc = x.data() + (static_cast<std::int64_t>(b) * g.ch + ci) * g.h * g.w;
      for (int iy = 0; iy < g.h; ++iy) {
        for (int ix = 0; ix < g.w; ++ix) {
          double v = xc[static_cast<std::int64_t>(iy) * g.w + ix];
          if (v == 0.0) continue;
          for (int co = 0; co < out_ch; ++co) {
            const float* kk = p.kernel.data() +
                              ((static_cast<std::int64_t>(ci) * out_ch + co) * k) * k;
            double* oc = acc.data() + static_cast<std::int64_t>(co) * out_h * out_w;
            for (int ky = 0; ky < k; ++ky) {
              int oy = iy * p.stride - p.padding + ky;
              if (oy < 0 || oy >= out_h) continue;
              for (int kx = 0; kx < k; ++kx) {
                int ox = ix * p.stride - p.padding + kx;
                if (ox < 0 || ox >= out_w) continue;
                oc[static_cast<std::int64_t>(oy) * out_w + ox] += v * kk[ky * k + kx];
              }
            }
          }
        }
      }
    }
    float* ob = out.data() + static_cast<std::int64_t>(b) * out_ch * out_h * out_w;
    for (std::size_t i = 0; i < acc.size(); ++i) ob[i] = static_cast<float>(acc[i]);
  }
  return out;
}

ConvGrads transposed_conv2d_backward(const Tensor& x, const ConvParams& p,
                                     const Tensor& grad_out) {
  Geometry g = geom(x, "transposed_conv2d_backward");
  check_conv_pre(g, p, 0, "transposed_conv2d_backward");
  const int k = p.k();
  const int out_ch = p.kernel.extent(1);
  const int out_h = (g.h - 1) * p.stride - 2 * p.padding + k;
  const int out_w = (g.w - 1) * p.stride - 2 * p.padding + k;
  require(grad_out.size() ==
              static_cast<std::int64_t>(g.batch) * out_ch * out_h * out_w,
          "shape", "transposed_conv2d_backward: grad_out shape mismatch");

  ConvGrads grads{Tensor(x.shape()), Tensor(p.kernel.shape()), Tensor(p.bias.shape())};
  std::vector<double> kacc(static_cast<std::size_t>(p.kernel.size()));
  std::vector<double> bacc(static_cast<std::size_t>(out_ch));
  for (int b = 0; b < g.batch; ++b) {
    const float* gb = grad_out.data() + static_cast<std::int64_t>(b) * out_ch * out_h * out_w;
    for (int co = 0; co < out_ch; ++co) {
      const float* gc = gb + static_cast<std::int64_t>(co) * out_h * out_w;
      double s = 0.0;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(out_h) * out_w; ++i) s += gc[i];
      bacc[static_cast<std::size_t>(co)] += s;
    }
    for (int ci = 0; ci < g.ch; ++ci) {
      const float* xc = x.data() + (static_cast<std::int64_t>(b) * g.ch + ci) * g.h * g.w;
      float* gxc = grads.x.data() + (static_cast<std::int64_t>(b) * g.ch + ci) * g.h * g.w;
      for (int iy = 0; iy < g.h; ++iy) {
        for (int ix = 0; ix < g.w; ++ix) {
          double gsum = 0.0;
          for (int co = 0; co < out_ch; ++co) {
            const float* kk = p.kernel.data() +
                              ((static_cast<std::int64_t>(ci) * out_ch + co) * k) * k;
            double* ka = kacc.data() + ((static_cast<std::int64_t>(ci) * out_ch + co) * k) * k;
            const float* gc = gb + static_cast<std::int64_t>(co) * out_h * out_w;
            for (int ky = 0; ky < k; ++ky) {
              int oy = iy * p.stride - p.padding + ky;
              if (oy < 0 || oy >= out_h) continue;
              for (int kx = 0; kx < k; ++kx) {
                int ox = ix * p.stride - p.padding + kx;
                if (ox < 0 || ox >= out_w) continue;
                double go = gc[static_cast<std::int64_t>(oy) * out_w + ox];
                gsum += go * kk[ky * k + kx];
                ka[ky * k + kx] += go * xc[static_cast<std::int64_t>(iy) * g.w + ix];
              }
            }
          }
          gxc[static_cast<std::int64_t>(iy) * g.w + ix] = static_cast<float>(gsum);
        }
      }
    }
  }
  for (std::int64_t i = 0; i < grads.kernel.size(); ++i)
    grads.kernel[i] = static_cast<float>(kacc[static_cast<std::size_t>(i)]);
  for (int co = 0; co < out_ch; ++co) grads.bias[co] = static_cast<float>(bacc[co]);
  return grads;
}

namespace {

// Half-pixel-center 2x interpolation taps: source coord = (o + 0.5)/2 - 0.5,
// clamped at the borders.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<float> w1;  // weight of i1; weight of i0 is 1 - w1
};

Taps make_taps(int in_extent) {
  Taps t;
  int out = in_extent * 2;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w1.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    int lo = static_cast<int>(std::floor(src));
    double f = src - lo;
    int hi = lo + 1;
    if (lo < 0) lo = 0;
    if (hi > in_extent - 1) hi = in_extent - 1;
    if (lo > in_extent - 1) lo = in_extent - 1;
    t.i0[o] = lo;
    t.i1[o] = hi;
    t.w1[o] = static_cast<float>(f);
  }
  return t;
}

}  // namespace

Tensor bilinear_upsample2x(const Tensor& x) {
  Geometry g = geom(x, "bilinear_upsample2x");
  Taps ty = make_taps(g.h), tx = make_taps(g.w);
  int oh = 2 * g.h, ow = 2 * g.w;
  Tensor out(like_rank(g, g.ch, oh, ow));
  std::int64_t slices = static_cast<std::int64_t>(g.batch) * g.ch;
  for (std::int64_t s = 0; s < slices; ++s) {
    const float* in = x.data() + s * g.h * g.w;
    float* o = out.data() + s * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const float wy = ty.w1[y];
      const float* r0 = in + static_cast<std::int64_t>(ty.i0[y]) * g.w;
      const float* r1 = in + static_cast<std::int64_t>(ty.i1[y]) * g.w;
      for (int xo = 0; xo < ow; ++xo) {
        const float wx = tx.w1[xo];
        float top = r0[tx.i0[xo]] * (1.0f - wx) + r0[tx.i1[xo]] * wx;
        float bot = r1[tx.i0[xo]] * (1.0f - wx) + r1[tx.i1[xo]] * wx;
        o[static_cast<std::int64_t>(y) * ow + xo] = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

Tensor bilinear_upsample2x_backward(const Tensor& grad_out, int in_h, int in_w) {
  Geometry g = geom(grad_out, "bilinear_upsample2x_backward");
  require(g.h == 2 * in_h && g.w == 2 * in_w, "shape",
          "bilinear_upsample2x_backward: grad_out is not 2x the input extent");
  Taps ty = make_taps(in_h), tx = make_taps(in_w);
  Tensor grad_in(like_rank(g, g.ch, in_h, in_w));
  std::int64_t slices = static_cast<std::int64_t>(g.batch) * g.ch;
  std::vector<double> acc(static_cast<std::size_t>(in_h) * in_w);
  for (std::int64_t s = 0; s < slices; ++s) {
    const float* go = grad_out.data() + s * g.h * g.w;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int y = 0; y < g.h; ++y) {
      const double wy = ty.w1[y];
      for (int xo = 0; xo < g.w; ++xo) {
        const double wx = tx.w1[xo];
        double v = go[static_cast<std::int64_t>(y) * g.w + xo];
        acc[static_cast<std::size_t>(ty.i0[y]) * in_w + tx.i0[xo]] += v * (1 - wy) * (1 - wx);
        acc[static_cast<std::size_t>(ty.i0[y]) * in_w + tx.i1[xo]] += v * (1 - wy) * wx;
        acc[static_cast<std::size_t>(ty.i1[y]) * in_w + tx.i0[xo]] += v * wy * (1 - wx);
        acc[static_cast<std::size_t>(ty.i1[y]) * in_w + tx.i1[xo]] += v * wy * wx;
      }
    }
    float* gi = grad_in.data() + s * in_h * in_w;
    for (std::size_t i = 0; i < acc.size(); ++i) gi[i] = static_cast<float>(acc[i]);
  }
  return grad_in;
}

Tensor batchnorm_forward(const Tensor& x, BatchNormParams& p, Mode mode,
                         BatchNormCache* cache) {
  Geometry g = geom(x, "batchnorm");
  require(p.gamma.size() == g.ch && p.beta.size() == g.ch, "shape",
          "batchnorm: affine params do not match channel count " + std::to_string(g.ch));
  require(p.running_mean.size() == g.ch && p.running_var.size() == g.ch, "shape",
          "batchnorm: running stats do not match channel count");
  require(p.eps > 0.0f, "shape", "batchnorm: eps must be positive");

  const std::int64_t plane = static_cast<std::int64_t>(g.h) * g.w;
  const std::int64_t count = static_cast<std::int64_t>(g.batch) * plane;
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(g.ch));

  for (int c = 0; c < g.ch; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double sum = 0.0, sq = 0.0;
      for (int b = 0; b < g.batch; ++b) {
        const float* xc = x.data() + (static_cast<std::int64_t>(b) * g.ch + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          sum += xc[i];
          sq += static_cast<double>(xc[i]) * xc[i];
        }
      }
      mean = sum / count;
      var = sq / count - mean * mean;
      if (var < 0.0) var = 0.0;
      double unbiased = count > 1 ? var * count / (count - 1) : var;
      p.running_mean[c] = static_cast<float>((1.0 - p.momentum) * p.running_mean[c] +
                                             p.momentum * mean);
      p.running_var[c] = static_cast<float>((1.0 - p.momentum) * p.running_var[c] +
                                            p.momentum * unbiased);
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    double istd = 1.0 / std::sqrt(var + p.eps);
    inv_std[static_cast<std::size_t>(c)] = istd;
    const double gam = p.gamma[c], bet = p.beta[c];
    for (int b = 0; b < g.batch; ++b) {
      std::int64_t off = (static_cast<std::int64_t>(b) * g.ch + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        double xh = (x.data()[off + i] - mean) * istd;
        xhat.data()[off + i] = static_cast<float>(xh);
        out.data()[off + i] = static_cast<float>(gam * xh + bet);
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                  const Tensor& grad_out) {
  Geometry g = geom(grad_out, "batchnorm_backward");
  require_same_shape(cache.xhat, grad_out, "batchnorm_backward");
  const std::int64_t plane = static_cast<std::int64_t>(g.h) * g.w;
  const std::int64_t count = static_cast<std::int64_t>(g.batch) * plane;

  BatchNormGrads grads{Tensor(grad_out.shape()), Tensor(p.gamma.shape()),
                       Tensor(p.beta.shape())};
  for (int c = 0; c < g.ch; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int b = 0; b < g.batch; ++b) {
      std::int64_t off = (static_cast<std::int64_t>(b) * g.ch + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        double gv = grad_out.data()[off + i];
        sum_g += gv;
        sum_gx += gv * cache.xhat.data()[off + i];
      }
    }
    grads.beta[c] = static_cast<float>(sum_g);
    grads.gamma[c] = static_cast<float>(sum_gx);
    const double gam = p.gamma[c];
    const double istd = cache.inv_std[static_cast<std::size_t>(c)];
    for (int b = 0; b < g.batch; ++b) {
      std::int64_t off = (static_cast<std::int64_t>(b) * g.ch + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        double gv = grad_out.data()[off + i];
        double xh = cache.xhat.data()[off + i];
        double gx;
        if (cache.mode == Mode::kTrain) {
          gx = gam * istd * (gv - sum_g / count - xh * sum_gx / count);
        } else {
          gx = gam * istd * gv;
        }
        grads.x.data()[off + i] = static_cast<float>(gx);
      }
    }
  }
  return grads;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0f) out[i] = 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor g = grad_out;
  for (std::int64_t i = 0; i < g.size(); ++i)
    if (x[i] <= 0.0f) g[i] = 0.0f;
  return g;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
  return out;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "sigmoid_backward");
  Tensor g(y.shape());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    double yv = y[i];
    g[i] = static_cast<float>(grad_out[i] * yv * (1.0 - yv));
  }
  return g;
}

AdamState make_adam_state(const Tensor& param, float lr, float beta1, float beta2, float eps) {
  AdamState s;
  s.m = Tensor(param.shape());
  s.v = Tensor(param.shape());
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
  require_same_shape(param, grad, "adam_step param/grad");
  require_same_shape(param, state.m, "adam_step param/m");
  require_same_shape(param, state.v, "adam_step param/v");
  state.step_count += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  for (std::int64_t i = 0; i < param.size(); ++i) {
    double gv = grad[i];
    double m = b1 * state.m[i] + (1.0 - b1) * gv;
    double v = b2 * state.v[i] + (1.0 - b2) * gv * gv;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    double mhat = m / bc1;
    double vhat = v / bc2;
    param[i] = static_cast<float>(param[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
  }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  Geometry ga = geom(a, "concat_channels"), gb = geom(b, "concat_channels");
  require(ga.batch == gb.batch && ga.h == gb.h && ga.w == gb.w, "shape",
          "concat_channels: batch/spatial extents differ");
  Tensor out(ga.batched ? std::vector<int>{ga.batch, ga.ch + gb.ch, ga.h, ga.w}
                        : std::vector<int>{ga.ch + gb.ch, ga.h, ga.w});
  const std::int64_t plane = static_cast<std::int64_t>(ga.h) * ga.w;
  for (int bt = 0; bt < ga.batch; ++bt) {
    float* dst = out.data() + static_cast<std::int64_t>(bt) * (ga.ch + gb.ch) * plane;
    const float* pa = a.data() + static_cast<std::int64_t>(bt) * ga.ch * plane;
    const float* pb = b.data() + static_cast<std::int64_t>(bt) * gb.ch * plane;
    std::copy(pa, pa + ga.ch * plane, dst);
    std::copy(pb, pb + gb.ch * plane, dst + ga.ch * plane);
  }
  return out;
}

void split_channels_backward(const Tensor& grad_cat, int a_channels, Tensor& grad_a,
                             Tensor& grad_b) {
  Geometry g = geom(grad_cat, "split_channels_backward");
  int b_channels = g.ch - a_channels;
  require(b_channels > 0 && a_channels > 0, "shape", "split_channels_backward: bad split");
  grad_a = Tensor(g.batched ? std::vector<int>{g.batch, a_channels, g.h, g.w}
                            : std::vector<int>{a_channels, g.h, g.w});
  grad_b = Tensor(g.batched ? std::vector<int>{g.batch, b_channels, g.h, g.w}
                            : std::vector<int>{b_channels, g.h, g.w});
  const std::int64_t plane = static_cast<std::int64_t>(g.h) * g.w;
  for (int bt = 0; bt < g.batch; ++bt) {
    const float* src = grad_cat.data() + static_cast<std::int64_t>(bt) * g.ch * plane;
    std::copy(src, src + a_channels * plane,
              grad_a.data() + static_cast<std::int64_t>(bt) * a_channels * plane);
    std::copy(src + a_channels * plane, src + g.ch * plane,
              grad_b.data() + static_cast<std::int64_t>(bt) * b_channels * plane);
  }
}

}  // namespace tdseg

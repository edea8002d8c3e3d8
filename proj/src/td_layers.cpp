#include "tdseg/td_layers.hpp"

#include <cmath>

namespace tdseg {

PerceptronParams make_identity_perceptron(int channels, int size) {
  PerceptronParams p;
  p.w = Tensor::full({channels, size, size}, 1.0f);
  p.t = Tensor::zeros({channels, size, size});
  return p;
}

float soft_threshold(float e, float t) {
  require(t >= 0.0f, "shape", "soft_threshold: negative threshold " + std::to_string(t));
  float a = std::fabs(e);
  if (a <= t) return 0.0f;
  return e > 0.0f ? a - t : t - a;
}

namespace {

void check_perceptron_shapes(const Tensor& x, const PerceptronParams& p, int& batch,
                             int& channels, int& n) {
  require(x.rank() == 3 || x.rank() == 4, "shape", "perceptron: expected rank-3/4 input");
  batch = x.rank() == 4 ? x.extent(0) : 1;
  channels = x.extent(x.rank() - 3);
  n = x.extent(x.rank() - 1);
  require(x.extent(x.rank() - 2) == n, "shape", "perceptron: non-square spatial extents");
  require(p.w.rank() == 3 && p.t.rank() == 3, "shape", "perceptron: params must be rank 3");
  require(p.w.shape() == p.t.shape(), "shape", "perceptron: w/t shape mismatch");
  require(p.w.extent(0) == channels && p.w.extent(1) == n && p.w.extent(2) == n, "shape",
          "perceptron: params " + shape_str(p.w.shape()) + " do not match input " +
              shape_str(x.shape()));
}

}  // namespace

Tensor perceptron_forward(const Tensor& x, const PerceptronParams& p, TransformKind kind,
                          PerceptronWorkspace* ws) {
  int batch, channels, n;
  check_perceptron_shapes(x, p, batch, channels, n);

  Tensor xhat = kind == TransformKind::kHadamard ? ht2d(x) : dct2d(x);
  Tensor e(x.shape());
  Tensor z(x.shape());
  const std::int64_t map_size = static_cast<std::int64_t>(channels) * n * n;
  for (int b = 0; b < batch; ++b) {
    const std::int64_t off = static_cast<std::int64_t>(b) * map_size;
    for (std::int64_t i = 0; i < map_size; ++i) {
      float ev = p.w[i] * xhat[off + i];
      e[off + i] = ev;
      z[off + i] = soft_threshold(ev, p.t[i]);
    }
  }
  Tensor y = kind == TransformKind::kHadamard ? iht2d(z) : idct2d(z);
  if (ws) {
    ws->xhat = std::move(xhat);
    ws->e = std::move(e);
    ws->z = std::move(z);
  }
  return y;
}

PerceptronGrads perceptron_backward(const PerceptronWorkspace& ws, const PerceptronParams& p,
                                    TransformKind kind, const Tensor& grad_y) {
  require(!ws.e.empty(), "shape", "perceptron_backward: empty workspace");
  require_same_shape(ws.e, grad_y, "perceptron_backward grad_y");
  int batch, channels, n;
  check_perceptron_shapes(grad_y, p, batch, channels, n);

  // Adjoint of the inverse transform. The Hadamard map M -> (1/N^2) H M H is
  // self-adjoint; the DCT inverse Z -> D^T Z D has adjoint G -> D G D^T.
  Tensor gz = kind == TransformKind::kHadamard ? iht2d(grad_y) : dct2d(grad_y);

  Tensor ge(grad_y.shape());
  PerceptronGrads grads;
  grads.w = Tensor(p.w.shape());
  grads.t = Tensor(p.t.shape());
  const std::int64_t map_size = static_cast<std::int64_t>(channels) * n * n;
  std::vector<double> wacc(static_cast<std::size_t>(map_size), 0.0);
  std::vector<double> tacc(static_cast<std::size_t>(map_size), 0.0);
  for (int b = 0; b < batch; ++b) {
    const std::int64_t off = static_cast<std::int64_t>(b) * map_size;
    for (std::int64_t i = 0; i < map_size; ++i) {
      float ev = ws.e[off + i];
      bool pass = std::fabs(ev) > p.t[i];  // subgradient 0 at |e| == t
      float gzv = pass ? gz[off + i] : 0.0f;
      ge[off + i] = gzv * p.w[i];  // reused below as grad wrt xhat
      wacc[static_cast<std::size_t>(i)] += static_cast<double>(gzv) * ws.xhat[off + i];
      if (pass)
        tacc[static_cast<std::size_t>(i)] -= (ev > 0.0f ? 1.0 : -1.0) * gz[off + i];
    }
  }
  for (std::int64_t i = 0; i < map_size; ++i) {
    grads.w[i] = static_cast<float>(wacc[static_cast<std::size_t>(i)]);
    grads.t[i] = static_cast<float>(tacc[static_cast<std::size_t>(i)]);
  }
  // Adjoint of the forward transform back to the input.
  grads.x = kind == TransformKind::kHadamard ? ht2d(ge) : idct2d(ge);
  return grads;
}

void project_nonnegative(Tensor& t) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (t[i] < 0.0f) t[i] = 0.0f;
}

void project_thresholds(PerceptronParams& p) { project_nonnegative(p.t); }

}  // namespace tdseg

#ifndef TDSEG_NN_HPP
#define TDSEG_NN_HPP

#include <vector>

#include "tdseg/tensor.hpp"

namespace tdseg {

// Kernel layer: each op has a forward and an analytic backward. Inputs are
// rank-4 (B,C,H,W) or rank-3 (C,H,W) treated as batch 1. Forward products run
// in f32; backward and statistics reductions accumulate in 64-bit.

enum class Mode { kTrain, kEval };

struct ConvParams {
  // conv2d: kernel is (out_ch, in_ch, k, k).
  // transposed_conv2d: kernel is (in_ch, out_ch, k, k), i.e. the kernel of
  // the strided conv this op is the adjoint of.
  Tensor kernel;
  Tensor bias;  // (out_ch)
  int stride = 1;
  int padding = 0;

  int k() const { return kernel.extent(3); }
};

struct ConvGrads {
  Tensor x;
  Tensor kernel;
  Tensor bias;
};

// Cross-correlation (no kernel flip) with bias:
// out extent = floor((H + 2*pad - k)/stride) + 1.
Tensor conv2d_forward(const Tensor& x, const ConvParams& p);
// Gradients of sum(grad_out . output) wrt x, kernel, bias.
ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out);

// Adjoint of the matching strided conv: out extent = (H-1)*stride - 2*pad + k.
// With k=4, stride=2, pad=1 the extent exactly doubles.
Tensor transposed_conv2d_forward(const Tensor& x, const ConvParams& p);
ConvGrads transposed_conv2d_backward(const Tensor& x, const ConvParams& p,
                                     const Tensor& grad_out);

// 2x bilinear upsampling with half-pixel centers (no corner alignment);
// backward is the exact transpose of the same linear map.
Tensor bilinear_upsample2x(const Tensor& x);
Tensor bilinear_upsample2x_backward(const Tensor& grad_out, int in_h, int in_w);

struct BatchNormParams {
  Tensor gamma, beta;              // trainable, (C)
  Tensor running_mean, running_var;  // buffers, (C); init (0, 1)
  float momentum = 0.1f;
  float eps = 1e-5f;
};

struct BatchNormCache {
  Mode mode = Mode::kTrain;
  Tensor xhat;
  std::vector<double> inv_std;  // per channel
};

struct BatchNormGrads {
  Tensor x;
  Tensor gamma;
  Tensor beta;
};

// Train mode: normalize by batch statistics over (B,H,W) per channel and
// update running stats with the momentum rule (unbiased var in the running
// buffer). Eval mode: normalize by running stats.
Tensor batchnorm_forward(const Tensor& x, BatchNormParams& p, Mode mode,
                         BatchNormCache* cache = nullptr);
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                  const Tensor& grad_out);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);
Tensor sigmoid(const Tensor& x);
// d sigmoid from the forward output y: g * y * (1 - y).
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

struct AdamState {
  Tensor m, v;
  long step_count = 0;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

AdamState make_adam_state(const Tensor& param, float lr = 1e-4f, float beta1 = 0.9f,
                          float beta2 = 0.999f, float eps = 1e-8f);
// Standard bias-corrected update, in place on param.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state);

// Channel concatenation (axis 1 of B,C,H,W) and its backward split.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels_backward(const Tensor& grad_cat, int a_channels, Tensor& grad_a,
                             Tensor& grad_b);

}  // namespace tdseg

#endif

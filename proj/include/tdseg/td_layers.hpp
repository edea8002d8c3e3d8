#ifndef TDSEG_TD_LAYERS_HPP
#define TDSEG_TD_LAYERS_HPP

#include "tdseg/tensor.hpp"
#include "tdseg/transforms.hpp"

namespace tdseg {

// Transform-domain perceptron block: forward transform, learnable entrywise
// scaling, soft-thresholding with nonnegative learnable thresholds, inverse
// transform. One scaling and one threshold coefficient per channel per
// transform-domain position.

enum class TransformKind { kHadamard, kDct };

struct PerceptronParams {
  Tensor w;  // (C, Ns, Ns) scaling map
  Tensor t;  // (C, Ns, Ns) thresholds, >= 0 outside optimizer steps
};

// Identity initialization: w = 1, t = 0, so the block starts as a pure
// transform roundtrip.
PerceptronParams make_identity_perceptron(int channels, int size);

struct PerceptronWorkspace {
  Tensor xhat;  // transform-domain input
  Tensor e;     // scaled coefficients
  Tensor z;     // thresholded coefficients
};

// S_t(e) = sgn(e) * (|e| - t) if |e| > t, else 0. Requires t >= 0.
float soft_threshold(float e, float t);

struct PerceptronGrads {
  Tensor x;
  Tensor w;
  Tensor t;
};

// x is (C,N,N) or (B,C,N,N); w/t broadcast over the batch axis.
Tensor perceptron_forward(const Tensor& x, const PerceptronParams& p, TransformKind kind,
                          PerceptronWorkspace* ws = nullptr);
PerceptronGrads perceptron_backward(const PerceptronWorkspace& ws, const PerceptronParams& p,
                                    TransformKind kind, const Tensor& grad_y);

// t <- max(t, 0) elementwise; call after every optimizer step touching t.
void project_thresholds(PerceptronParams& p);
void project_nonnegative(Tensor& t);

}  // namespace tdseg

#endif

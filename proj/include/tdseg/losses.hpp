#ifndef TDSEG_LOSSES_HPP
#define TDSEG_LOSSES_HPP

#include "tdseg/tensor.hpp"

namespace tdseg {

// Losses over predicted probabilities. Each returns the scalar loss and, when
// a grad tensor is supplied, writes d(loss)/d(probs) into it. Probabilities
// are clamped to [1e-7, 1 - 1e-7] before any log; the clamp's subgradient is
// zero outside the interior.

inline constexpr float kProbClamp = 1e-7f;

struct LossWeights {
  float lambda_bce = 0.4f;
  float lambda_dice = 0.3f;
  float lambda_focal = 0.3f;
  float focal_gamma = 2.0f;
  float focal_alpha = 0.25f;
  float dice_smooth = 1.0f;
  float pos_weight_cap = 100.0f;
};

// Mean over pixels of -[pos_weight*y*log(p) + (1-y)*log(1-p)].
double bce_weighted(const Tensor& probs, const Tensor& target, float pos_weight,
                    Tensor* grad = nullptr);

// 1 - (2*sum(p*y) + smooth) / (sum(p) + sum(y) + smooth), soft.
double dice_loss(const Tensor& probs, const Tensor& target, float smooth,
                 Tensor* grad = nullptr);

// Mean of -alpha*y*(1-p)^gamma*log(p) - (1-alpha)*(1-y)*p^gamma*log(1-p).
double focal_loss(const Tensor& probs, const Tensor& target, float gamma, float alpha,
                  Tensor* grad = nullptr);

// lambda_bce*BCE + lambda_dice*Dice + lambda_focal*Focal with the same
// weighted sum of gradients.
double composite_loss(const Tensor& probs, const Tensor& target, const LossWeights& w,
                      float pos_weight, Tensor* grad = nullptr);

// Per-batch BCE positive weight: (#negative / #positive) clamped to [1, cap].
float batch_pos_weight(const Tensor& target, float cap = 100.0f);

}  // namespace tdseg

#endif

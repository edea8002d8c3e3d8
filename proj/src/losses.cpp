#include "tdseg/losses.hpp"

#include <cmath>

namespace tdseg {

namespace {

inline double clamp_prob(double p, bool& interior) {
  const double lo = kProbClamp, hi = 1.0 - kProbClamp;
  if (p < lo) {
    interior = false;
    return lo;
  }
  if (p > hi) {
    interior = false;
    return hi;
  }
  interior = true;
  return p;
}

}  // namespace

double bce_weighted(const Tensor& probs, const Tensor& target, float pos_weight,
                    Tensor* grad) {
  require_same_shape(probs, target, "bce_weighted");
  const std::int64_t n = probs.size();
  require(n > 0, "shape", "bce_weighted: empty input");
  if (grad) *grad = Tensor(probs.shape());
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    bool interior;
    double p = clamp_prob(probs[i], interior);
    double y = target[i];
    total -= pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (grad) {
      double g = interior ? (-pos_weight * y / p + (1.0 - y) / (1.0 - p)) / n : 0.0;
      (*grad)[i] = static_cast<float>(g);
    }
  }
  return total / n;
}

double dice_loss(const Tensor& probs, const Tensor& target, float smooth, Tensor* grad) {
  require_same_shape(probs, target, "dice_loss");
  require(smooth > 0.0f, "shape", "dice_loss: smooth must be positive");
  const std::int64_t n = probs.size();
  double inter = 0.0, psum = 0.0, ysum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    inter += static_cast<double>(probs[i]) * target[i];
    psum += probs[i];
    ysum += target[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = psum + ysum + smooth;
  if (grad) {
    *grad = Tensor(probs.shape());
    for (std::int64_t i = 0; i < n; ++i) {
      // d/dp_i [1 - num/den] = -(2*y_i*den - num) / den^2
      double g = -(2.0 * target[i] * den - num) / (den * den);
      (*grad)[i] = static_cast<float>(g);
    }
  }
  return 1.0 - num / den;
}

double focal_loss(const Tensor& probs, const Tensor& target, float gamma, float alpha,
                  Tensor* grad) {
  require_same_shape(probs, target, "focal_loss");
  const std::int64_t n = probs.size();
  require(n > 0, "shape", "focal_loss: empty input");
  if (grad) *grad = Tensor(probs.shape());
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    bool interior;
    double p = clamp_prob(probs[i], interior);
    double y = target[i];
    double q = 1.0 - p;
    total += -alpha * y * std::pow(q, gamma) * std::log(p) -
             (1.0 - alpha) * (1.0 - y) * std::pow(p, gamma) * std::log(q);
    if (grad) {
      double g = 0.0;
      if (interior) {
        // d/dp of the positive term: alpha*y*(gamma*q^(gamma-1)*log(p) - q^gamma/p)
        if (y != 0.0)
          g += alpha * y * (gamma * std::pow(q, gamma - 1.0) * std::log(p) -
                            std::pow(q, gamma) / p);
        if (y != 1.0)
          g += (1.0 - alpha) * (1.0 - y) *
               (-gamma * std::pow(p, gamma - 1.0) * std::log(q) + std::pow(p, gamma) / q);
        g /= n;
      }
      (*grad)[i] = static_cast<float>(g);
    }
  }
  return total / n;
}

double composite_loss(const Tensor& probs, const Tensor& target, const LossWeights& w,
                      float pos_weight, Tensor* grad) {
  require(w.lambda_bce >= 0.0f && w.lambda_dice >= 0.0f && w.lambda_focal >= 0.0f, "config",
          "composite_loss: lambda weights must be nonnegative");
  Tensor g_bce, g_dice, g_focal;
  double bce = bce_weighted(probs, target, pos_weight, grad ? &g_bce : nullptr);
  double dice = dice_loss(probs, target, w.dice_smooth, grad ? &g_dice : nullptr);
  double focal = focal_loss(probs, target, w.focal_gamma, w.focal_alpha,
                            grad ? &g_focal : nullptr);
  if (grad) {
    *grad = Tensor(probs.shape());
    for (std::int64_t i = 0; i < grad->size(); ++i)
      (*grad)[i] = w.lambda_bce * g_bce[i] + w.lambda_dice * g_dice[i] +
                   w.lambda_focal * g_focal[i];
  }
  return w.lambda_bce * bce + w.lambda_dice * dice + w.lambda_focal * focal;
}

float batch_pos_weight(const Tensor& target, float cap) {
  std::int64_t pos = 0, neg = 0;
  for (std::int64_t i = 0; i < target.size(); ++i) {
    if (target[i] > 0.5f)
      ++pos;
    else
      ++neg;
  }
  if (pos == 0) return 1.0f;
  double w = static_cast<double>(neg) / static_cast<double>(pos);
  if (w < 1.0) w = 1.0;
  if (w > cap) w = cap;
  return static_cast<float>(w);
}

}  // namespace tdseg

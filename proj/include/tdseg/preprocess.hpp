#ifndef TDSEG_PREPROCESS_HPP
#define TDSEG_PREPROCESS_HPP

#include <string>
#include <vector>

#include "tdseg/tensor.hpp"

namespace tdseg {

// Mask enrichment, Gaussian-mixture smoothing, flips, normalization, split.
// Every stochastic step is a pure function of (input, rng state).

struct MarginConfig {
  float bg_lo = 0.01f, bg_hi = 0.03f;     // draws replacing background (0) pixels
  float fire_lo = 0.8f, fire_hi = 0.99f;  // draws replacing fire (1) pixels
};

struct SmoothingConfig {
  std::vector<float> sigmas = {0.4f, 0.8f};
};

// mask: (H,W) with values in {-1,0,1}. Uncertain pixels are zeroed first,
// then every 0 becomes a background draw and every 1 a fire draw.
Tensor random_margin_crop(const Tensor& mask, const MarginConfig& cfg, Rng& rng);

// Separable Gaussian, kernel truncated at ceil(3*sigma), each 1D kernel
// normalized to sum 1, reflect (whole-sample symmetric) padding.
Tensor gaussian_blur(const Tensor& mask, float sigma);

// Mean over sigma scales of the per-sigma blurs.
Tensor gaussian_mixture_smooth(const Tensor& mask, const SmoothingConfig& cfg);

// Horizontal and/or vertical flip, each with probability 0.5, applied
// identically to every channel of x and to the target.
void augment_flip(Tensor& x, Tensor& target, Rng& rng);
void flip_horizontal(Tensor& t);
void flip_vertical(Tensor& t);

struct ChannelStat {
  double mean = 0.0;
  double std = 1.0;
  bool exempt = false;  // mask-like channels pass through unnormalized
};

// (x - mean)/std per non-exempt channel; std floored at 1e-6 when computed.
void normalize_channels(Tensor& x, const std::vector<ChannelStat>& stats);

enum class Split { kTrain, kVal, kTest };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

// Deterministic seeded shuffle, then contiguous 10%/10% val/test with the
// rounding residue assigned to train. Every index lands in exactly one split.
std::vector<Split> split_dataset(std::size_t sample_count, std::uint32_t seed);

}  // namespace tdseg

#endif

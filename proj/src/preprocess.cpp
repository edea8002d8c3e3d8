#include "tdseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tdseg {

Tensor random_margin_crop(const Tensor& mask, const MarginConfig& cfg, Rng& rng) {
  require(cfg.bg_lo > 0.0f && cfg.bg_hi < 1.0f && cfg.fire_lo > 0.0f && cfg.fire_hi < 1.0f,
          "config", "margin crop ranges must lie in (0,1)");
  require(cfg.bg_lo < cfg.bg_hi && cfg.fire_lo < cfg.fire_hi && cfg.bg_hi < cfg.fire_lo,
          "config", "margin crop ranges must be ordered: background below fire");
  Tensor out(mask.shape());
  for (std::int64_t i = 0; i < mask.size(); ++i) {
    float v = mask[i];
    require(v == -1.0f || v == 0.0f || v == 1.0f, "data",
            "margin crop: mask value " + std::to_string(v) + " outside {-1,0,1}");
    if (v == -1.0f) v = 0.0f;  // uncertain pixels are zeroed first
    out[i] = v == 0.0f ? uniform_real(rng, cfg.bg_lo, cfg.bg_hi)
                       : uniform_real(rng, cfg.fire_lo, cfg.fire_hi);
  }
  return out;
}

namespace {

// index reflection with edge repeat: -1 -> 0, -2 -> 1, n -> n-1, ...
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

std::vector<double> gaussian_kernel(float sigma) {
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (static_cast<double>(i) * i) / (static_cast<double>(sigma) * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

Tensor gaussian_blur(const Tensor& mask, float sigma) {
  require(sigma > 0.0f, "config", "gaussian_blur: sigma must be positive");
  require(mask.rank() == 2, "shape", "gaussian_blur: expected rank-2 mask");
  const int h = mask.extent(0), w = mask.extent(1);
  std::vector<double> k = gaussian_kernel(sigma);
  const int radius = (static_cast<int>(k.size()) - 1) / 2;

  Tensor tmp({h, w});
  for (int y = 0; y < h; ++y) {  // horizontal pass
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -radius; j <= radius; ++j)
        acc += k[static_cast<std::size_t>(j + radius)] *
               mask[static_cast<std::int64_t>(y) * w + reflect_index(x + j, w)];
      tmp[static_cast<std::int64_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  Tensor out({h, w});
  for (int y = 0; y < h; ++y) {  // vertical pass
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -radius; j <= radius; ++j)
        acc += k[static_cast<std::size_t>(j + radius)] *
               tmp[static_cast<std::int64_t>(reflect_index(y + j, h)) * w + x];
      out[static_cast<std::int64_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor gaussian_mixture_smooth(const Tensor& mask, const SmoothingConfig& cfg) {
  require(!cfg.sigmas.empty(), "config", "gaussian_mixture_smooth: need at least one sigma");
  Tensor acc(mask.shape());
  for (float sigma : cfg.sigmas) {
    Tensor b = gaussian_blur(mask, sigma);
    for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
  }
  const float scale = 1.0f / static_cast<float>(cfg.sigmas.size());
  for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] *= scale;
  return acc;
}

namespace {

void flip_axis(Tensor& t, bool horizontal) {
  require(t.rank() >= 2, "shape", "flip: expected rank >= 2");
  const int h = t.extent(t.rank() - 2);
  const int w = t.extent(t.rank() - 1);
  const std::int64_t planes = t.size() / (static_cast<std::int64_t>(h) * w);
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    float* p = t.data() + pl * h * w;
    if (horizontal) {
      for (int y = 0; y < h; ++y)
        std::reverse(p + static_cast<std::int64_t>(y) * w, p + static_cast<std::int64_t>(y + 1) * w);
    } else {
      for (int y = 0; y < h / 2; ++y)
        std::swap_ranges(p + static_cast<std::int64_t>(y) * w,
                         p + static_cast<std::int64_t>(y + 1) * w,
                         p + static_cast<std::int64_t>(h - 1 - y) * w);
    }
  }
}

}  // namespace

void flip_horizontal(Tensor& t) { flip_axis(t, true); }
void flip_vertical(Tensor& t) { flip_axis(t, false); }

void augment_flip(Tensor& x, Tensor& target, Rng& rng) {
  bool h = uniform_real(rng, 0.0f, 1.0f) < 0.5f;
  bool v = uniform_real(rng, 0.0f, 1.0f) < 0.5f;
  if (h) {
    flip_horizontal(x);
    flip_horizontal(target);
  }
  if (v) {
    flip_vertical(x);
    flip_vertical(target);
  }
}

void normalize_channels(Tensor& x, const std::vector<ChannelStat>& stats) {
  require(x.rank() == 3, "shape", "normalize_channels: expected (C,H,W)");
  require(static_cast<std::size_t>(x.extent(0)) == stats.size(), "shape",
          "normalize_channels: " + std::to_string(stats.size()) + " stats for " +
              std::to_string(x.extent(0)) + " channels");
  const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
  for (int c = 0; c < x.extent(0); ++c) {
    const ChannelStat& s = stats[static_cast<std::size_t>(c)];
    if (s.exempt) continue;
    float* p = x.data() + static_cast<std::int64_t>(c) * plane;
    const float mean = static_cast<float>(s.mean);
    const float inv = static_cast<float>(1.0 / s.std);
    for (std::int64_t i = 0; i < plane; ++i) p[i] = (p[i] - mean) * inv;
  }
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    default: return "test";
  }
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw Error("data", "unknown split label '" + name + "'");
}

std::vector<Split> split_dataset(std::size_t sample_count, std::uint32_t seed) {
  require(sample_count >= 10, "data",
          "split needs at least 10 samples, got " + std::to_string(sample_count));
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = sample_count / 10;
  const std::size_t n_test = sample_count / 10;
  const std::size_t n_train = sample_count - n_val - n_test;
  std::vector<Split> splits(sample_count, Split::kTrain);
  for (std::size_t i = 0; i < sample_count; ++i) {
    if (i < n_train)
      splits[order[i]] = Split::kTrain;
    else if (i < n_train + n_val)
      splits[order[i]] = Split::kVal;
    else
      splits[order[i]] = Split::kTest;
  }
  return splits;
}

}  // namespace tdseg

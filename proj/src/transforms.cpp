#include "tdseg/transforms.hpp"

#include <mutex>
#include <unordered_map>

namespace tdseg {

Eigen::MatrixXi hadamard_matrix(int n) {
  require(is_power_of_two(n), "shape",
          "Hadamard size must be a power of two, got " + std::to_string(n));
  require(n <= 4096, "shape", "Hadamard size capped at 4096, got " + std::to_string(n));
  Eigen::MatrixXi h(1, 1);
  h(0, 0) = 1;
  for (int m = 1; m < n; m *= 2) {
    Eigen::MatrixXi next(2 * m, 2 * m);
    next.topLeftCorner(m, m) = h;
    next.topRightCorner(m, m) = h;
    next.bottomLeftCorner(m, m) = h;
    next.bottomRightCorner(m, m) = -h;
    h.swap(next);
  }
  return h;
}

void fwht_1d_strided(float* v, int n, int stride) {
  for (int len = 1; len < n; len <<= 1) {
    for (int base = 0; base < n; base += 2 * len) {
      for (int j = base; j < base + len; ++j) {
        float a = v[static_cast<std::ptrdiff_t>(j) * stride];
        float b = v[static_cast<std::ptrdiff_t>(j + len) * stride];
        v[static_cast<std::ptrdiff_t>(j) * stride] = a + b;
        v[static_cast<std::ptrdiff_t>(j + len) * stride] = a - b;
      }
    }
  }
}

void fwht_1d(std::span<float> v) {
  require(is_power_of_two(static_cast<int>(v.size())), "shape",
          "fwht length must be a power of two, got " + std::to_string(v.size()));
  fwht_1d_strided(v.data(), static_cast<int>(v.size()), 1);
}

namespace {

// Collapse leading extents: a rank-3/4 tensor is a stack of H x W slices.
void square_slice_geometry(const Tensor& x, std::int64_t& slices, int& n) {
  require(x.rank() == 3 || x.rank() == 4, "shape",
          "2D transform expects rank-3/4 tensor, got rank " + std::to_string(x.rank()));
  int h = x.extent(x.rank() - 2);
  int w = x.extent(x.rank() - 1);
  require(h == w, "shape",
          "2D transform needs square spatial extents, got " + std::to_string(h) + "x" +
              std::to_string(w));
  n = h;
  slices = x.size() / (static_cast<std::int64_t>(n) * n);
}

void ht2d_inplace(Tensor& t, int n, std::int64_t slices, float scale) {
  for (std::int64_t s = 0; s < slices; ++s) {
    float* base = t.data() + s * n * n;
    for (int r = 0; r < n; ++r) fwht_1d_strided(base + static_cast<std::int64_t>(r) * n, n, 1);
    for (int c = 0; c < n; ++c) fwht_1d_strided(base + c, n, n);
    if (scale != 1.0f)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n) * n; ++i) base[i] *= scale;
  }
}

}  // namespace

Tensor ht2d(const Tensor& x) {
  std::int64_t slices;
  int n;
  square_slice_geometry(x, slices, n);
  require(is_power_of_two(n), "shape",
          "Hadamard transform needs power-of-two extent, got " + std::to_string(n));
  Tensor out = x;
  ht2d_inplace(out, n, slices, 1.0f);
  return out;
}

Tensor iht2d(const Tensor& z) {
  std::int64_t slices;
  int n;
  square_slice_geometry(z, slices, n);
  require(is_power_of_two(n), "shape",
          "Hadamard transform needs power-of-two extent, got " + std::to_string(n));
  Tensor out = z;
  ht2d_inplace(out, n, slices, 1.0f / (static_cast<float>(n) * static_cast<float>(n)));
  return out;
}

DCTPlan::DCTPlan(int n) : n_(n), basis_(n, n) {
  require(n >= 1, "shape", "DCT size must be >= 1");
  const double pi = 3.14159265358979323846;
  for (int r = 0; r < n; ++r) {
    double a = (r == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int c = 0; c < n; ++c)
      basis_(r, c) = static_cast<float>(a * std::cos(pi * (2.0 * c + 1.0) * r / (2.0 * n)));
  }
}

namespace {

const MatrixRM& dct_basis(int n) {
  static std::mutex mu;
  static std::unordered_map<int, DCTPlan> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find(n);
  if (it == plans.end()) it = plans.emplace(n, DCTPlan(n)).first;
  return it->second.basis();
}

enum class DctDir { kForward, kInverse };

Tensor dct2d_apply(const Tensor& x, DctDir dir) {
  std::int64_t slices;
  int n;
  square_slice_geometry(x, slices, n);
  const MatrixRM& d = dct_basis(n);
  Tensor out = x;
  MatrixRM tmp(n, n);
  for (std::int64_t s = 0; s < slices; ++s) {
    auto v = slice_view(out, s, n, n);
    if (dir == DctDir::kForward)
      tmp.noalias() = d * v * d.transpose();
    else
      tmp.noalias() = d.transpose() * v * d;
    v = tmp;
  }
  return out;
}

}  // namespace

Tensor dct2d(const Tensor& x) { return dct2d_apply(x, DctDir::kForward); }

Tensor idct2d(const Tensor& z) { return dct2d_apply(z, DctDir::kInverse); }

}  // namespace tdseg

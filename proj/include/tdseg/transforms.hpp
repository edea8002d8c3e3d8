#ifndef TDSEG_TRANSFORMS_HPP
#define TDSEG_TRANSFORMS_HPP

#include <Eigen/Dense>
#include <span>

#include "tdseg/tensor.hpp"

namespace tdseg {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Sylvester (natural-order) Hadamard matrix, entries in {-1,+1}.
// H_1 = [1], H_{2N} = [[H, H], [H, -H]]; satisfies H * H^T = N * I exactly.
Eigen::MatrixXi hadamard_matrix(int n);

// In-place fast Walsh-Hadamard transform, natural (Sylvester) order,
// unnormalized: v <- H_N * v in O(N log N) butterflies.
void fwht_1d(std::span<float> v);
void fwht_1d_strided(float* v, int n, int stride);

// Per-slice 2D Hadamard transform X_hat = H * X * H over every N x N slice
// of a rank-3/4 tensor (leading extents collapsed). Unnormalized.
Tensor ht2d(const Tensor& x);
// Inverse: Y = (1/N^2) * H * Z * H.
Tensor iht2d(const Tensor& z);

// Orthonormal DCT-II basis: row r, col c = a_r * cos(pi*(2c+1)*r/(2N)),
// a_0 = sqrt(1/N), a_r = sqrt(2/N). D * D^T = I.
class DCTPlan {
 public:
  explicit DCTPlan(int n);
  int size() const { return n_; }
  const MatrixRM& basis() const { return basis_; }

 private:
  int n_ = 0;
  MatrixRM basis_;
};

// Per-slice X_tilde = D * X * D^T; inverse Y = D^T * Z * D.
Tensor dct2d(const Tensor& x);
Tensor idct2d(const Tensor& z);

}  // namespace tdseg

#endif

#ifndef TDSEG_TENSOR_HPP
#define TDSEG_TENSOR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tdseg/common.hpp"

namespace tdseg {

// Dense row-major tensor with explicit shape metadata and an optional
// gradient buffer of identical shape. Rank 1..4 is what the engine uses:
// (C), (C,H,W) and (B,C,H,W). Storage is 32-bit by default; reductions
// that feed it accumulate in 64-bit.
template <typename Scalar>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(element_count(shape_), Scalar(0));
  }

  static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<int> shape, Scalar v) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static TensorT from_data(std::vector<int> shape, std::vector<Scalar> data) {
    require(element_count(shape) == static_cast<std::int64_t>(data.size()), "shape",
            "tensor data length " + std::to_string(data.size()) +
                " does not match shape product " + std::to_string(element_count(shape)));
    TensorT t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // (c,h,w) indexing for rank-3, (b,c,h,w) for rank-4.
  Scalar& at(int c, int h, int w) { return data_[static_cast<std::size_t>(idx3(c, h, w))]; }
  Scalar at(int c, int h, int w) const { return data_[static_cast<std::size_t>(idx3(c, h, w))]; }
  Scalar& at(int b, int c, int h, int w) { return data_[static_cast<std::size_t>(idx4(b, c, h, w))]; }
  Scalar at(int b, int c, int h, int w) const { return data_[static_cast<std::size_t>(idx4(b, c, h, w))]; }

  std::int64_t idx3(int c, int h, int w) const {
    return (static_cast<std::int64_t>(c) * shape_[1] + h) * shape_[2] + w;
  }
  std::int64_t idx4(int b, int c, int h, int w) const {
    return ((static_cast<std::int64_t>(b) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  // Gradient buffer. Absent until ensure_grad(); same shape as data.
  bool has_grad() const { return !grad_.empty(); }
  void ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), Scalar(0));
  }
  void zero_grad() {
    if (has_grad()) std::fill(grad_.begin(), grad_.end(), Scalar(0));
  }
  void drop_grad() { grad_.clear(); }
  Scalar* grad() { return grad_.data(); }
  const Scalar* grad() const { return grad_.data(); }
  std::vector<Scalar>& grad_vec() { return grad_; }
  const std::vector<Scalar>& grad_vec() const { return grad_; }

  std::vector<Scalar>& raw() { return data_; }
  const std::vector<Scalar>& raw() const { return data_; }

  static std::int64_t element_count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
      require(e >= 0, "shape", "negative extent in tensor shape");
      n *= e;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
  std::vector<Scalar> grad_;
};

using Tensor = TensorT<float>;

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixRMd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// View of one H x W slice (channel) of a row-major tensor as an Eigen matrix.
inline Eigen::Map<MatrixRM> slice_view(Tensor& t, std::int64_t slice, int rows, int cols) {
  return Eigen::Map<MatrixRM>(t.data() + slice * rows * cols, rows, cols);
}
inline Eigen::Map<const MatrixRM> slice_view(const Tensor& t, std::int64_t slice, int rows,
                                             int cols) {
  return Eigen::Map<const MatrixRM>(t.data() + slice * rows * cols, rows, cols);
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  require(a.shape() == b.shape(), "shape",
          what + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline bool all_finite(const Tensor& t) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i])) return false;
  return true;
}

}  // namespace tdseg

#endif

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace slf::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

/// Dense row-major N-d array with optional same-shape gradient storage.
/// Rank-4 tensors are laid out [batch, channel, height, width].
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}
  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) throw std::invalid_argument("Tensor: data length does not match shape");
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  bool has_grad() const { return grad_.size() == data_.size() && data_.size() > 0; }
  Vector& grad() {
    if (!has_grad()) grad_ = Vector::Zero(data_.size());
    return grad_;
  }
  const Vector& grad() const {
    if (!has_grad()) throw std::logic_error("Tensor: no gradient allocated");
    return grad_;
  }
  void zero_grad() { grad_ = Vector::Zero(data_.size()); }

  Scalar& at(Index b, Index c, Index y, Index x) { return data_[offset(b, c, y, x)]; }
  Scalar at(Index b, Index c, Index y, Index x) const { return data_[offset(b, c, y, x)]; }

  /// Batch item `b` of a rank-4 tensor as a (channels, height*width) matrix.
  MatrixMap item(Index b) {
    require_rank(4);
    return MatrixMap(data_.data() + b * dim(1) * dim(2) * dim(3), dim(1), dim(2) * dim(3));
  }
  ConstMatrixMap item(Index b) const {
    require_rank(4);
    return ConstMatrixMap(data_.data() + b * dim(1) * dim(2) * dim(3), dim(1), dim(2) * dim(3));
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  void require_rank(int r) const {
    if (rank() != r) throw std::invalid_argument("Tensor: expected rank " + std::to_string(r) + ", got " +
                                                 shape_string(shape_));
  }

 private:
  Index offset(Index b, Index c, Index y, Index x) const {
    return ((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  Shape shape_;
  Vector data_;
  Vector grad_;
};

}  // namespace slf::nn

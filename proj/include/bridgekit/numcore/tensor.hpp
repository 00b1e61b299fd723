// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bridgekit {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Shape = std::vector<Index>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FrozenError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

inline std::string shape_string(Index rows, Index cols) { return shape_string(Shape{rows, cols}); }

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Dense row-major tensor with an optional gradient buffer.
///
/// Storage is always a row-major matrix whose column count is the last
/// dimension and whose row count is the product of the leading dimensions,
/// so rank-1 tensors are 1 x n and rank-3 convolution kernels are
/// (out * in) x k. All arithmetic happens on that matrix view.
template <typename Scalar>
class Tensor {
 public:
  using Matrix = MatrixX<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_ = Matrix::Zero(leading(shape_), shape_.back());
  }

  Tensor(Shape shape, Matrix data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.rows() != leading(shape_) || data_.cols() != shape_.back()) {
      throw DimensionError("tensor data " + shape_string(data_.rows(), data_.cols()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  explicit Tensor(Matrix data) : shape_{data.rows(), data.cols()}, data_(std::move(data)) { validate_shape(shape_); }

  static Tensor row_vector(Index n) { return Tensor(Shape{n}); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }

  const Matrix& value() const { return data_; }
  Matrix& value() { return data_; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) {
    if (on && frozen_) throw FrozenError("cannot attach a gradient to a frozen tensor");
    requires_grad_ = on;
    if (!on) grad_.reset();
  }

  bool frozen() const { return frozen_; }
  void freeze() {
    frozen_ = true;
    requires_grad_ = false;
    grad_.reset();
  }

  const std::optional<Matrix>& grad() const { return grad_; }
  void zero_grad() {
    if (requires_grad_) grad_ = Matrix::Zero(data_.rows(), data_.cols());
  }
  void add_grad(const Matrix& g) {
    if (!requires_grad_) throw std::logic_error("add_grad on a tensor that does not require grad");
    if (!grad_) grad_ = Matrix::Zero(data_.rows(), data_.cols());
    *grad_ += g;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_, data_.template cast<Other>());
    if (frozen_) out.freeze();
    else out.set_requires_grad(requires_grad_);
    return out;
  }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }
  static Index leading(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end() - 1, Index{1}, std::multiplies<>());
  }

  Shape shape_{1};
  Matrix data_ = Matrix::Zero(1, 1);
  bool requires_grad_ = false;
  bool frozen_ = false;
  std::optional<Matrix> grad_;
};

}  // namespace bridgekit

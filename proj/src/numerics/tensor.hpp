// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tensor.hpp
 * @brief  Dense row-major 64-bit tensor (rank 1..3) used by every module.
 */
#ifndef GRAPHFLOW_NUMERICS_TENSOR_HPP
#define GRAPHFLOW_NUMERICS_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphflow {

/// Raised when operand shapes are incompatible with an operation.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when an expression references a leaf that has no binding.
class BindingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when an operation produces NaN or Inf.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape &shape);

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  const Shape &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Rows/cols of a rank-2 tensor. A rank-1 tensor is viewed as a row.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double &operator()(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }
  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double> &storage() { return data_; }
  const std::vector<double> &storage() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  double max_abs() const;

  Tensor transposed() const;
  Tensor row(std::size_t r) const;

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_numel(const Shape &shape);

} // namespace graphflow

#endif

// SPDX-License-Identifier: Apache-2.0
#include "numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace graphflow {

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape &shape) {
  std::size_t n = 1;
  for (auto s : shape)
    n *= s;
  return n;
}

static void check_shape(const Shape &shape) {
  if (shape.empty() || shape.size() > 3)
    throw ShapeError("tensor rank must be 1..3, got " + shape_str(shape));
  for (auto s : shape)
    if (s == 0)
      throw ShapeError("tensor dimensions must be positive, got " +
                       shape_str(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_)
    m = std::max(m, std::abs(v));
  return m;
}

Tensor Tensor::transposed() const {
  if (rank() != 2)
    throw ShapeError("transpose requires rank 2, got " + shape_str(shape_));
  Tensor out({cols(), rows()});
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c)
      out(c, r) = (*this)(r, c);
  return out;
}

Tensor Tensor::row(std::size_t r) const {
  if (r >= rows())
    throw ShapeError("row index out of range");
  Tensor out({1, cols()});
  std::copy_n(data_.begin() + r * cols(), cols(), out.data_.begin());
  return out;
}

} // namespace graphflow

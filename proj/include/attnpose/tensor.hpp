#pragma once

// Dense row-major tensor of doubles. A shape-carrying buffer: the math on
// top of it lives in kernels.hpp. Up to 4 dimensions are used in practice
// (batch, channel, height, width).

#include <cstdint>
#include <numeric>
#include <vector>

#include "attnpose/errors.hpp"

namespace attnpose {

class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Convenience accessors; index math matches the kernels' row-major layout.
  double& at(int b, int i) { return data_[static_cast<size_t>(b) * dim(1) + i]; }
  double at(int b, int i) const { return data_[static_cast<size_t>(b) * dim(1) + i]; }
  double& at(int b, int c, int h, int w) {
    return data_[((static_cast<size_t>(b) * dim(1) + c) * dim(2) + h) * dim(3) + w];
  }
  double at(int b, int c, int h, int w) const {
    return data_[((static_cast<size_t>(b) * dim(1) + c) * dim(2) + h) * dim(3) + w];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != size()) throw ShapeError("reshape changes element count");
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace attnpose

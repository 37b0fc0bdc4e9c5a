#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "erpdeck/error.hpp"

namespace erpdeck {

// Dense row-major array of 64-bit floats. All internal computation is double
// precision; 32-bit storage appears only in weight/recording files.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<size_t> shape, double fill = 0.0) : shape_(std::move(shape)) {
    data_.assign(element_count(shape_), fill);
  }

  Tensor(std::initializer_list<size_t> shape, double fill = 0.0)
      : Tensor(std::vector<size_t>(shape), fill) {}

  static size_t element_count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  // 2-D accessors (rows = dim 0).
  double& at(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
  double at(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

  void reshape(std::vector<size_t> shape) {
    require(element_count(shape) == data_.size(), Errc::shape_error,
            "reshape changes element count");
    shape_ = std::move(shape);
  }

  // Reuses the existing allocation when the element count matches; contents
  // are unspecified afterwards unless the count was unchanged.
  void ensure(std::vector<size_t> shape) {
    const size_t count = element_count(shape);
    if (count != data_.size()) data_.resize(count);
    shape_ = std::move(shape);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

}  // namespace erpdeck

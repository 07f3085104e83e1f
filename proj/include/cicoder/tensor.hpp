#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "cicoder/error.hpp"

namespace cicoder {

// Learnable array with a same-shaped gradient accumulator. Row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)),
        data_(element_count(shape_), fill),
        grad_(data_.size(), 0.0) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

}  // namespace cicoder

/*
 * Copyright 2026 The Varprop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VARPROP_TENSOR_HPP_
#define VARPROP_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace varprop {

enum class Padding { kValid, kSame };

/// Dense N-dimensional array of doubles in row-major order.
/// Values are immutable from the point of view of concurrent readers;
/// all free functions below return new tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t dim) const { return shape_[dim]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k,
                     std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k,
                    std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  /// Same data, new shape; total element count must be preserved.
  Tensor reshaped(std::vector<std::size_t> shape) const;
  Tensor flattened() const { return reshaped({size()}); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// "[2, 3]" style rendering for error messages.
std::string shape_string(const std::vector<std::size_t>& shape);

std::size_t shape_size(const std::vector<std::size_t>& shape);

// Element-wise algebra; operand shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double c);

/// Standard matrix product of a [m x k] and b [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// w [m x n] times x (n elements, any shape); returns an m-vector.
Tensor matvec(const Tensor& w, const Tensor& x);

Tensor transposed(const Tensor& a);

/// The error function. Total on finite inputs, odd-symmetric,
/// |error| <= 1e-12 against the true value.
inline double erf(double x) { return std::erf(x); }

/// Cross-correlation (no kernel flip) of input [H x W x C] with kernel
/// [KH x KW x C x CO], stride 1. `kSame` zero-pads so the spatial extents
/// are preserved; `kValid` requires the kernel to fit inside the input.
Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding padding);

std::vector<std::size_t> conv2d_output_shape(
    const std::vector<std::size_t>& input_shape,
    const std::vector<std::size_t>& kernel_shape, Padding padding);

}  // namespace varprop

#endif  // VARPROP_TENSOR_HPP_

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

#include "varprop/tensor.hpp"

#include <cmath>
#include <sstream>

#include "varprop/errors.hpp"

namespace varprop {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " implies " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_size(shape) != size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                     shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scaled(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) +
                     " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.extent(0);
  const std::size_t k = a.extent(1);
  const std::size_t n = b.extent(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      for (std::size_t j = 0; j < n; ++j) {
        out(i, j) += aip * b(p, j);
      }
    }
  }
  return out;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || w.extent(1) != x.size()) {
    throw ShapeError("matvec: incompatible shapes " + shape_string(w.shape()) +
                     " x " + shape_string(x.shape()));
  }
  const std::size_t m = w.extent(0);
  const std::size_t n = w.extent(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += w(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

Tensor transposed(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError("transpose: expected a matrix, got " +
                     shape_string(a.shape()));
  }
  Tensor out({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    for (std::size_t j = 0; j < a.extent(1); ++j) out(j, i) = a(i, j);
  }
  return out;
}

std::vector<std::size_t> conv2d_output_shape(
    const std::vector<std::size_t>& input_shape,
    const std::vector<std::size_t>& kernel_shape, Padding padding) {
  if (input_shape.size() != 3) {
    throw ShapeError("conv2d: input must be [H, W, C], got " +
                     shape_string(input_shape));
  }
  if (kernel_shape.size() != 4) {
    throw ShapeError("conv2d: kernel must be [KH, KW, C, CO], got " +
                     shape_string(kernel_shape));
  }
  if (kernel_shape[2] != input_shape[2]) {
    throw ShapeError("conv2d: kernel channels " + shape_string(kernel_shape) +
                     " do not match input " + shape_string(input_shape));
  }
  if (padding == Padding::kValid) {
    if (kernel_shape[0] > input_shape[0] || kernel_shape[1] > input_shape[1]) {
      throw ShapeError("conv2d: kernel " + shape_string(kernel_shape) +
                       " larger than input " + shape_string(input_shape) +
                       " with valid padding");
    }
    return {input_shape[0] - kernel_shape[0] + 1,
            input_shape[1] - kernel_shape[1] + 1, kernel_shape[3]};
  }
  return {input_shape[0], input_shape[1], kernel_shape[3]};
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding padding) {
  const auto out_shape =
      conv2d_output_shape(input.shape(), kernel.shape(), padding);
  const std::size_t kh = kernel.extent(0);
  const std::size_t kw = kernel.extent(1);
  const std::size_t c_in = kernel.extent(2);
  const std::size_t c_out = kernel.extent(3);
  const std::size_t h = input.extent(0);
  const std::size_t w = input.extent(1);
  // kSame distributes the extra padding to the bottom/right.
  const std::ptrdiff_t pad_top =
      padding == Padding::kSame ? static_cast<std::ptrdiff_t>((kh - 1) / 2) : 0;
  const std::ptrdiff_t pad_left =
      padding == Padding::kSame ? static_cast<std::ptrdiff_t>((kw - 1) / 2) : 0;

  Tensor out(out_shape);
  for (std::size_t oi = 0; oi < out_shape[0]; ++oi) {
    for (std::size_t oj = 0; oj < out_shape[1]; ++oj) {
      for (std::size_t co = 0; co < c_out; ++co) {
        double acc = 0.0;
        for (std::size_t ki = 0; ki < kh; ++ki) {
          const std::ptrdiff_t ii =
              static_cast<std::ptrdiff_t>(oi + ki) - pad_top;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kj = 0; kj < kw; ++kj) {
            const std::ptrdiff_t jj =
                static_cast<std::ptrdiff_t>(oj + kj) - pad_left;
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
            for (std::size_t c = 0; c < c_in; ++c) {
              acc += input(static_cast<std::size_t>(ii),
                           static_cast<std::size_t>(jj), c) *
                     kernel(ki, kj, c, co);
            }
          }
        }
        out(oi, oj, co) = acc;
      }
    }
  }
  return out;
}

}  // namespace varprop

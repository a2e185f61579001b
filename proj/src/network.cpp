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

#include "varprop/network.hpp"

#include <algorithm>
#include <cmath>

#include "varprop/errors.hpp"

namespace varprop {

const char* layer_kind(const LayerSpec& layer) {
  struct Visitor {
    const char* operator()(const DenseLayer&) const { return "dense"; }
    const char* operator()(const Conv2dLayer&) const { return "conv2d"; }
    const char* operator()(const ReluLayer&) const { return "relu"; }
    const char* operator()(const SigmoidLayer&) const { return "sigmoid"; }
    const char* operator()(const SoftmaxLayer&) const { return "softmax"; }
    const char* operator()(const DropoutLayer&) const { return "dropout"; }
  };
  return std::visit(Visitor{}, layer);
}

namespace {

std::vector<std::size_t> layer_output_shape(
    const LayerSpec& layer, const std::vector<std::size_t>& in_shape,
    std::size_t index) {
  const std::string where = "layer " + std::to_string(index) + " (" +
                            layer_kind(layer) + ")";
  if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
    if (dense->weights.rank() != 2) {
      throw ShapeError(where + ": weights must be a matrix, got " +
                       shape_string(dense->weights.shape()));
    }
    if (dense->bias.size() != dense->weights.extent(0)) {
      throw ShapeError(where + ": bias length " +
                       std::to_string(dense->bias.size()) +
                       " does not match weights " +
                       shape_string(dense->weights.shape()));
    }
    if (dense->weights.extent(1) != shape_size(in_shape)) {
      throw ShapeError(where + ": expects " +
                       std::to_string(dense->weights.extent(1)) +
                       " inputs, got shape " + shape_string(in_shape));
    }
    return {dense->weights.extent(0)};
  }
  if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
    try {
      return conv2d_output_shape(in_shape, conv->kernel.shape(),
                                 conv->padding);
    } catch (const ShapeError& e) {
      throw ShapeError(where + ": " + e.what());
    }
  }
  // relu / sigmoid / softmax / dropout preserve shape.
  return in_shape;
}

}  // namespace

std::vector<std::vector<std::size_t>> infer_shapes(const NetworkSpec& net) {
  std::vector<std::vector<std::size_t>> shapes;
  shapes.reserve(net.layers.size() + 1);
  shapes.push_back(net.input_shape);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (std::holds_alternative<SoftmaxLayer>(net.layers[i]) &&
        i + 1 != net.layers.size()) {
      throw ConfigError("layer " + std::to_string(i) +
                        " (softmax): softmax must be the final layer");
    }
    if (const auto* drop = std::get_if<DropoutLayer>(&net.layers[i])) {
      if (!(drop->rate >= 0.0 && drop->rate < 1.0)) {
        throw ConfigError("layer " + std::to_string(i) +
                          " (dropout): rate must lie in [0, 1), got " +
                          std::to_string(drop->rate));
      }
    }
    shapes.push_back(layer_output_shape(net.layers[i], shapes.back(), i));
  }
  return shapes;
}

int first_dropout_index(const NetworkSpec& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (std::holds_alternative<DropoutLayer>(net.layers[i])) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

double dropout_mean_scale(const DropoutLayer& layer) {
  return layer.convention == DropoutConvention::kStandard ? 1.0 - layer.rate
                                                          : 1.0;
}

double dropout_mask_variance(const DropoutLayer& layer) {
  const double p = layer.rate;
  return layer.convention == DropoutConvention::kStandard ? p * (1.0 - p)
                                                          : p / (1.0 - p);
}

Tensor apply_relu(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max(out[i], 0.0);
  }
  return out;
}

Tensor apply_sigmoid(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
  return out;
}

Tensor softmax(const Tensor& x) {
  Tensor out = x;
  double m = out[0];
  for (std::size_t i = 1; i < out.size(); ++i) m = std::max(m, out[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(out[i] - m);
    total += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total;
  return out;
}

Tensor apply_layer(const LayerSpec& layer, const Tensor& input) {
  struct Visitor {
    const Tensor& x;
    Tensor operator()(const DenseLayer& l) const {
      return add(matvec(l.weights, x), l.bias);
    }
    Tensor operator()(const Conv2dLayer& l) const {
      return conv2d(x, l.kernel, l.padding);
    }
    Tensor operator()(const ReluLayer&) const { return apply_relu(x); }
    Tensor operator()(const SigmoidLayer&) const { return apply_sigmoid(x); }
    Tensor operator()(const SoftmaxLayer&) const { return softmax(x); }
    Tensor operator()(const DropoutLayer& l) const {
      return scaled(x, dropout_mean_scale(l));
    }
  };
  return std::visit(Visitor{input}, layer);
}

Tensor forward(const NetworkSpec& net, const Tensor& input) {
  if (input.shape() != net.input_shape) {
    throw ShapeError("forward: input shape " + shape_string(input.shape()) +
                     " does not match network input " +
                     shape_string(net.input_shape));
  }
  Tensor x = input;
  for (const LayerSpec& layer : net.layers) x = apply_layer(layer, x);
  return x;
}

Tensor conv_as_matrix(const Conv2dLayer& layer,
                      const std::vector<std::size_t>& input_shape) {
  const Tensor& kernel = layer.kernel;
  const auto out_shape =
      conv2d_output_shape(input_shape, kernel.shape(), layer.padding);
  const std::size_t kh = kernel.extent(0);
  const std::size_t kw = kernel.extent(1);
  const std::size_t c_in = kernel.extent(2);
  const std::size_t c_out = kernel.extent(3);
  const std::size_t h = input_shape[0];
  const std::size_t w = input_shape[1];
  const std::ptrdiff_t pad_top =
      layer.padding == Padding::kSame ? static_cast<std::ptrdiff_t>((kh - 1) / 2)
                                      : 0;
  const std::ptrdiff_t pad_left =
      layer.padding == Padding::kSame ? static_cast<std::ptrdiff_t>((kw - 1) / 2)
                                      : 0;

  Tensor m({shape_size(out_shape), shape_size(input_shape)});
  for (std::size_t oi = 0; oi < out_shape[0]; ++oi) {
    for (std::size_t oj = 0; oj < out_shape[1]; ++oj) {
      for (std::size_t co = 0; co < c_out; ++co) {
        const std::size_t row = (oi * out_shape[1] + oj) * c_out + co;
        for (std::size_t ki = 0; ki < kh; ++ki) {
          const std::ptrdiff_t ii =
              static_cast<std::ptrdiff_t>(oi + ki) - pad_top;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kj = 0; kj < kw; ++kj) {
            const std::ptrdiff_t jj =
                static_cast<std::ptrdiff_t>(oj + kj) - pad_left;
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
            for (std::size_t c = 0; c < c_in; ++c) {
              const std::size_t col =
                  (static_cast<std::size_t>(ii) * w +
                   static_cast<std::size_t>(jj)) *
                      c_in +
                  c;
              m(row, col) += kernel(ki, kj, c, co);
            }
          }
        }
      }
    }
  }
  return m;
}

}  // namespace varprop

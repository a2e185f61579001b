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

#ifndef VARPROP_NETWORK_HPP_
#define VARPROP_NETWORK_HPP_

#include <string>
#include <variant>
#include <vector>

#include "varprop/tensor.hpp"

namespace varprop {

struct DenseLayer {
  Tensor weights;  // [out x in]
  Tensor bias;     // [out]
};

struct Conv2dLayer {
  Tensor kernel;  // [KH x KW x C x CO], stride 1, no bias
  Padding padding = Padding::kValid;
};

struct ReluLayer {};
struct SigmoidLayer {};
struct SoftmaxLayer {};

/// `kStandard`: train-time mask Z in {0,1} with P(Z=0)=p, activations scaled
/// by 1-p at test time. `kInverted`: Z in {0, 1/(1-p)}, no test-time scaling.
enum class DropoutConvention { kStandard, kInverted };

struct DropoutLayer {
  double rate = 0.0;  // p in [0, 1)
  DropoutConvention convention = DropoutConvention::kStandard;
};

using LayerSpec = std::variant<DenseLayer, Conv2dLayer, ReluLayer,
                               SigmoidLayer, SoftmaxLayer, DropoutLayer>;

/// Serialized kind tag: "dense", "conv2d", "relu", "sigmoid", "softmax",
/// "dropout".
const char* layer_kind(const LayerSpec& layer);

struct NetworkSpec {
  std::vector<std::size_t> input_shape;
  std::vector<LayerSpec> layers;
};

/// Activation shape entering each layer plus the final output shape
/// (layers.size() + 1 entries). Throws ShapeError naming the offending
/// layer index, and ConfigError when softmax is not the final layer.
std::vector<std::vector<std::size_t>> infer_shapes(const NetworkSpec& net);

/// Index of the first dropout layer, or -1 when the network has none.
int first_dropout_index(const NetworkSpec& net);

/// E[Z] of a dropout layer: 1-p for standard, 1 for inverted.
double dropout_mean_scale(const DropoutLayer& layer);

/// Var[Z]: p(1-p) for standard, p/(1-p) for inverted.
double dropout_mask_variance(const DropoutLayer& layer);

/// Deterministic inference pass. Dropout layers multiply activations by
/// E[Z]; everything else applies its usual function.
Tensor forward(const NetworkSpec& net, const Tensor& input);

/// One step of `forward`.
Tensor apply_layer(const LayerSpec& layer, const Tensor& input);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor apply_relu(const Tensor& x);
Tensor apply_sigmoid(const Tensor& x);

/// Numerically stable softmax over all elements; output sums to 1.
Tensor softmax(const Tensor& x);

/// Dense matrix M with M . flatten(x) = flatten(conv2d(x, kernel, padding))
/// for every x of the given shape. Desk-scale oracle: the matrix is
/// out-size x in-size and mostly zero.
Tensor conv_as_matrix(const Conv2dLayer& layer,
                      const std::vector<std::size_t>& input_shape);

}  // namespace varprop

#endif  // VARPROP_NETWORK_HPP_

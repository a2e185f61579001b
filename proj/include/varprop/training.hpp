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

#ifndef VARPROP_TRAINING_HPP_
#define VARPROP_TRAINING_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "varprop/network.hpp"
#include "varprop/rng.hpp"
#include "varprop/tensor.hpp"

namespace varprop {

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;  // in [0, 1)
  std::uint64_t seed = 0;
};

/// Supervised regression data. When `normalized` is set, inputs/targets are
/// z-scored and the stats allow mapping predictions back: mean' = mean *
/// target_std + target_mean, variance' = variance * target_std^2.
struct Dataset {
  Tensor inputs;   // [n x d]
  Tensor targets;  // [n x k]
  bool normalized = false;
  Tensor input_mean, input_std;    // [d]
  Tensor target_mean, target_std;  // [k]
};

std::size_t dataset_size(const Dataset& data);
Tensor input_row(const Dataset& data, std::size_t i);
Tensor target_row(const Dataset& data, std::size_t i);

/// x ~ U[lo, hi), y = sin(x) + N(0, noise_sigma^2). Per point one uniform
/// draw then one gaussian draw from stream 0 of `seed`.
Dataset make_sine_dataset(std::size_t n, double lo, double hi,
                          double noise_sigma, std::uint64_t seed);

/// Rectangular numeric CSV with a header row. `target_columns` names the
/// target columns (empty: the last column). Errors carry 1-based row and
/// column coordinates.
Dataset load_csv_dataset(const std::string& path,
                         const std::vector<std::string>& target_columns,
                         bool normalize);

/// n_splits independent shuffled (train, validation) partitions.
std::vector<std::pair<Dataset, Dataset>> split_dataset(const Dataset& data,
                                                       double train_fraction,
                                                       std::size_t n_splits,
                                                       std::uint64_t seed);

/// Train-time Bernoulli masks, one tensor per dropout layer in network
/// order, entries 0 or the convention's keep value.
struct DropoutMasks {
  std::vector<Tensor> masks;
};

DropoutMasks sample_dropout_masks(const NetworkSpec& net, RngStream& rng);

/// Per-layer parameter gradients; non-dense layers hold empty tensors.
struct Gradients {
  std::vector<Tensor> weights;
  std::vector<Tensor> bias;
};

/// Mean squared error of the masked stochastic forward pass on one sample:
/// (1/k) sum_k (pred_k - target_k)^2.
double training_loss(const NetworkSpec& net, const Tensor& input,
                     const Tensor& target, const DropoutMasks& masks);

/// Hand-coded reverse pass for dense/relu/dropout stacks; gradients of
/// training_loss with respect to every dense layer's parameters. Fills
/// `loss_out` with the forward loss when non-null.
Gradients backprop(const NetworkSpec& net, const Tensor& input,
                   const Tensor& target, const DropoutMasks& masks,
                   double* loss_out = nullptr);

/// "dense:100,relu,dropout:0.1,dense:1" -> NetworkSpec skeleton. dense:N
/// gives N output units; dropout:P uses the standard convention,
/// dropout:P:inverted the inverted one. Weights start uniform on
/// +-sqrt(1/fan_in), biases at zero, drawn from stream 0 of `seed`.
NetworkSpec make_mlp(const std::string& arch, std::size_t input_dim,
                     std::uint64_t seed);

struct TrainResult {
  NetworkSpec net;
  std::vector<double> epoch_loss;  // mean training MSE per epoch
};

/// Mini-batch SGD with momentum on MSE. Dropout layers sample masks per
/// sample per pass; the skeleton may contain only dense/relu/dropout layers
/// and must end with a dense layer. Deterministic per (seed, data, config).
TrainResult train_mlp(const NetworkSpec& skeleton, const Dataset& data,
                      const TrainConfig& cfg);

}  // namespace varprop

#endif  // VARPROP_TRAINING_HPP_

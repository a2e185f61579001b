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

#include "varprop/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "varprop/errors.hpp"

namespace varprop {

std::size_t dataset_size(const Dataset& data) { return data.inputs.extent(0); }

namespace {

Tensor matrix_row(const Tensor& m, std::size_t i) {
  const std::size_t d = m.extent(1);
  Tensor row({d});
  for (std::size_t j = 0; j < d; ++j) row[j] = m(i, j);
  return row;
}

}  // namespace

Tensor input_row(const Dataset& data, std::size_t i) {
  return matrix_row(data.inputs, i);
}

Tensor target_row(const Dataset& data, std::size_t i) {
  return matrix_row(data.targets, i);
}

Dataset make_sine_dataset(std::size_t n, double lo, double hi,
                          double noise_sigma, std::uint64_t seed) {
  if (!(lo < hi)) {
    throw ConfigError("make_sine_dataset: need lo < hi, got lo=" +
                      std::to_string(lo) + " hi=" + std::to_string(hi));
  }
  if (noise_sigma < 0.0) {
    throw ConfigError("make_sine_dataset: negative noise sigma");
  }
  Dataset data;
  data.inputs = Tensor({n, 1});
  data.targets = Tensor({n, 1});
  RngStream rng(seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * rng.uniform();
    data.inputs(i, 0) = x;
    data.targets(i, 0) = std::sin(x) + noise_sigma * rng.gaussian();
  }
  return data;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? ""
                        : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

void normalize_columns(Tensor& m, Tensor& mean, Tensor& std_dev) {
  const std::size_t n = m.extent(0);
  const std::size_t d = m.extent(1);
  mean = Tensor({d});
  std_dev = Tensor({d});
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += m(i, j);
    mean[j] = acc / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = m(i, j) - mean[j];
      sq += c * c;
    }
    const double var = sq / static_cast<double>(n);
    // Constant columns pass through unscaled instead of dividing by zero.
    std_dev[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      m(i, j) = (m(i, j) - mean[j]) / std_dev[j];
    }
  }
}

}  // namespace

Dataset load_csv_dataset(const std::string& path,
                         const std::vector<std::string>& target_columns,
                         bool normalize) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open dataset file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path + ": empty file");
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty()) {
    throw ParseError(path + ": empty header row");
  }

  std::vector<bool> is_target(header.size(), false);
  if (target_columns.empty()) {
    is_target.back() = true;
  } else {
    for (const std::string& name : target_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw ParseError(path + ": unknown target column \"" + name + "\"");
      }
      is_target[static_cast<std::size_t>(it - header.begin())] = true;
    }
  }
  const std::size_t k =
      static_cast<std::size_t>(std::count(is_target.begin(), is_target.end(),
                                          true));
  if (k == header.size()) {
    throw ParseError(path + ": every column is a target; no features left");
  }

  std::vector<double> input_values;
  std::vector<double> target_values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double value = 0.0;
      std::size_t consumed = 0;
      try {
        value = std::stod(cells[j], &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != cells[j].size() || cells[j].empty()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": column " +
                         std::to_string(j + 1) + " (\"" + header[j] +
                         "\"): non-numeric cell \"" + cells[j] + "\"");
      }
      (is_target[j] ? target_values : input_values).push_back(value);
    }
    ++rows;
  }
  if (rows == 0) {
    throw ParseError(path + ": no data rows");
  }

  Dataset data;
  data.inputs = Tensor({rows, header.size() - k}, std::move(input_values));
  data.targets = Tensor({rows, k}, std::move(target_values));
  if (normalize) {
    data.normalized = true;
    normalize_columns(data.inputs, data.input_mean, data.input_std);
    normalize_columns(data.targets, data.target_mean, data.target_std);
  }
  return data;
}

std::vector<std::pair<Dataset, Dataset>> split_dataset(const Dataset& data,
                                                       double train_fraction,
                                                       std::size_t n_splits,
                                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split_dataset: train fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset_size(data);
  const std::size_t n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(n));
  if (n_train == 0 || n_train == n) {
    throw ConfigError("split_dataset: fraction " +
                      std::to_string(train_fraction) + " of " +
                      std::to_string(n) + " rows leaves an empty partition");
  }

  auto take = [&](const std::vector<std::size_t>& idx, std::size_t lo,
                  std::size_t hi) {
    Dataset part;
    part.normalized = data.normalized;
    part.input_mean = data.input_mean;
    part.input_std = data.input_std;
    part.target_mean = data.target_mean;
    part.target_std = data.target_std;
    part.inputs = Tensor({hi - lo, data.inputs.extent(1)});
    part.targets = Tensor({hi - lo, data.targets.extent(1)});
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < data.inputs.extent(1); ++j) {
        part.inputs(i - lo, j) = data.inputs(idx[i], j);
      }
      for (std::size_t j = 0; j < data.targets.extent(1); ++j) {
        part.targets(i - lo, j) = data.targets(idx[i], j);
      }
    }
    return part;
  };

  std::vector<std::pair<Dataset, Dataset>> splits;
  splits.reserve(n_splits);
  for (std::size_t s = 0; s < n_splits; ++s) {
    RngStream rng(seed, s);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
      std::swap(idx[i], idx[std::min(j, i)]);
    }
    splits.emplace_back(take(idx, 0, n_train), take(idx, n_train, n));
  }
  return splits;
}

namespace {

void require_trainable(const NetworkSpec& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const char* kind = layer_kind(net.layers[i]);
    if (std::string(kind) != "dense" && std::string(kind) != "relu" &&
        std::string(kind) != "dropout") {
      throw ConfigError("train_mlp: layer " + std::to_string(i) + " (" + kind +
                        ") is not trainable; only dense/relu/dropout stacks "
                        "are supported");
    }
  }
  if (net.layers.empty() ||
      !std::holds_alternative<DenseLayer>(net.layers.back())) {
    throw ConfigError("train_mlp: the final layer must be dense (regression)");
  }
}

}  // namespace

DropoutMasks sample_dropout_masks(const NetworkSpec& net, RngStream& rng) {
  const auto shapes = infer_shapes(net);
  DropoutMasks out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto* drop = std::get_if<DropoutLayer>(&net.layers[i]);
    if (drop == nullptr) continue;
    const double keep = drop->convention == DropoutConvention::kStandard
                            ? 1.0
                            : 1.0 / (1.0 - drop->rate);
    Tensor mask(shapes[i]);
    for (std::size_t j = 0; j < mask.size(); ++j) {
      mask[j] = rng.uniform() < drop->rate ? 0.0 : keep;
    }
    out.masks.push_back(std::move(mask));
  }
  return out;
}

namespace {

// Forward pass with fixed masks, recording the input of every layer.
// Returns the per-layer inputs; inputs.back() is the network output.
std::vector<Tensor> masked_forward(const NetworkSpec& net, const Tensor& input,
                                   const DropoutMasks& masks) {
  std::vector<Tensor> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(input);
  std::size_t mask_index = 0;
  for (const LayerSpec& layer : net.layers) {
    if (std::holds_alternative<DropoutLayer>(layer)) {
      if (mask_index >= masks.masks.size()) {
        throw ConfigError("dropout mask count does not match the network");
      }
      acts.push_back(hadamard(acts.back(), masks.masks[mask_index++]));
    } else {
      acts.push_back(apply_layer(layer, acts.back()));
    }
  }
  if (mask_index != masks.masks.size()) {
    throw ConfigError("dropout mask count does not match the network");
  }
  return acts;
}

double mse(const Tensor& pred, const Tensor& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

}  // namespace

double training_loss(const NetworkSpec& net, const Tensor& input,
                     const Tensor& target, const DropoutMasks& masks) {
  require_trainable(net);
  const std::vector<Tensor> acts = masked_forward(net, input, masks);
  return mse(acts.back(), target);
}

Gradients backprop(const NetworkSpec& net, const Tensor& input,
                   const Tensor& target, const DropoutMasks& masks,
                   double* loss_out) {
  require_trainable(net);
  const std::vector<Tensor> acts = masked_forward(net, input, masks);
  const Tensor& pred = acts.back();
  if (pred.size() != target.size()) {
    throw ShapeError("backprop: prediction size " +
                     std::to_string(pred.size()) + " vs target size " +
                     std::to_string(target.size()));
  }
  if (loss_out != nullptr) *loss_out = mse(pred, target);

  Gradients grads;
  grads.weights.resize(net.layers.size());
  grads.bias.resize(net.layers.size());

  // dL/dpred of mean squared error
  Tensor g(pred.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 2.0 * (pred[i] - target[i]) / static_cast<double>(pred.size());
  }

  std::size_t mask_index = masks.masks.size();
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Tensor& x = acts[li];
    if (const auto* dense = std::get_if<DenseLayer>(&net.layers[li])) {
      const std::size_t m = dense->weights.extent(0);
      const std::size_t n = dense->weights.extent(1);
      Tensor dw({m, n});
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dw(i, j) = g[i] * x[j];
      }
      grads.weights[li] = std::move(dw);
      grads.bias[li] = g;
      Tensor gx({n});
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += dense->weights(i, j) * g[i];
        gx[j] = acc;
      }
      g = std::move(gx);
    } else if (std::holds_alternative<ReluLayer>(net.layers[li])) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(x[i] > 0.0)) g[i] = 0.0;
      }
    } else {
      g = hadamard(g, masks.masks[--mask_index]);
    }
  }
  return grads;
}

NetworkSpec make_mlp(const std::string& arch, std::size_t input_dim,
                     std::uint64_t seed) {
  NetworkSpec net;
  net.input_shape = {input_dim};
  RngStream rng(seed, 0);
  std::size_t fan_in = input_dim;
  std::istringstream in(arch);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    if (token == "relu") {
      net.layers.push_back(ReluLayer{});
      continue;
    }
    if (token == "sigmoid") {
      net.layers.push_back(SigmoidLayer{});
      continue;
    }
    if (token.rfind("dense:", 0) == 0) {
      const std::size_t units =
          static_cast<std::size_t>(std::stoul(token.substr(6)));
      if (units == 0) {
        throw ConfigError("make_mlp: dense layer with 0 units");
      }
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      DenseLayer l;
      l.weights = Tensor({units, fan_in});
      l.bias = Tensor({units});
      for (std::size_t i = 0; i < l.weights.size(); ++i) {
        l.weights[i] = bound * (2.0 * rng.uniform() - 1.0);
      }
      net.layers.push_back(std::move(l));
      fan_in = units;
      continue;
    }
    if (token.rfind("dropout:", 0) == 0) {
      std::string rest = token.substr(8);
      DropoutLayer l;
      const auto colon = rest.find(':');
      if (colon != std::string::npos) {
        const std::string conv = rest.substr(colon + 1);
        if (conv == "inverted") {
          l.convention = DropoutConvention::kInverted;
        } else if (conv != "standard") {
          throw ConfigError("make_mlp: unknown dropout convention \"" + conv +
                            "\"");
        }
        rest = rest.substr(0, colon);
      }
      l.rate = std::stod(rest);
      if (!(l.rate >= 0.0 && l.rate < 1.0)) {
        throw ConfigError("make_mlp: dropout rate must lie in [0, 1)");
      }
      net.layers.push_back(l);
      continue;
    }
    throw ConfigError("make_mlp: unknown architecture token \"" + token +
                      "\"");
  }
  if (net.layers.empty()) {
    throw ConfigError("make_mlp: empty architecture");
  }
  infer_shapes(net);
  return net;
}

TrainResult train_mlp(const NetworkSpec& skeleton, const Dataset& data,
                      const TrainConfig& cfg) {
  require_trainable(skeleton);
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("train_mlp: learning rate must be positive");
  }
  if (cfg.batch_size == 0) {
    throw ConfigError("train_mlp: batch size must be at least 1");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("train_mlp: momentum must lie in [0, 1)");
  }
  const std::size_t n = dataset_size(data);
  if (n == 0) {
    throw ConfigError("train_mlp: empty dataset");
  }
  if (shape_size(skeleton.input_shape) != data.inputs.extent(1)) {
    throw ShapeError("train_mlp: network expects " +
                     shape_string(skeleton.input_shape) +
                     " inputs but the dataset has " +
                     std::to_string(data.inputs.extent(1)) + " features");
  }

  TrainResult result;
  result.net = skeleton;
  NetworkSpec& net = result.net;

  Gradients velocity;
  velocity.weights.resize(net.layers.size());
  velocity.bias.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* dense = std::get_if<DenseLayer>(&net.layers[i])) {
      velocity.weights[i] = Tensor(dense->weights.shape());
      velocity.bias[i] = Tensor(dense->bias.shape());
    }
  }

  RngStream rng(cfg.seed, 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      Gradients batch;
      batch.weights.resize(net.layers.size());
      batch.bias.resize(net.layers.size());
      for (std::size_t s = start; s < end; ++s) {
        const DropoutMasks masks = sample_dropout_masks(net, rng);
        double loss = 0.0;
        const Gradients g = backprop(net, input_row(data, order[s]),
                                     target_row(data, order[s]), masks, &loss);
        epoch_loss += loss;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
          if (g.weights[li].size() == 0) continue;
          if (batch.weights[li].size() == 0) {
            batch.weights[li] = g.weights[li];
            batch.bias[li] = g.bias[li];
          } else {
            batch.weights[li] = add(batch.weights[li], g.weights[li]);
            batch.bias[li] = add(batch.bias[li], g.bias[li]);
          }
        }
      }
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto* dense = std::get_if<DenseLayer>(&net.layers[li]);
        if (dense == nullptr) continue;
        Tensor& vw = velocity.weights[li];
        Tensor& vb = velocity.bias[li];
        for (std::size_t i = 0; i < vw.size(); ++i) {
          vw[i] = cfg.momentum * vw[i] -
                  cfg.learning_rate * batch.weights[li][i] * inv_batch;
          dense->weights[i] += vw[i];
        }
        for (std::size_t i = 0; i < vb.size(); ++i) {
          vb[i] = cfg.momentum * vb[i] -
                  cfg.learning_rate * batch.bias[li][i] * inv_batch;
          dense->bias[i] += vb[i];
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

}  // namespace varprop

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

#include "varprop/moments.hpp"

#include <algorithm>
#include <cmath>

#include "varprop/errors.hpp"

namespace varprop {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_noise_match(const MomentState& state, const NoiseSpec& noise) {
  if (noise.mean.size() != state.mean.size() ||
      noise.var.size() != state.mean.size()) {
    throw ShapeError("noise dimension " + std::to_string(noise.mean.size()) +
                     " does not match state dimension " +
                     std::to_string(state.mean.size()));
  }
}

double clamp_variance(double v, ClampStats* clamps) {
  if (v >= 0.0) return v;
  if (clamps != nullptr) clamps->record(v);
  return 0.0;
}

Tensor resymmetrized(const Tensor& cov, ClampStats* clamps) {
  const std::size_t n = cov.extent(0);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    out(i, i) = clamp_variance(cov(i, i), clamps);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (cov(i, j) + cov(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace

void ClampStats::record(double negative_value) {
  ++count;
  max_magnitude = std::max(max_magnitude, -negative_value);
}

void ClampStats::merge(const ClampStats& other) {
  count += other.count;
  max_magnitude = std::max(max_magnitude, other.max_magnitude);
}

NoiseSpec dropout_noise(const DropoutLayer& layer, std::size_t n) {
  NoiseSpec noise;
  noise.mode = NoiseMode::kMultiplicative;
  noise.mean = Tensor({n}, dropout_mean_scale(layer));
  noise.var = Tensor({n}, dropout_mask_variance(layer));
  return noise;
}

MomentState as_full(const MomentState& state) {
  if (state.mode == CovMode::kFull) return state;
  const std::size_t n = state.mean.size();
  MomentState out;
  out.mean = state.mean;
  out.mode = CovMode::kFull;
  out.cov = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i) out.cov(i, i) = state.cov[i];
  return out;
}

Tensor variance_vector(const MomentState& state) {
  if (state.mode == CovMode::kDiagonal) return state.cov;
  const std::size_t n = state.mean.size();
  Tensor v(state.mean.shape());
  for (std::size_t i = 0; i < n; ++i) v[i] = state.cov(i, i);
  return v;
}

MomentState init_noise_moments(const Tensor& activation_mean,
                               const NoiseSpec& noise) {
  const std::size_t n = activation_mean.size();
  if (noise.mean.size() != n || noise.var.size() != n) {
    throw ShapeError("noise dimension " + std::to_string(noise.mean.size()) +
                     " does not match activation dimension " +
                     std::to_string(n));
  }
  MomentState out;
  out.mode = CovMode::kDiagonal;
  out.mean = activation_mean;
  out.cov = Tensor(activation_mean.shape());
  if (noise.mode == NoiseMode::kMultiplicative) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = activation_mean[i];
      out.mean[i] = noise.mean[i] * a;
      out.cov[i] = noise.var[i] * a * a;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out.mean[i] = activation_mean[i] + noise.mean[i];
      out.cov[i] = noise.var[i];
    }
  }
  return out;
}

MomentState propagate_noise_additive(const MomentState& state,
                                     const NoiseSpec& noise) {
  if (noise.mode != NoiseMode::kAdditive) {
    throw ConfigError("propagate_noise_additive requires additive noise");
  }
  require_noise_match(state, noise);
  MomentState out = state;
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.mean[i] += noise.mean[i];
  }
  if (state.mode == CovMode::kFull) {
    for (std::size_t i = 0; i < out.mean.size(); ++i) {
      out.cov(i, i) += noise.var[i];
    }
  } else {
    for (std::size_t i = 0; i < out.mean.size(); ++i) {
      out.cov[i] += noise.var[i];
    }
  }
  return out;
}

MomentState propagate_noise_multiplicative_full(const MomentState& state,
                                                const NoiseSpec& noise) {
  if (noise.mode != NoiseMode::kMultiplicative) {
    throw ConfigError(
        "propagate_noise_multiplicative_full requires multiplicative noise");
  }
  if (state.mode != CovMode::kFull) {
    throw ConfigError(
        "propagate_noise_multiplicative_full requires a Full state; "
        "use the diagonal variant");
  }
  require_noise_match(state, noise);
  const std::size_t n = state.mean.size();
  MomentState out;
  out.mode = CovMode::kFull;
  out.mean = state.mean;
  out.cov = Tensor({n, n});
  // Diagonal entries share their term order with the diagonal-mode rule so
  // the zeroing oracle matches it beyond the stated tolerance.
  for (std::size_t i = 0; i < n; ++i) {
    out.cov(i, i) = state.mean[i] * state.mean[i] * noise.var[i] +
                    noise.mean[i] * noise.mean[i] * state.cov(i, i) +
                    state.cov(i, i) * noise.var[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      out.cov(i, j) = noise.mean[i] * noise.mean[j] * state.cov(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.mean[i] = noise.mean[i] * out.mean[i];
  return out;
}

MomentState propagate_noise_multiplicative_diag(const MomentState& state,
                                                const NoiseSpec& noise) {
  if (noise.mode != NoiseMode::kMultiplicative) {
    throw ConfigError(
        "propagate_noise_multiplicative_diag requires multiplicative noise");
  }
  if (state.mode != CovMode::kDiagonal) {
    throw ConfigError(
        "propagate_noise_multiplicative_diag requires a Diagonal state");
  }
  require_noise_match(state, noise);
  MomentState out = state;
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.cov[i] = state.mean[i] * state.mean[i] * noise.var[i] +
                 noise.mean[i] * noise.mean[i] * state.cov[i] +
                 state.cov[i] * noise.var[i];
    out.mean[i] = noise.mean[i] * state.mean[i];
  }
  return out;
}

MomentState propagate_affine_full(const MomentState& state,
                                  const Tensor& weights, const Tensor& bias,
                                  ClampStats* clamps) {
  if (state.mode != CovMode::kFull) {
    throw ConfigError("propagate_affine_full requires a Full state");
  }
  MomentState out;
  out.mode = CovMode::kFull;
  out.mean = add(matvec(weights, state.mean), bias);
  out.cov =
      resymmetrized(matmul(matmul(weights, state.cov), transposed(weights)),
                    clamps);
  return out;
}

MomentState propagate_affine_diag(const MomentState& state,
                                  const Tensor& weights, const Tensor& bias) {
  if (state.mode != CovMode::kDiagonal) {
    throw ConfigError("propagate_affine_diag requires a Diagonal state");
  }
  if (weights.rank() != 2 || weights.extent(1) != state.mean.size()) {
    throw ShapeError("affine weights " + shape_string(weights.shape()) +
                     " do not match state dimension " +
                     std::to_string(state.mean.size()));
  }
  const std::size_t m = weights.extent(0);
  const std::size_t n = weights.extent(1);
  MomentState out;
  out.mode = CovMode::kDiagonal;
  out.mean = add(matvec(weights, state.mean), bias);
  out.cov = Tensor({m});
  // (w * v) * w mirrors the product order of W diag(V) W^T so the zeroing
  // oracle reproduces these values exactly.
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += weights(i, j) * state.cov[j] * weights(i, j);
    }
    out.cov[i] = acc;
  }
  return out;
}

MomentState propagate_conv_diag(const MomentState& state,
                                const Conv2dLayer& layer) {
  if (state.mode != CovMode::kDiagonal) {
    throw ConfigError("propagate_conv_diag requires a Diagonal state");
  }
  MomentState out;
  out.mode = CovMode::kDiagonal;
  out.mean = conv2d(state.mean, layer.kernel, layer.padding);
  out.cov =
      conv2d(state.cov, hadamard(layer.kernel, layer.kernel), layer.padding);
  return out;
}

Tensor activation_jacobian(ActivationKind kind, const Tensor& mean) {
  const std::size_t n = mean.size();
  Tensor j({n, n});
  switch (kind) {
    case ActivationKind::kRelu:
      for (std::size_t i = 0; i < n; ++i) {
        j(i, i) = mean[i] > 0.0 ? 1.0 : 0.0;
      }
      return j;
    case ActivationKind::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        const double s = sigmoid(mean[i]);
        j(i, i) = s * (1.0 - s);
      }
      return j;
    case ActivationKind::kSoftmax: {
      const Tensor s = softmax(mean.flattened());
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          j(i, k) = s[i] * ((i == k ? 1.0 : 0.0) - s[k]);
        }
      }
      return j;
    }
  }
  throw ConfigError("unknown activation kind");
}

namespace {

Tensor apply_activation_mean(ActivationKind kind, const Tensor& mean) {
  switch (kind) {
    case ActivationKind::kRelu:
      return apply_relu(mean);
    case ActivationKind::kSigmoid:
      return apply_sigmoid(mean);
    case ActivationKind::kSoftmax:
      return softmax(mean.flattened()).reshaped(mean.shape());
  }
  throw ConfigError("unknown activation kind");
}

}  // namespace

MomentState propagate_activation_full(const MomentState& state,
                                      ActivationKind kind,
                                      ClampStats* clamps) {
  if (state.mode != CovMode::kFull) {
    throw ConfigError("propagate_activation_full requires a Full state");
  }
  const Tensor j = activation_jacobian(kind, state.mean);
  MomentState out;
  out.mode = CovMode::kFull;
  out.mean = apply_activation_mean(kind, state.mean);
  out.cov = resymmetrized(matmul(matmul(j, state.cov), transposed(j)), clamps);
  return out;
}

MomentState propagate_activation_diag(const MomentState& state,
                                      ActivationKind kind, ReluRule relu_rule,
                                      ClampStats* clamps) {
  if (state.mode != CovMode::kDiagonal) {
    throw ConfigError("propagate_activation_diag requires a Diagonal state");
  }
  if (kind == ActivationKind::kSoftmax) {
    throw ConfigError(
        "softmax is unsupported in diagonal mode (dense Jacobian); run full "
        "mode or stop before softmax");
  }
  const std::size_t n = state.mean.size();
  MomentState out;
  out.mode = CovMode::kDiagonal;
  if (kind == ActivationKind::kRelu && relu_rule == ReluRule::kExactGaussian) {
    out.mean = state.mean;
    out.cov = state.cov;
    for (std::size_t i = 0; i < n; ++i) {
      const ReluMoments m =
          relu_gaussian_moments(state.mean[i], state.cov[i], clamps);
      out.mean[i] = m.mean;
      out.cov[i] = m.var;
    }
    return out;
  }
  out.mean = apply_activation_mean(kind, state.mean);
  out.cov = state.cov;
  // (d * v) * d, matching J diag(V) J^T of the full-mode rule term by term.
  for (std::size_t i = 0; i < n; ++i) {
    double d;
    if (kind == ActivationKind::kRelu) {
      d = state.mean[i] > 0.0 ? 1.0 : 0.0;
    } else {
      const double s = sigmoid(state.mean[i]);
      d = s * (1.0 - s);
    }
    out.cov[i] = d * state.cov[i] * d;
  }
  return out;
}

ReluMoments relu_gaussian_moments(double mu, double var, ClampStats* clamps) {
  if (var < 0.0) {
    throw NumericError("relu_gaussian_moments: negative variance " +
                       std::to_string(var));
  }
  if (var == 0.0) {
    return {std::max(mu, 0.0), 0.0};
  }
  const double sigma = std::sqrt(var);
  const double t = mu / sigma;
  const double cdf = 0.5 * (1.0 + erf(t * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * t * t);
  ReluMoments out;
  out.mean = mu * cdf + sigma * pdf;
  const double second = (var + mu * mu) * cdf + mu * sigma * pdf;
  out.var = clamp_variance(second - out.mean * out.mean, clamps);
  return out;
}

namespace {

// Mode-specific dispatch for layers after the first dropout layer.
MomentState propagate_layer(const MomentState& state, const LayerSpec& layer,
                            const std::vector<std::size_t>& in_shape,
                            CovMode mode, ReluRule relu_rule,
                            ClampStats* clamps) {
  if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
    return mode == CovMode::kFull
               ? propagate_affine_full(state, dense->weights, dense->bias,
                                       clamps)
               : propagate_affine_diag(state, dense->weights, dense->bias);
  }
  if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
    if (mode == CovMode::kDiagonal) return propagate_conv_diag(state, *conv);
    const Tensor m = conv_as_matrix(*conv, in_shape);
    const Tensor zero_bias({m.extent(0)});
    return propagate_affine_full(state, m, zero_bias, clamps);
  }
  if (std::holds_alternative<ReluLayer>(layer)) {
    return mode == CovMode::kFull
               ? propagate_activation_full(state, ActivationKind::kRelu,
                                           clamps)
               : propagate_activation_diag(state, ActivationKind::kRelu,
                                           relu_rule, clamps);
  }
  if (std::holds_alternative<SigmoidLayer>(layer)) {
    return mode == CovMode::kFull
               ? propagate_activation_full(state, ActivationKind::kSigmoid,
                                           clamps)
               : propagate_activation_diag(state, ActivationKind::kSigmoid,
                                           relu_rule, clamps);
  }
  if (std::holds_alternative<SoftmaxLayer>(layer)) {
    return mode == CovMode::kFull
               ? propagate_activation_full(state, ActivationKind::kSoftmax,
                                           clamps)
               : propagate_activation_diag(state, ActivationKind::kSoftmax,
                                           relu_rule, clamps);
  }
  const auto& drop = std::get<DropoutLayer>(layer);
  const NoiseSpec noise = dropout_noise(drop, state.mean.size());
  return mode == CovMode::kFull
             ? propagate_noise_multiplicative_full(state, noise)
             : propagate_noise_multiplicative_diag(state, noise);
}

}  // namespace

PropagationResult propagate_network(const NetworkSpec& net,
                                    const Tensor& input, CovMode mode,
                                    ReluRule relu_rule) {
  if (mode == CovMode::kFull && relu_rule == ReluRule::kExactGaussian) {
    throw ConfigError(
        "the exact-gaussian relu rule is a diagonal-mode rule; full mode "
        "propagates covariance through the relu Jacobian");
  }
  const auto shapes = infer_shapes(net);
  if (input.shape() != net.input_shape) {
    throw ShapeError("propagate_network: input shape " +
                     shape_string(input.shape()) +
                     " does not match network input " +
                     shape_string(net.input_shape));
  }
  const int first_noise = first_dropout_index(net);
  if (first_noise < 0) {
    throw ConfigError(
        "propagate_network: the network has no dropout layer; nothing "
        "injects uncertainty");
  }

  PropagationResult result;
  Tensor mean = input;
  for (int i = 0; i < first_noise; ++i) {
    mean = apply_layer(net.layers[static_cast<std::size_t>(i)], mean);
  }
  const auto& first_drop =
      std::get<DropoutLayer>(net.layers[static_cast<std::size_t>(first_noise)]);
  MomentState state =
      init_noise_moments(mean, dropout_noise(first_drop, mean.size()));
  if (mode == CovMode::kFull) state = as_full(state);

  for (std::size_t i = static_cast<std::size_t>(first_noise) + 1;
       i < net.layers.size(); ++i) {
    state = propagate_layer(state, net.layers[i], shapes[i], mode, relu_rule,
                            &result.clamps);
    state.mean = state.mean.reshaped(shapes[i + 1]);
    if (state.mode == CovMode::kDiagonal) {
      state.cov = state.cov.reshaped(shapes[i + 1]);
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace varprop

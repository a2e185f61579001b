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

#ifndef VARPROP_MOMENTS_HPP_
#define VARPROP_MOMENTS_HPP_

#include <cstddef>

#include "varprop/network.hpp"
#include "varprop/tensor.hpp"

namespace varprop {

enum class CovMode { kFull, kDiagonal };

/// How ReLU transforms a Diagonal state: first-order linearization at the
/// mean, or the closed-form moments of max(0, X) under a Gaussian X.
enum class ReluRule { kTaylor, kExactGaussian };

enum class NoiseMode { kAdditive, kMultiplicative };

enum class ActivationKind { kRelu, kSigmoid, kSoftmax };

/// Per-element independent noise source.
struct NoiseSpec {
  NoiseMode mode = NoiseMode::kMultiplicative;
  Tensor mean;  // E[Z]
  Tensor var;   // Var[Z], entries >= 0
};

/// Multiplicative Bernoulli-mask noise of a dropout layer, broadcast to
/// n elements. Standard: E[Z]=1-p, Var[Z]=p(1-p); inverted: E[Z]=1,
/// Var[Z]=p/(1-p).
NoiseSpec dropout_noise(const DropoutLayer& layer, std::size_t n);

/// Mean plus covariance of a (flattened) activation vector. `mean` keeps
/// the activation's natural shape; covariance indexes its row-major
/// flattening. kFull: cov is [n x n]; kDiagonal: cov holds per-element
/// variances, same shape as mean.
struct MomentState {
  Tensor mean;
  CovMode mode = CovMode::kDiagonal;
  Tensor cov;
};

/// Negative-variance clamps applied during propagation. Magnitudes above
/// ~1e-9 indicate genuine cancellation trouble and are surfaced in reports.
struct ClampStats {
  std::size_t count = 0;
  double max_magnitude = 0.0;

  void record(double negative_value);
  void merge(const ClampStats& other);
};

/// Diagonal state -> Full with diag(cov); Full passes through.
MomentState as_full(const MomentState& state);

/// Per-element variances of either representation, shaped like mean.
Tensor variance_vector(const MomentState& state);

/// State at the first noise layer, assuming zero incoming variance.
/// Multiplicative: mean' = E[Z] o mean, var = Var[Z] o mean^2.
/// Additive: mean' = mean + E[Z], var = Var[Z]. Result is Diagonal.
MomentState init_noise_moments(const Tensor& activation_mean,
                               const NoiseSpec& noise);

/// mean += E[Z]; Full: cov += diag(Var[Z]); Diagonal: var += Var[Z].
MomentState propagate_noise_additive(const MomentState& state,
                                     const NoiseSpec& noise);

/// S' = S_Z o S + E[Z]E[Z]^T o S + E[X]E[X]^T o S_Z with S_Z = diag(Var[Z]);
/// mean' = E[Z] o mean.
MomentState propagate_noise_multiplicative_full(const MomentState& state,
                                                const NoiseSpec& noise);

/// V' = E[X]^2 o V[Z] + E[Z]^2 o V[X] + V[X] o V[Z]; mean' = E[Z] o mean.
MomentState propagate_noise_multiplicative_diag(const MomentState& state,
                                                const NoiseSpec& noise);

/// S' = W S W^T re-symmetrized; mean' = W mean + bias. Exact for affine maps.
MomentState propagate_affine_full(const MomentState& state,
                                  const Tensor& weights, const Tensor& bias,
                                  ClampStats* clamps = nullptr);

/// V' = (W o W) V; mean' = W mean + bias.
MomentState propagate_affine_diag(const MomentState& state,
                                  const Tensor& weights, const Tensor& bias);

/// V' = conv2d(V, K o K); mean' = conv2d(mean, K).
MomentState propagate_conv_diag(const MomentState& state,
                                const Conv2dLayer& layer);

/// Jacobian at `mean` as an n x n matrix. ReLU and sigmoid are diagonal
/// (ReLU derivative at 0 is defined as 0); softmax is dense with
/// J_ij = S_i (delta_ij - S_j), rows summing to zero.
Tensor activation_jacobian(ActivationKind kind, const Tensor& mean);

/// S' = J S J^T at the current mean; mean' = activation(mean).
MomentState propagate_activation_full(const MomentState& state,
                                      ActivationKind kind,
                                      ClampStats* clamps = nullptr);

/// Taylor: V' = diag(J)^2 o V, mean' = activation(mean). Exact-Gaussian
/// (ReLU only) replaces both moments per element. Softmax is rejected:
/// its Jacobian is dense and a diagonalized variant would be silently wrong.
MomentState propagate_activation_diag(const MomentState& state,
                                      ActivationKind kind, ReluRule relu_rule,
                                      ClampStats* clamps = nullptr);

struct ReluMoments {
  double mean = 0.0;
  double var = 0.0;
};

/// Closed-form moments of max(0, X) for X ~ N(mu, var). With t = mu/sigma:
/// E = mu Phi(t) + sigma phi(t); E[max(0,X)^2] = (var + mu^2) Phi(t) +
/// mu sigma phi(t); Var = E[max^2] - E^2, clamped at 0. var = 0 returns
/// (max(0, mu), 0).
ReluMoments relu_gaussian_moments(double mu, double var,
                                  ClampStats* clamps = nullptr);

struct PropagationResult {
  MomentState state;
  ClampStats clamps;
};

/// Run the analytic pipeline over a whole network: deterministic means up
/// to the first dropout layer, init_noise_moments there, then per-layer
/// dispatch (later dropout layers use the multiplicative rules). In kFull
/// mode conv layers go through conv_as_matrix; kExactGaussian is a
/// Diagonal-mode rule and is rejected in kFull mode.
PropagationResult propagate_network(const NetworkSpec& net,
                                    const Tensor& input, CovMode mode,
                                    ReluRule relu_rule = ReluRule::kTaylor);

}  // namespace varprop

#endif  // VARPROP_MOMENTS_HPP_

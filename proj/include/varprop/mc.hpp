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

#ifndef VARPROP_MC_HPP_
#define VARPROP_MC_HPP_

#include <cstdint>
#include <vector>

#include "varprop/moments.hpp"
#include "varprop/network.hpp"
#include "varprop/rng.hpp"
#include "varprop/tensor.hpp"

namespace varprop {

/// Empirical moments over stochastic forward passes. Sample t always draws
/// from stream t of the seed, so results do not depend on how samples are
/// distributed over workers.
struct McEstimate {
  Tensor mean;
  CovMode mode = CovMode::kDiagonal;
  Tensor cov;  // unbiased, denominator T-1
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
};

/// Deterministic activation entering the first dropout layer, computed once
/// per input and shared by every sample. When the network has no dropout
/// layer the cache covers the whole network.
struct PrefixCache {
  Tensor prefix_activation;
  std::size_t start = 0;  // first stochastic layer index
};

PrefixCache make_prefix_cache(const NetworkSpec& net, const Tensor& input);

/// One stochastic forward pass: every dropout layer draws a fresh Bernoulli
/// mask from `rng` (element order, one uniform draw each), scaled per the
/// layer's convention.
Tensor sample_forward(const NetworkSpec& net, const Tensor& input,
                      RngStream& rng);

/// sample_forward resuming from the cached prefix; bit-identical to the
/// uncached call with the same rng.
Tensor sample_forward_cached(const NetworkSpec& net, const PrefixCache& cache,
                             RngStream& rng);

/// [T x n] matrix of flattened outputs; row t comes from
/// RngStream(seed, stream_offset + t). workers = 0 picks a hardware default;
/// the values never depend on the worker count.
Tensor sample_outputs(const NetworkSpec& net, const Tensor& input,
                      std::size_t samples, std::uint64_t seed,
                      std::size_t workers = 0,
                      std::uint64_t stream_offset = 0);

/// Sample mean and covariance of T >= 2 stochastic forward passes.
/// Aggregation is two-pass (centered) with fixed-shape pairwise reduction,
/// so results are bit-reproducible for a fixed seed across runs and across
/// worker counts.
McEstimate empirical_moments(const NetworkSpec& net, const Tensor& input,
                             std::size_t samples, std::uint64_t seed,
                             CovMode form, std::size_t workers = 0,
                             std::uint64_t stream_offset = 0);

struct ConvergencePoint {
  std::size_t samples = 0;
  double relative_abs_diff = 0.0;
};

struct ConvergenceCurve {
  std::vector<ConvergencePoint> points;
  // Output elements skipped because the reference variance is zero there.
  std::size_t excluded_elements = 0;
};

/// Mean over output elements of |MC variance - reference variance| /
/// reference variance, for each sample count. Sample t is identical across
/// the listed counts (shared streams), so the series decreases in trend.
ConvergenceCurve convergence_curve(const NetworkSpec& net, const Tensor& input,
                                   const std::vector<std::size_t>& sample_counts,
                                   const MomentState& reference,
                                   std::uint64_t seed,
                                   std::size_t workers = 0);

}  // namespace varprop

#endif  // VARPROP_MC_HPP_

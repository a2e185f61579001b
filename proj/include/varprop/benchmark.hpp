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

#ifndef VARPROP_BENCHMARK_HPP_
#define VARPROP_BENCHMARK_HPP_

#include <functional>
#include <vector>

#include "varprop/metrics.hpp"
#include "varprop/network.hpp"
#include "varprop/tensor.hpp"

namespace varprop {

/// Median wall-clock seconds per call over `repeats` measurements on a
/// monotonic clock, one warm-up excluded. Sub-millisecond functions are
/// batched until a measurement covers at least a few milliseconds.
double time_median(const std::function<void()>& fn, std::size_t repeats);

struct BenchmarkResult {
  double forward_cached_seconds = 0.0;  // full forward pass, model resident
  double analytic_diag_seconds = 0.0;
  double analytic_full_seconds = 0.0;
  std::vector<std::pair<std::size_t, double>> mc_seconds;  // (T, seconds)
  LinearFit mc_fit;  // seconds vs T
  std::size_t repeats = 0;
};

/// Times the analytic propagation modes against prefix-cached MC sampling
/// for each sample count. The analytic numbers do not depend on T; the MC
/// series is fitted with a line whose R^2 quantifies the linear growth.
BenchmarkResult run_benchmark(const NetworkSpec& net, const Tensor& input,
                              const std::vector<std::size_t>& sample_counts,
                              std::size_t repeats);

}  // namespace varprop

#endif  // VARPROP_BENCHMARK_HPP_

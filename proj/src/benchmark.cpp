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

#include "varprop/benchmark.hpp"

#include <algorithm>
#include <chrono>

#include "varprop/errors.hpp"
#include "varprop/mc.hpp"
#include "varprop/moments.hpp"

namespace varprop {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

double time_median(const std::function<void()>& fn, std::size_t repeats) {
  if (repeats < 3) {
    throw ConfigError("time_median: need at least 3 repeats");
  }
  // Warm-up doubles as the batch-size probe.
  Clock::time_point probe_start = Clock::now();
  fn();
  const double probe = elapsed_seconds(probe_start);
  std::size_t batch = 1;
  if (probe < 5e-3) {
    batch = static_cast<std::size_t>(5e-3 / std::max(probe, 1e-9)) + 1;
  }

  std::vector<double> times(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    const Clock::time_point start = Clock::now();
    for (std::size_t b = 0; b < batch; ++b) fn();
    times[r] = elapsed_seconds(start) / static_cast<double>(batch);
  }
  std::sort(times.begin(), times.end());
  return times[repeats / 2];
}

BenchmarkResult run_benchmark(const NetworkSpec& net, const Tensor& input,
                              const std::vector<std::size_t>& sample_counts,
                              std::size_t repeats) {
  if (sample_counts.empty()) {
    throw ConfigError("run_benchmark: no sample counts given");
  }
  BenchmarkResult result;
  result.repeats = repeats;

  // Full forward pass with the model resident. This is the baseline the
  // analytic modes are compared against; the per-sample suffix replay below
  // the MC loop can be arbitrarily cheap when the first dropout layer sits
  // late in the stack, which would make the ratio meaningless.
  result.forward_cached_seconds = time_median(
      [&] {
        Tensor x = input;
        for (const LayerSpec& layer : net.layers) {
          x = apply_layer(layer, x);
        }
      },
      repeats);

  result.analytic_diag_seconds = time_median(
      [&] { propagate_network(net, input, CovMode::kDiagonal); }, repeats);
  result.analytic_full_seconds = time_median(
      [&] { propagate_network(net, input, CovMode::kFull); }, repeats);

  std::vector<double> xs, ys;
  for (std::size_t t : sample_counts) {
    const double seconds = time_median(
        [&] {
          if (t >= 2) {
            empirical_moments(net, input, t, 42, CovMode::kDiagonal, 1);
          } else {
            sample_outputs(net, input, t, 42, 1);
          }
        },
        repeats);
    result.mc_seconds.emplace_back(t, seconds);
    xs.push_back(static_cast<double>(t));
    ys.push_back(seconds);
  }
  if (sample_counts.size() >= 2) {
    result.mc_fit = fit_line(xs, ys);
  }
  return result;
}

}  // namespace varprop

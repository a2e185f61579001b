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

#include "varprop/mc.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "varprop/errors.hpp"

namespace varprop {

namespace {

// Samples are accumulated per block of 4096 in sample order, then block
// partials are combined with a fixed-shape pairwise tree. Worker count only
// decides which thread fills which block.
constexpr std::size_t kBlock = 4096;

std::size_t resolve_workers(std::size_t workers) {
  if (workers != 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return std::min<std::size_t>(hw == 0 ? 1 : hw, 8);
}

// partials[lo, hi) summed pairwise into partials[lo].
void pairwise_reduce(std::vector<std::vector<double>>& partials,
                     std::size_t lo, std::size_t hi) {
  if (hi - lo <= 1) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  pairwise_reduce(partials, lo, mid);
  pairwise_reduce(partials, mid, hi);
  for (std::size_t i = 0; i < partials[lo].size(); ++i) {
    partials[lo][i] += partials[mid][i];
  }
}

Tensor dropout_mask_pass(const NetworkSpec& net, Tensor x, std::size_t start,
                         RngStream& rng) {
  for (std::size_t i = start; i < net.layers.size(); ++i) {
    if (const auto* drop = std::get_if<DropoutLayer>(&net.layers[i])) {
      const double keep_value =
          drop->convention == DropoutConvention::kStandard
              ? 1.0
              : 1.0 / (1.0 - drop->rate);
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = rng.uniform() < drop->rate ? 0.0 : x[k] * keep_value;
      }
    } else {
      x = apply_layer(net.layers[i], x);
    }
  }
  return x;
}

}  // namespace

PrefixCache make_prefix_cache(const NetworkSpec& net, const Tensor& input) {
  if (input.shape() != net.input_shape) {
    throw ShapeError("prefix cache: input shape " +
                     shape_string(input.shape()) +
                     " does not match network input " +
                     shape_string(net.input_shape));
  }
  PrefixCache cache;
  const int first_noise = first_dropout_index(net);
  cache.start = first_noise < 0 ? net.layers.size()
                                : static_cast<std::size_t>(first_noise);
  cache.prefix_activation = input;
  for (std::size_t i = 0; i < cache.start; ++i) {
    cache.prefix_activation =
        apply_layer(net.layers[i], cache.prefix_activation);
  }
  return cache;
}

Tensor sample_forward(const NetworkSpec& net, const Tensor& input,
                      RngStream& rng) {
  if (input.shape() != net.input_shape) {
    throw ShapeError("sample_forward: input shape " +
                     shape_string(input.shape()) +
                     " does not match network input " +
                     shape_string(net.input_shape));
  }
  return dropout_mask_pass(net, input, 0, rng);
}

Tensor sample_forward_cached(const NetworkSpec& net, const PrefixCache& cache,
                             RngStream& rng) {
  return dropout_mask_pass(net, cache.prefix_activation, cache.start, rng);
}

Tensor sample_outputs(const NetworkSpec& net, const Tensor& input,
                      std::size_t samples, std::uint64_t seed,
                      std::size_t workers, std::uint64_t stream_offset) {
  if (samples == 0) {
    throw ConfigError("sample_outputs: need at least one sample");
  }
  // Validates the layer stack up front so worker threads cannot throw.
  const std::size_t n = shape_size(infer_shapes(net).back());
  const PrefixCache cache = make_prefix_cache(net, input);
  Tensor out({samples, n});

  const std::size_t n_blocks = (samples + kBlock - 1) / kBlock;
  const std::size_t n_workers = std::min(resolve_workers(workers), n_blocks);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_blocks = [&](std::size_t worker) {
    try {
      for (std::size_t b = worker; b < n_blocks; b += n_workers) {
        const std::size_t t_end = std::min(samples, (b + 1) * kBlock);
        for (std::size_t t = b * kBlock; t < t_end; ++t) {
          RngStream rng(seed, stream_offset + t);
          const Tensor y = sample_forward_cached(net, cache, rng);
          std::copy(y.values().begin(), y.values().end(),
                    out.values().begin() + t * n);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (n_workers <= 1) {
    run_blocks(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      threads.emplace_back(run_blocks, w);
    }
    for (std::thread& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

McEstimate empirical_moments(const NetworkSpec& net, const Tensor& input,
                             std::size_t samples, std::uint64_t seed,
                             CovMode form, std::size_t workers,
                             std::uint64_t stream_offset) {
  if (samples < 2) {
    throw ConfigError(
        "empirical_moments: covariance needs at least 2 samples (unbiased "
        "estimator divides by T-1)");
  }
  const Tensor outputs =
      sample_outputs(net, input, samples, seed, workers, stream_offset);
  const std::size_t n = outputs.extent(1);
  const std::size_t n_blocks = (samples + kBlock - 1) / kBlock;

  std::vector<std::vector<double>> partials(n_blocks,
                                            std::vector<double>(n, 0.0));
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t t_end = std::min(samples, (b + 1) * kBlock);
    for (std::size_t t = b * kBlock; t < t_end; ++t) {
      for (std::size_t i = 0; i < n; ++i) partials[b][i] += outputs(t, i);
    }
  }
  pairwise_reduce(partials, 0, n_blocks);

  McEstimate est;
  est.sample_count = samples;
  est.seed = seed;
  est.mode = form;
  est.mean = Tensor({n});
  for (std::size_t i = 0; i < n; ++i) {
    est.mean[i] = partials[0][i] / static_cast<double>(samples);
  }

  const std::size_t cov_len = form == CovMode::kFull ? n * n : n;
  std::vector<std::vector<double>> cov_partials(
      n_blocks, std::vector<double>(cov_len, 0.0));
  std::vector<double> centered(n);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t t_end = std::min(samples, (b + 1) * kBlock);
    for (std::size_t t = b * kBlock; t < t_end; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        centered[i] = outputs(t, i) - est.mean[i];
      }
      if (form == CovMode::kFull) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            cov_partials[b][i * n + j] += centered[i] * centered[j];
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          cov_partials[b][i] += centered[i] * centered[i];
        }
      }
    }
  }
  pairwise_reduce(cov_partials, 0, n_blocks);

  const double denom = static_cast<double>(samples - 1);
  if (form == CovMode::kFull) {
    est.cov = Tensor({n, n});
  } else {
    est.cov = Tensor({n});
  }
  for (std::size_t i = 0; i < cov_len; ++i) {
    est.cov[i] = cov_partials[0][i] / denom;
  }
  return est;
}

ConvergenceCurve convergence_curve(
    const NetworkSpec& net, const Tensor& input,
    const std::vector<std::size_t>& sample_counts, const MomentState& reference,
    std::uint64_t seed, std::size_t workers) {
  const Tensor ref_var = variance_vector(reference);
  ConvergenceCurve curve;
  for (std::size_t i = 0; i < ref_var.size(); ++i) {
    if (ref_var[i] == 0.0) ++curve.excluded_elements;
  }
  if (curve.excluded_elements == ref_var.size()) {
    throw ConfigError(
        "convergence_curve: the reference variance is zero everywhere");
  }
  for (std::size_t samples : sample_counts) {
    const McEstimate est = empirical_moments(net, input, samples, seed,
                                             CovMode::kDiagonal, workers);
    if (est.cov.size() != ref_var.size()) {
      throw ShapeError("convergence_curve: reference dimension " +
                       std::to_string(ref_var.size()) +
                       " does not match network output " +
                       std::to_string(est.cov.size()));
    }
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < ref_var.size(); ++i) {
      if (ref_var[i] == 0.0) continue;
      total += std::abs(est.cov[i] - ref_var[i]) / ref_var[i];
      ++used;
    }
    curve.points.push_back({samples, total / static_cast<double>(used)});
  }
  return curve;
}

}  // namespace varprop

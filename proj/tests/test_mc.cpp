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

#include <cmath>

#include <doctest.h>

#include "testing/oracles.hpp"
#include "varprop/errors.hpp"
#include "varprop/mc.hpp"
#include "varprop/moments.hpp"
#include "varprop/network.hpp"
#include "varprop/rng.hpp"

using namespace varprop;
using namespace varprop::testing;

namespace {

NetworkSpec affine_after_dropout(std::uint64_t seed) {
  RngStream rng(seed, 0);
  NetworkSpec net;
  net.input_shape = {3};
  DenseLayer pre;
  pre.weights = random_tensor({4, 3}, rng);
  pre.bias = random_tensor({4}, rng);
  net.layers.emplace_back(std::move(pre));
  net.layers.emplace_back(ReluLayer{});
  net.layers.emplace_back(DropoutLayer{0.3, DropoutConvention::kStandard});
  DenseLayer post;
  post.weights = random_tensor({2, 4}, rng);
  post.bias = random_tensor({2}, rng);
  net.layers.emplace_back(std::move(post));
  return net;
}

}  // namespace

TEST_CASE("counter rng streams are stable and independent") {
  RngStream a(123, 0);
  RngStream b(123, 0);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(123, 1);
  bool any_diff = false;
  RngStream a2(123, 0);
  for (int i = 0; i < 100; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  CHECK(any_diff);

  RngStream u(7, 0);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(std::isfinite(u.gaussian()));
  }
}

TEST_CASE("sample_forward with zero dropout equals forward") {
  RngStream net_rng(71, 0);
  NetworkSpec net;
  net.input_shape = {3};
  DenseLayer dense;
  dense.weights = random_tensor({2, 3}, net_rng);
  dense.bias = random_tensor({2}, net_rng);
  net.layers.emplace_back(std::move(dense));
  net.layers.emplace_back(DropoutLayer{0.0, DropoutConvention::kStandard});
  net.layers.emplace_back(ReluLayer{});

  const Tensor x = random_tensor({3}, net_rng);
  RngStream draw(1, 0);
  CHECK(max_abs_diff(sample_forward(net, x, draw), forward(net, x)) == 0.0);
}

TEST_CASE("near-total dropout silences the suffix almost always") {
  RngStream net_rng(73, 0);
  NetworkSpec net;
  net.input_shape = {4};
  net.layers.emplace_back(DropoutLayer{0.999, DropoutConvention::kStandard});
  DenseLayer dense;
  dense.weights = random_tensor({1, 4}, net_rng);
  dense.bias = Tensor({1}, {0.25});
  net.layers.emplace_back(std::move(dense));

  const Tensor x = random_tensor({4}, net_rng, 0.5, 1.5);
  int silent = 0;
  for (int t = 0; t < 100; ++t) {
    RngStream draw(99, static_cast<std::uint64_t>(t));
    const Tensor y = sample_forward(net, x, draw);
    if (y[0] == 0.25) ++silent;
  }
  CHECK(silent >= 90);
}

TEST_CASE("cached sampling equals uncached sampling") {
  const NetworkSpec net = affine_after_dropout(5);
  RngStream rng(2, 0);
  const Tensor x = random_tensor({3}, rng);
  const PrefixCache cache = make_prefix_cache(net, x);
  for (int t = 0; t < 20; ++t) {
    RngStream d1(17, static_cast<std::uint64_t>(t));
    RngStream d2(17, static_cast<std::uint64_t>(t));
    CHECK(max_abs_diff(sample_forward(net, x, d1),
                       sample_forward_cached(net, cache, d2)) == 0.0);
  }
}

TEST_CASE("sample streams are indexed by sample, not worker") {
  const NetworkSpec net = affine_after_dropout(6);
  RngStream rng(3, 0);
  const Tensor x = random_tensor({3}, rng);

  const Tensor small = sample_outputs(net, x, 50, 11, 1);
  const Tensor large = sample_outputs(net, x, 100, 11, 1);
  // The first 50 rows of the larger run reproduce the smaller run.
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small[i] == large[i]);
  }
}

TEST_CASE("worker count never changes the estimate") {
  const NetworkSpec net = affine_after_dropout(7);
  RngStream rng(4, 0);
  const Tensor x = random_tensor({3}, rng);

  const McEstimate one = empirical_moments(net, x, 9001, 13, CovMode::kFull, 1);
  const McEstimate two = empirical_moments(net, x, 9001, 13, CovMode::kFull, 2);
  const McEstimate four =
      empirical_moments(net, x, 9001, 13, CovMode::kFull, 4);
  CHECK(max_abs_diff(one.mean, two.mean) == 0.0);
  CHECK(max_abs_diff(one.cov, two.cov) == 0.0);
  CHECK(max_abs_diff(one.mean, four.mean) == 0.0);
  CHECK(max_abs_diff(one.cov, four.cov) == 0.0);

  const McEstimate again =
      empirical_moments(net, x, 9001, 13, CovMode::kFull, 4);
  CHECK(max_abs_diff(four.cov, again.cov) == 0.0);

  const McEstimate other_seed =
      empirical_moments(net, x, 9001, 14, CovMode::kFull, 1);
  CHECK(max_abs_diff(one.cov, other_seed.cov) > 0.0);
}

TEST_CASE("empirical covariance is symmetric PSD-diagonal and unbiased") {
  const NetworkSpec net = affine_after_dropout(8);
  RngStream rng(5, 0);
  const Tensor x = random_tensor({3}, rng);

  const McEstimate est =
      empirical_moments(net, x, 200000, 21, CovMode::kFull, 0);
  CHECK(max_abs_diff(est.cov, transposed(est.cov)) == 0.0);
  for (std::size_t i = 0; i < est.mean.size(); ++i) {
    CHECK(est.cov(i, i) >= 0.0);
  }

  // Affine suffix after the dropout: the analytic moments are exact, so a
  // large-T estimate has to land on them.
  const PropagationResult exact = propagate_network(net, x, CovMode::kFull);
  CHECK(frobenius_rel_error(est.cov, exact.state.cov) < 0.02);
  for (std::size_t i = 0; i < est.mean.size(); ++i) {
    CHECK(std::abs(est.mean[i] - exact.state.mean[i]) /
              std::abs(exact.state.mean[i]) <
          0.02);
  }

  const McEstimate diag =
      empirical_moments(net, x, 200000, 21, CovMode::kDiagonal, 0);
  for (std::size_t i = 0; i < diag.mean.size(); ++i) {
    CHECK(diag.cov[i] == est.cov(i, i));
    CHECK(diag.mean[i] == est.mean[i]);
  }
}

TEST_CASE("zero-rate dropout leaves only rounding-level covariance") {
  RngStream net_rng(79, 0);
  NetworkSpec net;
  net.input_shape = {2};
  net.layers.emplace_back(DropoutLayer{0.0, DropoutConvention::kInverted});
  DenseLayer dense;
  dense.weights = random_tensor({2, 2}, net_rng);
  dense.bias = random_tensor({2}, net_rng);
  net.layers.emplace_back(std::move(dense));

  // Every sample is bit-identical, so the covariance is zero up to the
  // rounding of the sample mean (summing T equal doubles is not exact).
  const McEstimate est = empirical_moments(net, random_tensor({2}, net_rng),
                                           1000, 3, CovMode::kFull, 2);
  CHECK(max_abs_diff(est.cov, Tensor({2, 2})) < 1e-26);
}

TEST_CASE("empirical_moments rejects degenerate sample counts") {
  const NetworkSpec net = affine_after_dropout(9);
  const Tensor x({3}, 0.5);
  CHECK_THROWS_AS(empirical_moments(net, x, 1, 0, CovMode::kFull, 1),
                  ConfigError);
}

TEST_CASE("convergence curve heads toward the analytic reference") {
  const NetworkSpec net = affine_after_dropout(10);
  RngStream rng(6, 0);
  const Tensor x = random_tensor({3}, rng);
  const PropagationResult ref = propagate_network(net, x, CovMode::kFull);

  const ConvergenceCurve curve = convergence_curve(
      net, x, {10, 100, 1000, 10000}, ref.state, 31, 1);
  REQUIRE(curve.points.size() == 4);
  CHECK(curve.excluded_elements == 0);
  CHECK(curve.points.back().relative_abs_diff <
        curve.points.front().relative_abs_diff);
  for (const ConvergencePoint& p : curve.points) {
    CHECK(std::isfinite(p.relative_abs_diff));
    CHECK(p.relative_abs_diff >= 0.0);
  }
}

TEST_CASE("zero-variance reference elements are excluded with a count") {
  // Second output row is all zeros, so its analytic variance is zero and
  // the relative difference there is undefined.
  RngStream net_rng(83, 0);
  NetworkSpec net;
  net.input_shape = {2};
  net.layers.emplace_back(DropoutLayer{0.4, DropoutConvention::kStandard});
  DenseLayer dense;
  dense.weights = Tensor::matrix(2, 2, {1.0, 0.5, 0.0, 0.0});
  dense.bias = random_tensor({2}, net_rng);
  net.layers.emplace_back(std::move(dense));

  const Tensor x = random_tensor({2}, net_rng, 0.5, 1.5);
  const PropagationResult ref = propagate_network(net, x, CovMode::kFull);
  const ConvergenceCurve curve =
      convergence_curve(net, x, {10, 100}, ref.state, 37, 1);
  CHECK(curve.excluded_elements == 1);

  // An all-zero reference cannot define the curve at all.
  NetworkSpec dead;
  dead.input_shape = {2};
  dead.layers.emplace_back(DropoutLayer{0.4, DropoutConvention::kStandard});
  DenseLayer zero;
  zero.weights = Tensor({2, 2});
  zero.bias = Tensor({2});
  dead.layers.emplace_back(std::move(zero));
  const PropagationResult dead_ref =
      propagate_network(dead, x, CovMode::kFull);
  CHECK_THROWS_AS(convergence_curve(dead, x, {10}, dead_ref.state, 37, 1),
                  ConfigError);
}

TEST_CASE("halved error when samples quadruple, on average") {
  const NetworkSpec net = affine_after_dropout(11);
  RngStream rng(9, 0);
  const Tensor x = random_tensor({3}, rng);
  const PropagationResult ref = propagate_network(net, x, CovMode::kFull);

  double sum_small = 0.0, sum_big = 0.0;
  const int repeats = 40;
  for (int r = 0; r < repeats; ++r) {
    const ConvergenceCurve curve = convergence_curve(
        net, x, {200, 800}, ref.state, 1000 + static_cast<std::uint64_t>(r),
        1);
    sum_small += curve.points[0].relative_abs_diff;
    sum_big += curve.points[1].relative_abs_diff;
  }
  const double ratio = sum_big / sum_small;
  CHECK(ratio > 0.3);
  CHECK(ratio < 0.75);
}

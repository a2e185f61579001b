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

// Independent reference implementations used only by tests. Everything in
// here recomputes a quantity the library also produces, by a deliberately
// different method, so agreement is evidence and not tautology.

#ifndef VARPROP_TESTS_TESTING_ORACLES_HPP_
#define VARPROP_TESTS_TESTING_ORACLES_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "varprop/moments.hpp"
#include "varprop/network.hpp"
#include "varprop/rng.hpp"
#include "varprop/tensor.hpp"

namespace varprop::testing {

/// erf via its Maclaurin series, summed until the term underflows the
/// running value. Converges for the |x| <= 3 arguments the tests use.
double taylor_erf(double x);

/// E[max(0,X)] and Var[max(0,X)] for X ~ N(mu, sigma^2) by adaptive
/// Simpson quadrature of the integrand on [0, mu + 12 sigma].
struct QuadratureMoments {
  double mean = 0.0;
  double var = 0.0;
};
QuadratureMoments relu_moments_quadrature(double mu, double sigma);

/// Lower-triangular L with L L^T = a for a small symmetric positive
/// definite matrix.
Tensor cholesky_lower(const Tensor& a);

/// One draw x ~ N(mean, cov) using the given Cholesky factor of cov.
Tensor gaussian_draw(const Tensor& mean, const Tensor& chol, RngStream& rng);

/// Empirical mean and covariance of `draws` vectors produced by `sample`.
/// Plain accumulation; the library's two-pass blocked estimator is the
/// thing under test elsewhere.
struct SampleMoments {
  Tensor mean;
  Tensor cov;  // [n x n]
};
template <typename Fn>
SampleMoments sample_moments(std::size_t n, std::size_t draws, Fn&& sample) {
  Tensor sum = Tensor::vector(std::vector<double>(n, 0.0));
  std::vector<Tensor> kept;
  kept.reserve(draws);
  for (std::size_t t = 0; t < draws; ++t) {
    Tensor x = sample(t);
    for (std::size_t i = 0; i < n; ++i) sum[i] += x[i];
    kept.push_back(std::move(x));
  }
  SampleMoments out{Tensor({n}), Tensor({n, n})};
  for (std::size_t i = 0; i < n; ++i) {
    out.mean[i] = sum[i] / static_cast<double>(draws);
  }
  for (const Tensor& x : kept) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out.cov(i, j) += (x[i] - out.mean[i]) * (x[j] - out.mean[j]);
      }
    }
  }
  for (std::size_t i = 0; i < n * n; ++i) {
    out.cov[i] /= static_cast<double>(draws - 1);
  }
  return out;
}

/// Full-mode propagation that discards off-diagonal covariance after every
/// layer. Defines the exact semantics diagonal mode must reproduce.
MomentState zeroed_full_propagation(const NetworkSpec& net,
                                    const Tensor& input,
                                    ReluRule relu_rule = ReluRule::kTaylor);

/// Matrix-multiply with loops ordered i-j-p, unlike the library's i-p-j,
/// so shared bugs cannot cancel.
Tensor matmul_reference(const Tensor& a, const Tensor& b);

/// max |a_ij - b_ij| over equally shaped tensors.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Frobenius-relative error ||a - b||_F / ||b||_F.
double frobenius_rel_error(const Tensor& a, const Tensor& b);

/// Random small network of dense / relu / sigmoid / dropout layers with one
/// guaranteed dropout, <= max_layers compute layers, <= max_units wide.
NetworkSpec random_dense_net(RngStream& rng, std::size_t max_layers,
                             std::size_t max_units);

/// Random conv / relu / dropout stack on a [h x w x c] input, kernels no
/// larger than the activation, one guaranteed dropout.
NetworkSpec random_conv_net(RngStream& rng, std::size_t max_hw);

/// Random tensor with independent uniform entries on [lo, hi].
Tensor random_tensor(const std::vector<std::size_t>& shape, RngStream& rng,
                     double lo = -1.0, double hi = 1.0);

/// Random symmetric positive definite [n x n] matrix A A^T + eps I.
Tensor random_spd(std::size_t n, RngStream& rng, double eps = 0.05);

}  // namespace varprop::testing

#endif  // VARPROP_TESTS_TESTING_ORACLES_HPP_

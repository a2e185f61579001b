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

#ifndef VARPROP_METRICS_HPP_
#define VARPROP_METRICS_HPP_

#include <cstdint>
#include <vector>

#include "varprop/tensor.hpp"

namespace varprop {

double rmse(const Tensor& predictions, const Tensor& targets);

/// Gaussian observation model for log-likelihood evaluation: precision tau
/// (observation variance 1/tau) and the number of predictive draws for the
/// sampled estimator.
struct TllConfig {
  double tau = 1.0;
  std::size_t likelihood_samples = 10000;
};

/// Mean over points of log N(target; pred_mean, pred_var + 1/tau): the
/// infinite-sample limit of the sampled estimator.
double gaussian_tll_closed_form(const Tensor& pred_mean,
                                const Tensor& pred_var, const Tensor& targets,
                                double tau);

/// Per point, draw cfg.likelihood_samples predictions y_t ~ N(pred_mean,
/// pred_var) from stream i of `seed`, then log-mean-exp of
/// N(target; y_t, 1/tau); mean over points.
double gaussian_tll_sampled(const Tensor& pred_mean, const Tensor& pred_var,
                            const Tensor& targets, const TllConfig& cfg,
                            std::uint64_t seed);

/// Same estimator with caller-provided predictive draws (row i holds the
/// draws for point i), for predictions that come from stochastic forward
/// passes rather than a Gaussian.
double gaussian_tll_from_samples(const Tensor& draws /* [n x T] */,
                                 const Tensor& targets, double tau);

struct UncertaintyBin {
  double quantile = 0.0;  // bin midpoint in [0, 1]
  double mean_uncertainty = 0.0;
  double mean_error = 0.0;
};

/// Sort points by uncertainty, cut into n_bins quantile bins (sizes differ
/// by at most one), and report each bin's mean uncertainty and mean error.
std::vector<UncertaintyBin> error_vs_uncertainty_quantile(
    const Tensor& uncertainty, const Tensor& errors, std::size_t n_bins);

/// Rank correlation with average ranks on ties.
double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace varprop

#endif  // VARPROP_METRICS_HPP_

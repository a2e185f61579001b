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

#include "varprop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varprop/errors.hpp"
#include "varprop/rng.hpp"

namespace varprop {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_equal_length(const Tensor& a, const Tensor& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

void require_tll_inputs(const Tensor& pred_var, double tau) {
  if (!(tau > 0.0)) {
    throw ConfigError("gaussian tll: tau must be positive");
  }
  for (std::size_t i = 0; i < pred_var.size(); ++i) {
    if (pred_var[i] < 0.0) {
      throw NumericError("gaussian tll: negative predictive variance at " +
                         std::to_string(i));
    }
  }
}

double log_mean_exp(const std::vector<double>& values) {
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc / static_cast<double>(values.size()));
}

}  // namespace

double rmse(const Tensor& predictions, const Tensor& targets) {
  require_equal_length(predictions, targets, "rmse");
  if (predictions.size() == 0) {
    throw ConfigError("rmse: empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(predictions.size()));
}

double gaussian_tll_closed_form(const Tensor& pred_mean,
                                const Tensor& pred_var, const Tensor& targets,
                                double tau) {
  require_equal_length(pred_mean, targets, "gaussian_tll_closed_form");
  require_equal_length(pred_var, targets, "gaussian_tll_closed_form");
  require_tll_inputs(pred_var, tau);
  if (targets.size() == 0) {
    throw ConfigError("gaussian_tll_closed_form: empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double v = pred_var[i] + 1.0 / tau;
    const double d = targets[i] - pred_mean[i];
    acc += -0.5 * (kLog2Pi + std::log(v) + d * d / v);
  }
  return acc / static_cast<double>(targets.size());
}

double gaussian_tll_sampled(const Tensor& pred_mean, const Tensor& pred_var,
                            const Tensor& targets, const TllConfig& cfg,
                            std::uint64_t seed) {
  require_equal_length(pred_mean, targets, "gaussian_tll_sampled");
  require_equal_length(pred_var, targets, "gaussian_tll_sampled");
  require_tll_inputs(pred_var, cfg.tau);
  if (cfg.likelihood_samples == 0) {
    throw ConfigError("gaussian_tll_sampled: need at least one draw");
  }
  if (targets.size() == 0) {
    throw ConfigError("gaussian_tll_sampled: empty input");
  }
  const double log_norm = 0.5 * (std::log(cfg.tau) - kLog2Pi);
  double acc = 0.0;
  std::vector<double> log_terms(cfg.likelihood_samples);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    RngStream rng(seed, i);
    const double sigma = std::sqrt(pred_var[i]);
    for (std::size_t t = 0; t < cfg.likelihood_samples; ++t) {
      const double draw = pred_mean[i] + sigma * rng.gaussian();
      const double d = targets[i] - draw;
      log_terms[t] = log_norm - 0.5 * cfg.tau * d * d;
    }
    acc += log_mean_exp(log_terms);
  }
  return acc / static_cast<double>(targets.size());
}

double gaussian_tll_from_samples(const Tensor& draws, const Tensor& targets,
                                 double tau) {
  if (draws.rank() != 2 || draws.extent(0) != targets.size()) {
    throw ShapeError("gaussian_tll_from_samples: draws " +
                     shape_string(draws.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (!(tau > 0.0)) {
    throw ConfigError("gaussian tll: tau must be positive");
  }
  if (targets.size() == 0 || draws.extent(1) == 0) {
    throw ConfigError("gaussian_tll_from_samples: empty input");
  }
  const std::size_t t_count = draws.extent(1);
  const double log_norm = 0.5 * (std::log(tau) - kLog2Pi);
  double acc = 0.0;
  std::vector<double> log_terms(t_count);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t t = 0; t < t_count; ++t) {
      const double d = targets[i] - draws(i, t);
      log_terms[t] = log_norm - 0.5 * tau * d * d;
    }
    acc += log_mean_exp(log_terms);
  }
  return acc / static_cast<double>(targets.size());
}

std::vector<UncertaintyBin> error_vs_uncertainty_quantile(
    const Tensor& uncertainty, const Tensor& errors, std::size_t n_bins) {
  require_equal_length(uncertainty, errors, "error_vs_uncertainty_quantile");
  const std::size_t n = uncertainty.size();
  if (n_bins == 0 || n_bins > n) {
    throw ConfigError("error_vs_uncertainty_quantile: need 1 <= bins <= " +
                      std::to_string(n) + ", got " + std::to_string(n_bins));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return uncertainty[a] < uncertainty[b];
  });

  std::vector<UncertaintyBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t lo = b * n / n_bins;
    const std::size_t hi = (b + 1) * n / n_bins;
    UncertaintyBin& bin = bins[b];
    bin.quantile = (static_cast<double>(b) + 0.5) / static_cast<double>(n_bins);
    for (std::size_t i = lo; i < hi; ++i) {
      bin.mean_uncertainty += uncertainty[idx[i]];
      bin.mean_error += errors[idx[i]];
    }
    const double count = static_cast<double>(hi - lo);
    bin.mean_uncertainty /= count;
    bin.mean_error /= count;
  }
  return bins;
}

namespace {

std::vector<double> ranks_of(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ConfigError("spearman_rank_correlation: need two equal-length "
                      "vectors of at least 2 entries");
  }
  const std::vector<double> ra = ranks_of(a);
  const std::vector<double> rb = ranks_of(b);
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw NumericError("spearman_rank_correlation: a vector is constant");
  }
  return sab / std::sqrt(saa * sbb);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("fit_line: need two equal-length vectors of at least "
                      "2 points");
  }
  const double n = static_cast<double>(x.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) {
    throw NumericError("fit_line: all x values are identical");
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  if (syy == 0.0) {
    fit.r_squared = 1.0;  // exactly flat data is fit exactly
    return fit;
  }
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r_squared = 1.0 - ss_res / syy;
  return fit;
}

}  // namespace varprop

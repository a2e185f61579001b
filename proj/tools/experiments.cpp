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

#include "experiments.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "varprop/errors.hpp"
#include "varprop/mc.hpp"
#include "varprop/metrics.hpp"
#include "varprop/moments.hpp"
#include "varprop/serialize.hpp"
#include "varprop/training.hpp"

namespace varprop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

ExperimentReport run_experiment_sine(const SineExperimentConfig& cfg) {
  ExperimentReport report;
  report.command = "experiment sine";
  report.add_config("train_n", cfg.train_n);
  report.add_config("epochs", cfg.epochs);
  report.add_config("batch_size", cfg.batch_size);
  report.add_config("learning_rate", cfg.learning_rate);
  report.add_config("momentum", cfg.momentum);
  report.add_config("noise_sigma", cfg.noise_sigma);
  report.add_config("arch", cfg.arch);
  report.add_config("grid_step", cfg.grid_step);
  report.add_config("mc_samples", cfg.mc_samples);
  report.add_config("calibration_bins", cfg.calibration_bins);
  report.add_config("seed", cfg.seed);

  if (!(cfg.grid_step > 0.0)) {
    throw ConfigError("experiment sine: grid step must be positive");
  }

  Dataset data =
      make_sine_dataset(cfg.train_n, 0.0, 20.0, cfg.noise_sigma, cfg.seed);
  // Z-score the inputs and apply the same transform to the evaluation grid.
  // Raw [0, 20] inputs put every first-layer kink at the origin and the
  // network trains into a dead constant.
  double in_mean = 0.0, in_sq = 0.0;
  const std::size_t train_n = dataset_size(data);
  for (std::size_t i = 0; i < train_n; ++i) in_mean += data.inputs(i, 0);
  in_mean /= static_cast<double>(train_n);
  for (std::size_t i = 0; i < train_n; ++i) {
    const double d = data.inputs(i, 0) - in_mean;
    in_sq += d * d;
  }
  const double in_std = std::sqrt(in_sq / static_cast<double>(train_n));
  for (std::size_t i = 0; i < train_n; ++i) {
    data.inputs(i, 0) = (data.inputs(i, 0) - in_mean) / in_std;
  }
  const NetworkSpec skeleton = make_mlp(cfg.arch, 1, cfg.seed);

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.seed = cfg.seed;

  const Clock::time_point train_start = Clock::now();
  const TrainResult trained = train_mlp(skeleton, data, tc);
  report.add_metric("train_seconds", seconds_since(train_start));
  report.add_metric("final_train_loss", trained.epoch_loss.back());
  if (!cfg.model_out.empty()) {
    save_model_file(trained.net, cfg.model_out);
  }

  // Evaluation grid: out-of-distribution [-5, 0), in-distribution [0, 20],
  // out-of-distribution (20, 25].
  std::vector<double> xs;
  std::vector<bool> in_dist;
  for (double x = -5.0; x < -1e-9; x += cfg.grid_step) {
    xs.push_back(x);
    in_dist.push_back(false);
  }
  const std::size_t in_points =
      static_cast<std::size_t>(std::llround(20.0 / cfg.grid_step));
  for (std::size_t k = 0; k <= in_points; ++k) {
    xs.push_back(static_cast<double>(k) * cfg.grid_step);
    in_dist.push_back(true);
  }
  for (double x = 20.0 + cfg.grid_step; x < 25.0 + 1e-9; x += cfg.grid_step) {
    xs.push_back(x);
    in_dist.push_back(false);
  }

  const Clock::time_point eval_start = Clock::now();
  std::vector<std::pair<double, double>> analytic_series, mc_series,
      mean_series;
  Tensor uncertainties({xs.size()});
  Tensor model_errors({xs.size()});
  double std_in = 0.0, std_ood = 0.0, rel_diff_in = 0.0, sq_err_in = 0.0;
  std::size_t n_in = 0, n_ood = 0;
  ClampStats clamps;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor x({1}, {(xs[i] - in_mean) / in_std});
    const PropagationResult an =
        propagate_network(trained.net, x, CovMode::kFull);
    clamps.merge(an.clamps);
    const double an_std = std::sqrt(an.state.cov(0, 0));
    const McEstimate mc = empirical_moments(
        trained.net, x, cfg.mc_samples, cfg.seed, CovMode::kDiagonal,
        cfg.workers, static_cast<std::uint64_t>(i) << 32);
    const double mc_std = std::sqrt(mc.cov[0]);

    analytic_series.emplace_back(xs[i], an_std);
    mc_series.emplace_back(xs[i], mc_std);
    mean_series.emplace_back(xs[i], an.state.mean[0]);
    uncertainties[i] = an_std;
    model_errors[i] = std::abs(an.state.mean[0] - std::sin(xs[i]));

    if (in_dist[i]) {
      std_in += an_std;
      rel_diff_in += std::abs(an_std - mc_std) / mc_std;
      sq_err_in += model_errors[i] * model_errors[i];
      ++n_in;
    } else {
      std_ood += an_std;
      ++n_ood;
    }
  }
  report.add_metric("eval_seconds", seconds_since(eval_start));

  std_in /= static_cast<double>(n_in);
  std_ood /= static_cast<double>(n_ood);
  report.add_metric("mean_std_in_dist", std_in);
  report.add_metric("mean_std_ood", std_ood);
  report.add_metric("ood_to_in_dist_std_ratio", std_ood / std_in);
  report.add_metric("mean_rel_std_diff_in_dist",
                    rel_diff_in / static_cast<double>(n_in));
  report.add_metric("rmse_in_dist",
                    std::sqrt(sq_err_in / static_cast<double>(n_in)));

  const std::vector<UncertaintyBin> bins = error_vs_uncertainty_quantile(
      uncertainties, model_errors, cfg.calibration_bins);
  std::vector<std::pair<double, double>> calibration;
  std::vector<double> bin_index, bin_error;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    calibration.emplace_back(bins[b].quantile, bins[b].mean_error);
    bin_index.push_back(static_cast<double>(b));
    bin_error.push_back(bins[b].mean_error);
  }
  report.add_metric("calibration_spearman",
                    spearman_rank_correlation(bin_index, bin_error));

  report.add_series("analytic_std", std::move(analytic_series));
  report.add_series("mc_std", std::move(mc_series));
  report.add_series("predicted_mean", std::move(mean_series));
  report.add_series("calibration", std::move(calibration));
  report.clamps = clamps;
  return report;
}

namespace {

struct UciEval {
  double rmse = 0.0;
  std::vector<double> tll_per_tau;  // aligned with the tau grid
};

// De-normalized target of validation row i.
double original_target(const Dataset& val, std::size_t i) {
  const double y = val.targets(i, 0);
  return val.normalized ? y * val.target_std[0] + val.target_mean[0] : y;
}

}  // namespace

ExperimentReport run_experiment_uci(const UciExperimentConfig& cfg) {
  ExperimentReport report;
  report.command = "experiment uci";
  report.add_config("csv", cfg.csv_path);
  report.add_config("splits", cfg.splits);
  report.add_config("train_fraction", cfg.train_fraction);
  report.add_config("hidden_units", cfg.hidden_units);
  report.add_config("epochs", cfg.epochs);
  report.add_config("batch_size", cfg.batch_size);
  report.add_config("learning_rate", cfg.learning_rate);
  report.add_config("momentum", cfg.momentum);
  report.add_config("mc_samples", cfg.mc_samples);
  report.add_config("tll_samples", cfg.tll_samples);
  report.add_config("seed", cfg.seed);
  {
    std::string grid;
    for (double p : cfg.dropout_grid) {
      grid += (grid.empty() ? "" : ",") + format_double(p);
    }
    report.add_config("dropout_grid", grid);
    grid.clear();
    for (double t : cfg.tau_grid) {
      grid += (grid.empty() ? "" : ",") + format_double(t);
    }
    report.add_config("tau_grid", grid);
  }

  if (cfg.dropout_grid.empty() || cfg.tau_grid.empty()) {
    throw ConfigError("experiment uci: empty hyperparameter grid");
  }
  if (cfg.splits == 0) {
    throw ConfigError("experiment uci: need at least one split");
  }

  const Dataset data =
      load_csv_dataset(cfg.csv_path, cfg.target_columns, /*normalize=*/true);
  if (data.targets.extent(1) != 1) {
    throw ConfigError("experiment uci: exactly one target column expected, "
                      "got " + std::to_string(data.targets.extent(1)));
  }
  const std::size_t d = data.inputs.extent(1);
  const auto splits =
      split_dataset(data, cfg.train_fraction, cfg.splits, cfg.seed);

  const std::size_t n_p = cfg.dropout_grid.size();
  const std::size_t n_tau = cfg.tau_grid.size();
  const double target_std = data.normalized ? data.target_std[0] : 1.0;

  const Clock::time_point start = Clock::now();
  // [p][tau] mean validation TLL over splits, and [p] mean RMSE.
  std::vector<std::vector<double>> tll_an(n_p, std::vector<double>(n_tau, 0.0));
  std::vector<std::vector<double>> tll_mc(n_p, std::vector<double>(n_tau, 0.0));
  std::vector<double> rmse_acc(n_p, 0.0);

  for (std::size_t s = 0; s < splits.size(); ++s) {
    const Dataset& train = splits[s].first;
    const Dataset& val = splits[s].second;
    const std::size_t val_n = dataset_size(val);

    for (std::size_t pi = 0; pi < n_p; ++pi) {
      const std::string arch = "dropout:" + format_double(cfg.dropout_grid[pi]) +
                               ",dense:" + std::to_string(cfg.hidden_units) +
                               ",relu,dropout:" +
                               format_double(cfg.dropout_grid[pi]) + ",dense:1";
      const std::uint64_t model_seed =
          cfg.seed + 1000003ull * s + 101ull * pi;
      TrainConfig tc;
      tc.epochs = cfg.epochs;
      tc.batch_size = cfg.batch_size;
      tc.learning_rate = cfg.learning_rate;
      tc.momentum = cfg.momentum;
      tc.seed = model_seed;
      const TrainResult trained =
          train_mlp(make_mlp(arch, d, model_seed), train, tc);

      // Analytic path: full-mode moments per validation point, then the
      // sampled likelihood with draws from N(mean, var), per tau.
      Tensor an_mean({val_n}), an_var({val_n}), targets({val_n});
      for (std::size_t i = 0; i < val_n; ++i) {
        const PropagationResult res = propagate_network(
            trained.net, input_row(val, i), CovMode::kFull);
        an_mean[i] = res.state.mean[0] * target_std +
                     (data.normalized ? data.target_mean[0] : 0.0);
        an_var[i] = res.state.cov(0, 0) * target_std * target_std;
        targets[i] = original_target(val, i);
      }
      rmse_acc[pi] += rmse(an_mean, targets);
      TllConfig tll_cfg;
      tll_cfg.likelihood_samples = cfg.tll_samples;
      for (std::size_t ti = 0; ti < n_tau; ++ti) {
        tll_cfg.tau = cfg.tau_grid[ti];
        tll_an[pi][ti] += gaussian_tll_sampled(an_mean, an_var, targets,
                                               tll_cfg, model_seed);
      }

      // MC path: stochastic forward draws per validation point, reused
      // across the tau grid.
      std::vector<double> mc_tll_acc(n_tau, 0.0);
      for (std::size_t i = 0; i < val_n; ++i) {
        const std::uint64_t offset =
            (static_cast<std::uint64_t>(s) << 44) |
            (static_cast<std::uint64_t>(pi) << 40) |
            (static_cast<std::uint64_t>(i) << 20);
        Tensor draws = sample_outputs(trained.net, input_row(val, i),
                                      cfg.mc_samples, cfg.seed, cfg.workers,
                                      offset);
        if (data.normalized) {
          for (std::size_t t = 0; t < draws.size(); ++t) {
            draws[t] = draws[t] * target_std + data.target_mean[0];
          }
        }
        const Tensor point_target({1}, {targets[i]});
        const Tensor row = draws.reshaped({1, cfg.mc_samples});
        for (std::size_t ti = 0; ti < n_tau; ++ti) {
          mc_tll_acc[ti] +=
              gaussian_tll_from_samples(row, point_target, cfg.tau_grid[ti]);
        }
      }
      for (std::size_t ti = 0; ti < n_tau; ++ti) {
        tll_mc[pi][ti] += mc_tll_acc[ti] / static_cast<double>(val_n);
      }
    }
  }

  const double inv_splits = 1.0 / static_cast<double>(splits.size());
  std::size_t best_an_p = 0, best_an_tau = 0, best_mc_p = 0, best_mc_tau = 0;
  for (std::size_t pi = 0; pi < n_p; ++pi) {
    rmse_acc[pi] *= inv_splits;
    for (std::size_t ti = 0; ti < n_tau; ++ti) {
      tll_an[pi][ti] *= inv_splits;
      tll_mc[pi][ti] *= inv_splits;
      if (tll_an[pi][ti] > tll_an[best_an_p][best_an_tau]) {
        best_an_p = pi;
        best_an_tau = ti;
      }
      if (tll_mc[pi][ti] > tll_mc[best_mc_p][best_mc_tau]) {
        best_mc_p = pi;
        best_mc_tau = ti;
      }
    }
  }

  report.add_metric("tll_analytic", tll_an[best_an_p][best_an_tau]);
  report.add_metric("tll_mc", tll_mc[best_mc_p][best_mc_tau]);
  report.add_metric("abs_tll_gap",
                    std::abs(tll_an[best_an_p][best_an_tau] -
                             tll_mc[best_mc_p][best_mc_tau]));
  report.add_metric("rmse_analytic", rmse_acc[best_an_p]);
  report.add_metric("rmse_mc", rmse_acc[best_mc_p]);
  report.add_metric("best_dropout_analytic", cfg.dropout_grid[best_an_p]);
  report.add_metric("best_tau_analytic", cfg.tau_grid[best_an_tau]);
  report.add_metric("best_dropout_mc", cfg.dropout_grid[best_mc_p]);
  report.add_metric("best_tau_mc", cfg.tau_grid[best_mc_tau]);
  report.add_metric("total_seconds", seconds_since(start));

  std::vector<std::pair<double, double>> an_series, mc_series;
  for (std::size_t pi = 0; pi < n_p; ++pi) {
    double best_an = tll_an[pi][0], best_mc = tll_mc[pi][0];
    for (std::size_t ti = 1; ti < n_tau; ++ti) {
      best_an = std::max(best_an, tll_an[pi][ti]);
      best_mc = std::max(best_mc, tll_mc[pi][ti]);
    }
    an_series.emplace_back(cfg.dropout_grid[pi], best_an);
    mc_series.emplace_back(cfg.dropout_grid[pi], best_mc);
  }
  report.add_series("val_tll_analytic_vs_dropout", std::move(an_series));
  report.add_series("val_tll_mc_vs_dropout", std::move(mc_series));
  return report;
}

}  // namespace varprop

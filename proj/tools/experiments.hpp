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

#ifndef VARPROP_TOOLS_EXPERIMENTS_HPP_
#define VARPROP_TOOLS_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "varprop/report.hpp"

namespace varprop {

/// Sine regression end to end: train on noisy sin(x) over [0, 20], then
/// compare the analytic predictive std against MC dropout on an evaluation
/// grid covering [-5, 25]. Inputs outside [0, 20] count as
/// out-of-distribution.
struct SineExperimentConfig {
  std::size_t train_n = 1000;
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double noise_sigma = 0.3;
  // Dropout sits between the last hidden activation and the output layer.
  // With only an affine map after the noise the propagated covariance is
  // exact, so the analytic std and the MC estimate agree up to sampling
  // error. A dropout layer deeper inside the stack puts a ReLU behind the
  // noise and the linearized transform deviates from MC by 10-30% wherever
  // pre-activations straddle zero.
  std::string arch =
      "dense:100,relu,dense:100,relu,dense:100,relu,dropout:0.1,dense:1";
  double grid_step = 0.25;
  std::size_t mc_samples = 10000;
  std::size_t calibration_bins = 10;
  std::uint64_t seed = 7;
  std::size_t workers = 0;
  std::string model_out;  // optional: save the trained model here
};

ExperimentReport run_experiment_sine(const SineExperimentConfig& cfg);

/// Tabular regression protocol on a CSV: random train/validation splits,
/// grid search over dropout rate and observation precision tau, then RMSE
/// and sampled test log-likelihood for the analytic and the MC path, each
/// at its own best hyperparameters.
struct UciExperimentConfig {
  std::string csv_path;
  std::vector<std::string> target_columns;  // empty: last column
  std::size_t splits = 20;
  double train_fraction = 0.9;
  std::vector<double> dropout_grid = {0.005, 0.01, 0.05, 0.1};
  std::vector<double> tau_grid = {0.1, 1.0, 10.0, 100.0};
  std::size_t hidden_units = 50;
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t mc_samples = 10000;
  std::size_t tll_samples = 10000;
  std::uint64_t seed = 7;
  std::size_t workers = 0;
};

ExperimentReport run_experiment_uci(const UciExperimentConfig& cfg);

}  // namespace varprop

#endif  // VARPROP_TOOLS_EXPERIMENTS_HPP_

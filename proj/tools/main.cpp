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
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiments.hpp"
#include "varprop/benchmark.hpp"
#include "varprop/errors.hpp"
#include "varprop/mc.hpp"
#include "varprop/metrics.hpp"
#include "varprop/moments.hpp"
#include "varprop/report.hpp"
#include "varprop/serialize.hpp"
#include "varprop/training.hpp"

namespace {

using namespace varprop;

void emit_report(const ExperimentReport& report, const std::string& out_path) {
  const std::string text = report_to_json(report);
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw Error("cannot write report file: " + out_path);
  }
  out << text;
}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    std::istringstream item(token);
    double v;
    while (item >> v) values.push_back(v);
    if (!item.eof()) {
      throw ParseError("cannot parse number list near \"" + token + "\"");
    }
  }
  return values;
}

/// Input activation from --input (inline numbers) or --input-file
/// (whitespace/comma separated), reshaped to the model's input shape.
Tensor load_input(const NetworkSpec& net, const std::string& inline_values,
                  const std::string& file_path) {
  if (inline_values.empty() == file_path.empty()) {
    throw ConfigError("provide exactly one of --input and --input-file");
  }
  std::string text = inline_values;
  if (!file_path.empty()) {
    std::ifstream in(file_path);
    if (!in) {
      throw ParseError("cannot open input file: " + file_path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
    for (char& c : text) {
      if (c == '\n' || c == '\t' || c == '\r') c = ' ';
    }
  }
  const std::vector<double> values = parse_numbers(text);
  if (values.size() != shape_size(net.input_shape)) {
    throw ShapeError("input has " + std::to_string(values.size()) +
                     " values but the model expects shape " +
                     shape_string(net.input_shape));
  }
  return Tensor(net.input_shape, values);
}

CovMode parse_mode(const std::string& mode) {
  if (mode == "full") return CovMode::kFull;
  if (mode == "diagonal") return CovMode::kDiagonal;
  throw ConfigError("unknown mode \"" + mode +
                    "\" (expected full or diagonal)");
}

ReluRule parse_relu_rule(const std::string& rule) {
  if (rule == "taylor") return ReluRule::kTaylor;
  if (rule == "exact-gaussian") return ReluRule::kExactGaussian;
  throw ConfigError("unknown relu rule \"" + rule +
                    "\" (expected taylor or exact-gaussian)");
}

std::vector<std::size_t> to_counts(const std::vector<double>& values,
                                   const char* flag) {
  std::vector<std::size_t> counts;
  for (double v : values) {
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw ConfigError(std::string(flag) + ": sample counts must be "
                        "positive integers");
    }
    counts.push_back(static_cast<std::size_t>(v));
  }
  return counts;
}

// ---- train ----

struct TrainArgs {
  std::string csv_path;
  std::vector<std::string> target_columns;
  bool normalize = false;
  std::size_t sine_n = 0;
  double sine_lo = 0.0;
  double sine_hi = 20.0;
  double sine_sigma = 0.3;
  std::string arch;
  TrainConfig config;
  std::string model_out;
  std::string loss_csv;
  std::string out;
};

void run_train(const TrainArgs& args) {
  if (args.csv_path.empty() == (args.sine_n == 0)) {
    throw ConfigError("provide exactly one of --csv and --sine-n");
  }
  const Dataset data =
      args.csv_path.empty()
          ? make_sine_dataset(args.sine_n, args.sine_lo, args.sine_hi,
                              args.sine_sigma, args.config.seed)
          : load_csv_dataset(args.csv_path, args.target_columns,
                             args.normalize);

  const NetworkSpec skeleton =
      make_mlp(args.arch, data.inputs.extent(1), args.config.seed);
  const TrainResult trained = train_mlp(skeleton, data, args.config);
  save_model_file(trained.net, args.model_out);

  if (!args.loss_csv.empty()) {
    std::ofstream loss(args.loss_csv);
    if (!loss) {
      throw Error("cannot write loss file: " + args.loss_csv);
    }
    loss << "epoch,loss\n";
    for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e) {
      loss << e << "," << format_double(trained.epoch_loss[e]) << "\n";
    }
  }

  ExperimentReport report;
  report.command = "train";
  report.add_config("arch", args.arch);
  report.add_config("epochs", args.config.epochs);
  report.add_config("batch_size", args.config.batch_size);
  report.add_config("learning_rate", args.config.learning_rate);
  report.add_config("momentum", args.config.momentum);
  report.add_config("seed", args.config.seed);
  report.add_config("model_out", args.model_out);
  report.add_metric("final_train_loss", trained.epoch_loss.back());
  report.add_metric("epochs_run",
                    static_cast<double>(trained.epoch_loss.size()));
  std::vector<std::pair<double, double>> loss_series;
  for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e) {
    loss_series.emplace_back(static_cast<double>(e), trained.epoch_loss[e]);
  }
  report.add_series("epoch_loss", std::move(loss_series));
  emit_report(report, args.out);
}

// ---- propagate ----

struct PropagateArgs {
  std::string model;
  std::string input;
  std::string input_file;
  std::string mode = "full";
  std::string relu_rule = "taylor";
  std::string out;
};

void run_propagate(const PropagateArgs& args) {
  const NetworkSpec net = load_model_file(args.model);
  const Tensor input = load_input(net, args.input, args.input_file);
  const CovMode mode = parse_mode(args.mode);
  const PropagationResult result =
      propagate_network(net, input, mode, parse_relu_rule(args.relu_rule));

  ExperimentReport report;
  report.command = "propagate";
  report.add_config("model", args.model);
  report.add_config("mode", args.mode);
  report.add_config("relu_rule", args.relu_rule);
  const Tensor variance = variance_vector(result.state);
  double total = 0.0, max_std = 0.0;
  for (std::size_t i = 0; i < variance.size(); ++i) {
    total += variance[i];
    max_std = std::max(max_std, std::sqrt(variance[i]));
  }
  report.add_metric("total_variance", total);
  report.add_metric("max_std", max_std);
  report.clamps = result.clamps;
  report.add_data("mean", result.state.mean);
  if (mode == CovMode::kFull) {
    report.add_data("covariance", result.state.cov);
  } else {
    report.add_data("variance", result.state.cov);
  }
  emit_report(report, args.out);
}

// ---- mc ----

struct McArgs {
  std::string model;
  std::string input;
  std::string input_file;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::string form = "diagonal";
  std::size_t workers = 0;
  std::string out;
};

void run_mc(const McArgs& args) {
  const NetworkSpec net = load_model_file(args.model);
  const Tensor input = load_input(net, args.input, args.input_file);
  const CovMode form = parse_mode(args.form);
  const McEstimate est = empirical_moments(net, input, args.samples,
                                           args.seed, form, args.workers);

  ExperimentReport report;
  report.command = "mc";
  report.add_config("model", args.model);
  report.add_config("samples", args.samples);
  report.add_config("seed", args.seed);
  report.add_config("form", args.form);
  const Tensor variance =
      form == CovMode::kFull
          ? variance_vector({est.mean, CovMode::kFull, est.cov})
          : est.cov;
  double total = 0.0;
  for (std::size_t i = 0; i < variance.size(); ++i) total += variance[i];
  report.add_metric("total_variance", total);
  report.add_data("mean", est.mean);
  if (form == CovMode::kFull) {
    report.add_data("covariance", est.cov);
  } else {
    report.add_data("variance", est.cov);
  }
  emit_report(report, args.out);
}

// ---- compare ----

struct CompareArgs {
  std::string model;
  std::string input;
  std::string input_file;
  std::vector<double> samples = {10, 100, 1000, 10000};
  std::uint64_t seed = 0;
  std::string mode = "full";
  std::size_t workers = 0;
  std::string out;
};

void run_compare(const CompareArgs& args) {
  const NetworkSpec net = load_model_file(args.model);
  const Tensor input = load_input(net, args.input, args.input_file);
  const std::vector<std::size_t> counts =
      to_counts(args.samples, "--samples");
  const PropagationResult reference =
      propagate_network(net, input, parse_mode(args.mode));
  const ConvergenceCurve curve = convergence_curve(
      net, input, counts, reference.state, args.seed, args.workers);

  ExperimentReport report;
  report.command = "compare";
  report.add_config("model", args.model);
  report.add_config("mode", args.mode);
  report.add_config("seed", args.seed);
  std::vector<std::pair<double, double>> series;
  std::vector<double> log_t, log_diff;
  for (const ConvergencePoint& p : curve.points) {
    series.emplace_back(static_cast<double>(p.samples), p.relative_abs_diff);
    if (p.relative_abs_diff > 0.0) {
      log_t.push_back(std::log10(static_cast<double>(p.samples)));
      log_diff.push_back(std::log10(p.relative_abs_diff));
    }
  }
  report.add_metric("excluded_elements",
                    static_cast<double>(curve.excluded_elements));
  report.add_metric("final_rel_diff", curve.points.back().relative_abs_diff);
  if (log_t.size() >= 2) {
    const LinearFit fit = fit_line(log_t, log_diff);
    report.add_metric("loglog_slope", fit.slope);
    report.add_metric("loglog_r_squared", fit.r_squared);
  }
  report.add_series("convergence", std::move(series));
  report.clamps = reference.clamps;
  emit_report(report, args.out);
}

// ---- bench ----

struct BenchArgs {
  std::string model;
  std::string input;
  std::string input_file;
  std::vector<double> samples = {1, 2, 5, 10, 20, 50, 100};
  std::size_t repeats = 5;
  std::string out;
};

void run_bench(const BenchArgs& args) {
  const NetworkSpec net = load_model_file(args.model);
  const Tensor input = load_input(net, args.input, args.input_file);
  const std::vector<std::size_t> counts =
      to_counts(args.samples, "--samples");
  const BenchmarkResult bench =
      run_benchmark(net, input, counts, args.repeats);

  ExperimentReport report;
  report.command = "bench";
  report.add_config("model", args.model);
  report.add_config("repeats", args.repeats);
  report.add_timing("forward_cached", bench.forward_cached_seconds,
                    bench.repeats);
  report.add_timing("analytic_diagonal", bench.analytic_diag_seconds,
                    bench.repeats);
  report.add_timing("analytic_full", bench.analytic_full_seconds,
                    bench.repeats);
  std::vector<std::pair<double, double>> series;
  for (const auto& [t, seconds] : bench.mc_seconds) {
    series.emplace_back(static_cast<double>(t), seconds);
  }
  report.add_series("mc_seconds", std::move(series));
  report.add_metric("mc_fit_slope", bench.mc_fit.slope);
  report.add_metric("mc_fit_intercept", bench.mc_fit.intercept);
  report.add_metric("mc_fit_r_squared", bench.mc_fit.r_squared);
  report.add_metric("diag_to_forward_ratio",
                    bench.analytic_diag_seconds /
                        bench.forward_cached_seconds);
  emit_report(report, args.out);
}

const char* error_kind(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e) != nullptr) return "parse";
  if (dynamic_cast<const ShapeError*>(&e) != nullptr) return "shape";
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return "config";
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return "numeric";
  return "error";
}

void emit_error(const char* kind, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c == '\n' ? ' ' : c;
  }
  std::cerr << "{\"error\": {\"type\": \"" << kind << "\", \"message\": \""
            << escaped << "\"}}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytic uncertainty propagation for feedforward networks "
               "with a Monte-Carlo dropout oracle"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Train a dense MLP with dropout and save the model");
  train->add_option("--csv", train_args.csv_path,
                    "Training data CSV (header row, numeric cells)");
  train->add_option("--target-col", train_args.target_columns,
                    "Target column name (repeatable; default: last column)");
  train->add_flag("--normalize", train_args.normalize,
                  "Z-normalize CSV features and targets");
  train->add_option("--sine-n", train_args.sine_n,
                    "Generate a noisy-sine dataset with this many points");
  train->add_option("--sine-lo", train_args.sine_lo, "Sine input range start");
  train->add_option("--sine-hi", train_args.sine_hi, "Sine input range end");
  train->add_option("--sine-sigma", train_args.sine_sigma,
                    "Sine target noise std");
  train->add_option("--arch", train_args.arch,
                    "Architecture, e.g. dense:100,relu,dropout:0.1,dense:1")
      ->required();
  train->add_option("--epochs", train_args.config.epochs, "Training epochs");
  train->add_option("--batch-size", train_args.config.batch_size,
                    "Mini-batch size");
  train->add_option("--lr", train_args.config.learning_rate, "Learning rate");
  train->add_option("--momentum", train_args.config.momentum, "SGD momentum");
  train->add_option("--seed", train_args.config.seed, "Random seed");
  train->add_option("--model-out", train_args.model_out, "Output model path")
      ->required();
  train->add_option("--loss-csv", train_args.loss_csv,
                    "Write per-epoch training loss CSV here");
  train->add_option("--out", train_args.out,
                    "Report path (default: stdout)");
  train->callback([&] { run_train(train_args); });

  PropagateArgs prop_args;
  CLI::App* propagate = app.add_subcommand(
      "propagate", "Analytic mean/covariance propagation through a model");
  propagate->add_option("--model", prop_args.model, "Model path")->required();
  propagate->add_option("--input", prop_args.input,
                        "Inline input values, comma separated");
  propagate->add_option("--input-file", prop_args.input_file,
                        "File with input values");
  propagate->add_option("--mode", prop_args.mode, "full or diagonal");
  propagate->add_option("--relu-rule", prop_args.relu_rule,
                        "taylor or exact-gaussian (diagonal mode)");
  propagate->add_option("--out", prop_args.out,
                        "Report path (default: stdout)");
  propagate->callback([&] { run_propagate(prop_args); });

  McArgs mc_args;
  CLI::App* mc = app.add_subcommand(
      "mc", "Monte-Carlo dropout moments over stochastic forward passes");
  mc->add_option("--model", mc_args.model, "Model path")->required();
  mc->add_option("--input", mc_args.input, "Inline input values");
  mc->add_option("--input-file", mc_args.input_file,
                 "File with input values");
  mc->add_option("--samples", mc_args.samples, "Sample count");
  mc->add_option("--seed", mc_args.seed, "Random seed");
  mc->add_option("--form", mc_args.form, "full or diagonal");
  mc->add_option("--workers", mc_args.workers,
                 "Worker threads (0: hardware default)");
  mc->add_option("--out", mc_args.out, "Report path (default: stdout)");
  mc->callback([&] { run_mc(mc_args); });

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand(
      "compare", "MC-to-analytic variance convergence curve");
  compare->add_option("--model", compare_args.model, "Model path")->required();
  compare->add_option("--input", compare_args.input, "Inline input values");
  compare->add_option("--input-file", compare_args.input_file,
                      "File with input values");
  compare->add_option("--samples", compare_args.samples,
                      "Sample counts, comma separated")
      ->delimiter(',');
  compare->add_option("--seed", compare_args.seed, "Random seed");
  compare->add_option("--mode", compare_args.mode,
                      "Reference propagation mode (full or diagonal)");
  compare->add_option("--workers", compare_args.workers, "Worker threads");
  compare->add_option("--out", compare_args.out,
                      "Report path (default: stdout)");
  compare->callback([&] { run_compare(compare_args); });

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand(
      "bench", "Wall-clock comparison of analytic propagation vs MC");
  bench->add_option("--model", bench_args.model, "Model path")->required();
  bench->add_option("--input", bench_args.input, "Inline input values");
  bench->add_option("--input-file", bench_args.input_file,
                    "File with input values");
  bench->add_option("--samples", bench_args.samples,
                    "MC sample counts, comma separated")
      ->delimiter(',');
  bench->add_option("--repeats", bench_args.repeats,
                    "Timing repeats (median reported, min 3)");
  bench->add_option("--out", bench_args.out, "Report path (default: stdout)");
  bench->callback([&] { run_bench(bench_args); });

  CLI::App* experiment =
      app.add_subcommand("experiment",
                         "End-to-end train-and-evaluate experiments");
  experiment->require_subcommand(1);

  SineExperimentConfig sine_cfg;
  std::string sine_out;
  CLI::App* sine = experiment->add_subcommand(
      "sine", "Noisy-sine regression: analytic vs MC uncertainty");
  sine->add_option("--train-n", sine_cfg.train_n, "Training points");
  sine->add_option("--epochs", sine_cfg.epochs, "Training epochs");
  sine->add_option("--batch-size", sine_cfg.batch_size, "Mini-batch size");
  sine->add_option("--lr", sine_cfg.learning_rate, "Learning rate");
  sine->add_option("--momentum", sine_cfg.momentum, "SGD momentum");
  sine->add_option("--noise-sigma", sine_cfg.noise_sigma,
                   "Target noise std");
  sine->add_option("--arch", sine_cfg.arch, "Architecture string");
  sine->add_option("--grid-step", sine_cfg.grid_step,
                   "Evaluation grid step");
  sine->add_option("--mc-samples", sine_cfg.mc_samples,
                   "MC samples per grid point");
  sine->add_option("--calibration-bins", sine_cfg.calibration_bins,
                   "Quantile bins for the calibration curve");
  sine->add_option("--seed", sine_cfg.seed, "Random seed");
  sine->add_option("--workers", sine_cfg.workers, "Worker threads");
  sine->add_option("--model-out", sine_cfg.model_out,
                   "Save the trained model here");
  sine->add_option("--out", sine_out, "Report path (default: stdout)");
  sine->callback([&] { emit_report(run_experiment_sine(sine_cfg), sine_out); });

  UciExperimentConfig uci_cfg;
  std::string uci_out;
  CLI::App* uci = experiment->add_subcommand(
      "uci", "Tabular regression: grid-searched RMSE and TLL, analytic vs MC");
  uci->add_option("--csv", uci_cfg.csv_path, "Dataset CSV")->required();
  uci->add_option("--target-col", uci_cfg.target_columns,
                  "Target column name (repeatable; default: last column)");
  uci->add_option("--splits", uci_cfg.splits, "Random train/val splits");
  uci->add_option("--train-fraction", uci_cfg.train_fraction,
                  "Training fraction per split");
  uci->add_option("--dropout-grid", uci_cfg.dropout_grid,
                  "Dropout rates to search")
      ->delimiter(',');
  uci->add_option("--tau-grid", uci_cfg.tau_grid,
                  "Observation precisions to search")
      ->delimiter(',');
  uci->add_option("--hidden", uci_cfg.hidden_units, "Hidden units");
  uci->add_option("--epochs", uci_cfg.epochs, "Training epochs");
  uci->add_option("--batch-size", uci_cfg.batch_size, "Mini-batch size");
  uci->add_option("--lr", uci_cfg.learning_rate, "Learning rate");
  uci->add_option("--momentum", uci_cfg.momentum, "SGD momentum");
  uci->add_option("--mc-samples", uci_cfg.mc_samples,
                  "MC samples per validation point");
  uci->add_option("--tll-samples", uci_cfg.tll_samples,
                  "Likelihood draws for the analytic path");
  uci->add_option("--seed", uci_cfg.seed, "Random seed");
  uci->add_option("--workers", uci_cfg.workers, "Worker threads");
  uci->add_option("--out", uci_out, "Report path (default: stdout)");
  uci->callback([&] { emit_report(run_experiment_uci(uci_cfg), uci_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const NumericError& e) {
    emit_error("numeric", e.what());
    return 1;
  } catch (const Error& e) {
    emit_error(error_kind(e), e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 1;
  }
  return 0;
}

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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "varprop/network.hpp"
#include "varprop/serialize.hpp"
#include "varprop/tensor.hpp"

namespace {

using nlohmann::json;

#ifndef VARPROP_CLI_PATH
#error "VARPROP_CLI_PATH must point at the command-line binary"
#endif

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string out_path = "./cli_out_" + std::to_string(counter) + ".txt";
  const std::string err_path = "./cli_err_" + std::to_string(counter) + ".txt";
  ++counter;
  const std::string cmd = std::string(VARPROP_CLI_PATH) + " " + args + " > " +
                          out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return result;
}

const char* kTinyModelPath = "./cli_tiny_model.json";

void write_tiny_model() {
  varprop::NetworkSpec net;
  net.input_shape = {2};
  varprop::DenseLayer first;
  first.weights = varprop::Tensor::matrix(3, 2, {0.5, -0.2,
                                                 0.8, 0.3,
                                                 -0.4, 0.6});
  first.bias = varprop::Tensor({3}, {0.1, -0.1, 0.2});
  net.layers.emplace_back(std::move(first));
  net.layers.emplace_back(varprop::ReluLayer{});
  net.layers.emplace_back(
      varprop::DropoutLayer{0.3, varprop::DropoutConvention::kStandard});
  varprop::DenseLayer second;
  second.weights = varprop::Tensor::matrix(2, 3, {1.0, -0.5, 0.25,
                                                  0.75, 0.5, -1.0});
  second.bias = varprop::Tensor({2}, {0.05, -0.05});
  net.layers.emplace_back(std::move(second));
  varprop::save_model_file(net, kTinyModelPath);
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("unknown-subcommand").exit_code == 2);
  CHECK(run_cli("propagate").exit_code == 2);  // missing --model
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("propagate --help").exit_code == 0);
}

TEST_CASE("missing model file reports a structured parse error") {
  const RunResult r =
      run_cli("propagate --model ./no_such_model.json --input 1,2");
  CHECK(r.exit_code == 2);
  const json err = json::parse(r.err);
  CHECK(err.contains("error"));
  CHECK(err["error"]["type"] == "parse");
  CHECK(err["error"]["message"].get<std::string>().find("no_such_model") !=
        std::string::npos);
}

TEST_CASE("propagate emits the fixed report key order") {
  write_tiny_model();
  const RunResult r = run_cli(std::string("propagate --model ") +
                              kTinyModelPath + " --input 0.5,1.5 --mode full");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["command"] == "propagate");
  CHECK(report.contains("config"));
  CHECK(report.contains("metrics"));
  CHECK(report.contains("series"));
  CHECK(report.contains("timings"));
  CHECK(report.contains("numerical_quality"));
  CHECK(report["data"].contains("mean"));
  CHECK(report["data"].contains("covariance"));
  CHECK(report["numerical_quality"].contains("variance_clamps"));

  // Top-level key order is part of the format.
  const std::string text = r.out;
  const std::size_t at_command = text.find("\"command\"");
  const std::size_t at_config = text.find("\"config\"");
  const std::size_t at_metrics = text.find("\"metrics\"");
  const std::size_t at_series = text.find("\"series\"");
  const std::size_t at_timings = text.find("\"timings\"");
  const std::size_t at_quality = text.find("\"numerical_quality\"");
  const std::size_t at_data = text.find("\"data\"");
  CHECK(at_command < at_config);
  CHECK(at_config < at_metrics);
  CHECK(at_metrics < at_series);
  CHECK(at_series < at_timings);
  CHECK(at_timings < at_quality);
  CHECK(at_quality < at_data);

  const RunResult diag = run_cli(std::string("propagate --model ") +
                                 kTinyModelPath +
                                 " --input 0.5,1.5 --mode diagonal");
  REQUIRE(diag.exit_code == 0);
  const json diag_report = json::parse(diag.out);
  CHECK(diag_report["data"].contains("variance"));

  const RunResult bad_mode = run_cli(std::string("propagate --model ") +
                                     kTinyModelPath +
                                     " --input 0.5,1.5 --mode banana");
  CHECK(bad_mode.exit_code == 2);
  CHECK(json::parse(bad_mode.err)["error"]["type"] == "config");
}

TEST_CASE("propagate validates the input vector") {
  write_tiny_model();
  const RunResult wrong_len = run_cli(std::string("propagate --model ") +
                                      kTinyModelPath + " --input 1");
  CHECK(wrong_len.exit_code == 2);
  CHECK(json::parse(wrong_len.err)["error"]["type"] == "shape");

  const RunResult both = run_cli(std::string("propagate --model ") +
                                 kTinyModelPath +
                                 " --input 1,2 --input-file x.txt");
  CHECK(both.exit_code == 2);

  const RunResult garbage = run_cli(std::string("propagate --model ") +
                                    kTinyModelPath + " --input 1,abc");
  CHECK(garbage.exit_code == 2);
  CHECK(json::parse(garbage.err)["error"]["type"] == "parse");
}

TEST_CASE("input file and inline input agree") {
  write_tiny_model();
  std::ofstream("./cli_input.txt") << " 0.5\n1.5 \n";
  const RunResult inline_r = run_cli(std::string("mc --model ") +
                                     kTinyModelPath +
                                     " --input 0.5,1.5 --samples 500");
  const RunResult file_r = run_cli(std::string("mc --model ") +
                                   kTinyModelPath +
                                   " --input-file ./cli_input.txt "
                                   "--samples 500");
  REQUIRE(inline_r.exit_code == 0);
  REQUIRE(file_r.exit_code == 0);
  CHECK(inline_r.out == file_r.out);
  std::remove("./cli_input.txt");
}

TEST_CASE("mc runs are byte-reproducible across worker counts") {
  write_tiny_model();
  const std::string base = std::string("mc --model ") + kTinyModelPath +
                           " --input 0.5,1.5 --samples 4000 --seed 77 "
                           "--form full";
  const RunResult one = run_cli(base + " --workers 1");
  const RunResult four = run_cli(base + " --workers 4");
  REQUIRE(one.exit_code == 0);
  CHECK(one.out == four.out);

  const RunResult other_seed = run_cli(base + " --workers 1 --seed 78");
  CHECK(other_seed.out != one.out);
}

TEST_CASE("compare produces a decreasing convergence series") {
  write_tiny_model();
  const RunResult r = run_cli(std::string("compare --model ") +
                              kTinyModelPath +
                              " --input 0.5,1.5 --samples 10,100,1000,10000 "
                              "--seed 5");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  const auto& series = report["series"]["convergence"];
  REQUIRE(series.size() == 4);
  const double first = series[0][1].get<double>();
  const double last = series[3][1].get<double>();
  CHECK(last < first);
  CHECK(report["metrics"].contains("loglog_slope"));
}

TEST_CASE("train subcommand writes a loadable model and a report") {
  const RunResult r = run_cli(
      "train --sine-n 120 --arch dense:8,relu,dropout:0.2,dense:1 "
      "--epochs 15 --seed 4 --model-out ./cli_trained.json "
      "--loss-csv ./cli_loss.csv");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["command"] == "train");
  CHECK(report["metrics"].contains("final_train_loss"));

  const varprop::NetworkSpec net =
      varprop::load_model_file("./cli_trained.json");
  CHECK(net.layers.size() == 4);

  const std::string loss_csv = slurp("./cli_loss.csv");
  CHECK(loss_csv.find("epoch,loss") == 0);

  // Same training run twice: byte-identical model on disk.
  const RunResult again = run_cli(
      "train --sine-n 120 --arch dense:8,relu,dropout:0.2,dense:1 "
      "--epochs 15 --seed 4 --model-out ./cli_trained_2.json");
  REQUIRE(again.exit_code == 0);
  CHECK(slurp("./cli_trained.json") == slurp("./cli_trained_2.json"));

  std::remove("./cli_trained.json");
  std::remove("./cli_trained_2.json");
  std::remove("./cli_loss.csv");
}

TEST_CASE("bench reports timings with repeat counts") {
  write_tiny_model();
  const RunResult r = run_cli(std::string("bench --model ") + kTinyModelPath +
                              " --input 0.5,1.5 --samples 1,2,5,10 "
                              "--repeats 3");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["timings"].size() == 3);
  for (const auto& t : report["timings"]) {
    CHECK(t["repeats"].get<int>() >= 3);
    CHECK(t["seconds"].get<double>() > 0.0);
  }
  CHECK(report["metrics"].contains("mc_fit_r_squared"));
  CHECK(report["series"]["mc_seconds"].size() == 4);

  const RunResult too_few = run_cli(std::string("bench --model ") +
                                    kTinyModelPath +
                                    " --input 0.5,1.5 --repeats 2");
  CHECK(too_few.exit_code == 2);
}

TEST_CASE("numeric failures exit with code 1") {
  const RunResult r = run_cli(
      "train --sine-n 50 --arch dense:8,relu,dropout:0.2,dense:1 "
      "--epochs 40 --lr 1e18 --seed 1 --model-out ./cli_diverged.json");
  CHECK(r.exit_code == 1);
  const json err = json::parse(r.err);
  CHECK(err["error"]["type"] == "numeric");
  std::remove("./cli_diverged.json");
}

TEST_CASE("propagate with a zero-rate model reports zero variance") {
  varprop::NetworkSpec net;
  net.input_shape = {2};
  net.layers.emplace_back(
      varprop::DropoutLayer{0.0, varprop::DropoutConvention::kStandard});
  varprop::DenseLayer dense;
  dense.weights = varprop::Tensor::matrix(1, 2, {1.0, 1.0});
  dense.bias = varprop::Tensor({1});
  net.layers.emplace_back(std::move(dense));
  varprop::save_model_file(net, "./cli_zero_rate.json");

  const RunResult r = run_cli(
      "propagate --model ./cli_zero_rate.json --input 1,2 --mode diagonal");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["data"]["variance"][0].get<double>() == 0.0);
  CHECK(report["metrics"]["total_variance"].get<double>() == 0.0);
  std::remove("./cli_zero_rate.json");
}

TEST_CASE("report files are written when --out is given") {
  write_tiny_model();
  const RunResult r = run_cli(std::string("mc --model ") + kTinyModelPath +
                              " --input 0.5,1.5 --samples 200 "
                              "--out ./cli_report.json");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.empty());
  const json report = json::parse(slurp("./cli_report.json"));
  CHECK(report["command"] == "mc");
  std::remove("./cli_report.json");
}

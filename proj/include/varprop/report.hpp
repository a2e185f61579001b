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

#ifndef VARPROP_REPORT_HPP_
#define VARPROP_REPORT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "varprop/moments.hpp"
#include "varprop/tensor.hpp"

namespace varprop {

/// Machine-readable result document emitted by every CLI subcommand.
/// Entries keep insertion order; the JSON rendering always contains the
/// keys command, config, metrics, series, timings, numerical_quality and
/// data, in that order, so consumers can rely on the schema.
struct ExperimentReport {
  struct Timing {
    std::string name;
    double seconds = 0.0;
    std::size_t repeats = 0;
  };

  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>
      series;
  std::vector<Timing> timings;
  ClampStats clamps;
  std::vector<std::pair<std::string, Tensor>> data;

  void add_config(const std::string& key, const std::string& value);
  void add_config(const std::string& key, double value);
  void add_config(const std::string& key, std::size_t value);
  void add_metric(const std::string& key, double value);
  void add_series(const std::string& key,
                  std::vector<std::pair<double, double>> points);
  void add_timing(const std::string& name, double seconds,
                  std::size_t repeats);
  void add_data(const std::string& key, Tensor value);
};

/// Canonical JSON rendering (fixed key order, 17-digit floats, trailing
/// newline). Throws NumericError on a non-finite metric.
std::string report_to_json(const ExperimentReport& report);

}  // namespace varprop

#endif  // VARPROP_REPORT_HPP_

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

#include "varprop/report.hpp"

#include <cmath>
#include <sstream>

#include "varprop/errors.hpp"
#include "varprop/serialize.hpp"

namespace varprop {

void ExperimentReport::add_config(const std::string& key,
                                  const std::string& value) {
  config.emplace_back(key, value);
}

void ExperimentReport::add_config(const std::string& key, double value) {
  config.emplace_back(key, format_double(value));
}

void ExperimentReport::add_config(const std::string& key, std::size_t value) {
  config.emplace_back(key, std::to_string(value));
}

void ExperimentReport::add_metric(const std::string& key, double value) {
  if (!std::isfinite(value)) {
    throw NumericError("report metric \"" + key + "\" is not finite");
  }
  metrics.emplace_back(key, value);
}

void ExperimentReport::add_series(
    const std::string& key, std::vector<std::pair<double, double>> points) {
  series.emplace_back(key, std::move(points));
}

void ExperimentReport::add_timing(const std::string& name, double seconds,
                                  std::size_t repeats) {
  timings.push_back({name, seconds, repeats});
}

void ExperimentReport::add_data(const std::string& key, Tensor value) {
  data.emplace_back(key, std::move(value));
}

namespace {

std::string json_escaped(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        out += c;
    }
  }
  return out;
}

void write_tensor_flat(std::ostream& out, const Tensor& t, std::size_t dim,
                       std::size_t& offset) {
  out << "[";
  if (dim + 1 == t.rank()) {
    for (std::size_t i = 0; i < t.extent(dim); ++i) {
      if (i > 0) out << ", ";
      out << format_double(t[offset++]);
    }
  } else {
    for (std::size_t i = 0; i < t.extent(dim); ++i) {
      if (i > 0) out << ", ";
      write_tensor_flat(out, t, dim + 1, offset);
    }
  }
  out << "]";
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
  std::ostringstream out;
  out << "{\n  \"command\": \"" << json_escaped(report.command) << "\",\n";

  out << "  \"config\": {";
  for (std::size_t i = 0; i < report.config.size(); ++i) {
    out << (i > 0 ? ",\n    " : "\n    ");
    out << "\"" << json_escaped(report.config[i].first) << "\": \""
        << json_escaped(report.config[i].second) << "\"";
  }
  out << (report.config.empty() ? "},\n" : "\n  },\n");

  out << "  \"metrics\": {";
  for (std::size_t i = 0; i < report.metrics.size(); ++i) {
    out << (i > 0 ? ",\n    " : "\n    ");
    out << "\"" << json_escaped(report.metrics[i].first)
        << "\": " << format_double(report.metrics[i].second);
  }
  out << (report.metrics.empty() ? "},\n" : "\n  },\n");

  out << "  \"series\": {";
  for (std::size_t i = 0; i < report.series.size(); ++i) {
    out << (i > 0 ? ",\n    " : "\n    ");
    out << "\"" << json_escaped(report.series[i].first) << "\": [";
    const auto& points = report.series[i].second;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j > 0) out << ", ";
      out << "[" << format_double(points[j].first) << ", "
          << format_double(points[j].second) << "]";
    }
    out << "]";
  }
  out << (report.series.empty() ? "},\n" : "\n  },\n");

  out << "  \"timings\": {";
  for (std::size_t i = 0; i < report.timings.size(); ++i) {
    out << (i > 0 ? ",\n    " : "\n    ");
    const auto& t = report.timings[i];
    out << "\"" << json_escaped(t.name) << "\": {\"seconds\": "
        << format_double(t.seconds) << ", \"repeats\": " << t.repeats << "}";
  }
  out << (report.timings.empty() ? "},\n" : "\n  },\n");

  out << "  \"numerical_quality\": {\"variance_clamps\": "
      << report.clamps.count << ", \"max_clamp_magnitude\": "
      << format_double(report.clamps.max_magnitude) << ", \"warning\": "
      << (report.clamps.max_magnitude > 1e-9 ? "true" : "false") << "},\n";

  out << "  \"data\": {";
  for (std::size_t i = 0; i < report.data.size(); ++i) {
    out << (i > 0 ? ",\n    " : "\n    ");
    out << "\"" << json_escaped(report.data[i].first) << "\": ";
    std::size_t offset = 0;
    write_tensor_flat(out, report.data[i].second, 0, offset);
  }
  out << (report.data.empty() ? "}\n" : "\n  }\n");
  out << "}\n";
  return out.str();
}

}  // namespace varprop

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

#include "varprop/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "varprop/errors.hpp"

namespace varprop {

using nlohmann::json;

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw NumericError("cannot serialize non-finite value");
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::string layer_context(std::size_t index) {
  return "layer " + std::to_string(index);
}

// Nested-array JSON -> Tensor. Extents are taken from the first element at
// each depth; ragged nesting is rejected.
void read_nested(const json& node, std::size_t depth,
                 std::vector<std::size_t>& shape, std::vector<double>& data,
                 const std::string& where) {
  if (node.is_array()) {
    if (depth == shape.size()) {
      shape.push_back(node.size());
    } else if (node.size() != shape[depth]) {
      throw ParseError(where + ": ragged array (expected " +
                       std::to_string(shape[depth]) + " elements, got " +
                       std::to_string(node.size()) + ")");
    }
    for (const json& child : node) {
      read_nested(child, depth + 1, shape, data, where);
    }
    return;
  }
  if (!node.is_number()) {
    throw ParseError(where + ": expected a number, got " +
                     std::string(node.type_name()));
  }
  if (depth != shape.size()) {
    throw ParseError(where + ": ragged nesting depth");
  }
  data.push_back(node.get<double>());
}

Tensor read_tensor(const json& node, std::size_t expected_rank,
                   const std::string& where) {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  read_nested(node, 0, shape, data, where);
  if (shape.size() != expected_rank) {
    throw ParseError(where + ": expected rank " +
                     std::to_string(expected_rank) + ", got " +
                     std::to_string(shape.size()));
  }
  if (data.size() != shape_size(shape)) {
    throw ParseError(where + ": ragged array");
  }
  Tensor t(shape, std::move(data));
  if (!t.all_finite()) {
    throw ParseError(where + ": non-finite value");
  }
  return t;
}

const json& require_field(const json& obj, const char* key,
                          const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(where + ": missing field \"" + key + "\"");
  }
  return *it;
}

LayerSpec read_layer(const json& obj, std::size_t index) {
  const std::string where = layer_context(index);
  if (!obj.is_object()) {
    throw ParseError(where + ": expected an object");
  }
  const json& kind_node = require_field(obj, "kind", where);
  if (!kind_node.is_string()) {
    throw ParseError(where + ": \"kind\" must be a string");
  }
  const std::string kind = kind_node.get<std::string>();
  if (kind == "dense") {
    DenseLayer l;
    l.weights = read_tensor(require_field(obj, "weights", where), 2,
                            where + " weights");
    l.bias = read_tensor(require_field(obj, "bias", where), 1, where + " bias");
    return l;
  }
  if (kind == "conv2d") {
    Conv2dLayer l;
    l.kernel = read_tensor(require_field(obj, "kernel", where), 4,
                           where + " kernel");
    const json& pad = require_field(obj, "padding", where);
    const std::string pad_str = pad.is_string() ? pad.get<std::string>() : "";
    if (pad_str == "valid") {
      l.padding = Padding::kValid;
    } else if (pad_str == "same") {
      l.padding = Padding::kSame;
    } else {
      throw ParseError(where + ": padding must be \"valid\" or \"same\"");
    }
    return l;
  }
  if (kind == "relu") return ReluLayer{};
  if (kind == "sigmoid") return SigmoidLayer{};
  if (kind == "softmax") return SoftmaxLayer{};
  if (kind == "dropout") {
    DropoutLayer l;
    const json& rate = require_field(obj, "rate", where);
    if (!rate.is_number()) {
      throw ParseError(where + ": \"rate\" must be a number");
    }
    l.rate = rate.get<double>();
    if (!(l.rate >= 0.0 && l.rate < 1.0)) {
      throw ParseError(where + ": rate must lie in [0, 1), got " +
                       std::to_string(l.rate));
    }
    const json& conv = require_field(obj, "convention", where);
    const std::string conv_str =
        conv.is_string() ? conv.get<std::string>() : "";
    if (conv_str == "standard") {
      l.convention = DropoutConvention::kStandard;
    } else if (conv_str == "inverted") {
      l.convention = DropoutConvention::kInverted;
    } else {
      throw ParseError(where +
                       ": convention must be \"standard\" or \"inverted\"");
    }
    return l;
  }
  throw ParseError(where + ": unknown layer kind \"" + kind + "\"");
}

}  // namespace

NetworkSpec load_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    // Covers syntax errors and number overflow ("1e999") alike.
    throw ParseError(std::string("model document: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("model document: top level must be an object");
  }
  NetworkSpec net;
  const json& shape_node = require_field(doc, "input_shape", "model document");
  if (!shape_node.is_array() || shape_node.empty()) {
    throw ParseError("model document: \"input_shape\" must be a nonempty array");
  }
  for (const json& e : shape_node) {
    if (!e.is_number_unsigned() || e.get<std::size_t>() == 0) {
      throw ParseError("model document: input_shape extents must be positive integers");
    }
    net.input_shape.push_back(e.get<std::size_t>());
  }
  const json& layers_node = require_field(doc, "layers", "model document");
  if (!layers_node.is_array()) {
    throw ParseError("model document: \"layers\" must be an array");
  }
  for (std::size_t i = 0; i < layers_node.size(); ++i) {
    net.layers.push_back(read_layer(layers_node[i], i));
  }
  try {
    infer_shapes(net);  // validates inter-layer compatibility
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return net;
}

NetworkSpec load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open model file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

namespace {

// Canonical nested-array rendering, one innermost row per line.
void write_nested(std::ostream& out, const Tensor& t, std::size_t dim,
                  std::size_t& offset, const std::string& indent) {
  if (dim + 1 == t.rank()) {
    out << "[";
    for (std::size_t i = 0; i < t.extent(dim); ++i) {
      if (i > 0) out << ", ";
      out << format_double(t[offset++]);
    }
    out << "]";
    return;
  }
  out << "[\n";
  const std::string inner = indent + "  ";
  for (std::size_t i = 0; i < t.extent(dim); ++i) {
    out << inner;
    write_nested(out, t, dim + 1, offset, inner);
    if (i + 1 < t.extent(dim)) out << ",";
    out << "\n";
  }
  out << indent << "]";
}

void write_tensor(std::ostream& out, const Tensor& t,
                  const std::string& indent) {
  std::size_t offset = 0;
  write_nested(out, t, 0, offset, indent);
}

}  // namespace

std::string save_model(const NetworkSpec& net) {
  std::ostringstream out;
  out << "{\n  \"input_shape\": [";
  for (std::size_t i = 0; i < net.input_shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << net.input_shape[i];
  }
  out << "],\n  \"layers\": [";
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out << (i > 0 ? ",\n    {" : "\n    {");
    const LayerSpec& layer = net.layers[i];
    out << "\n      \"kind\": \"" << layer_kind(layer) << "\"";
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      out << ",\n      \"weights\": ";
      write_tensor(out, dense->weights, "      ");
      out << ",\n      \"bias\": ";
      write_tensor(out, dense->bias, "      ");
    } else if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
      out << ",\n      \"kernel\": ";
      write_tensor(out, conv->kernel, "      ");
      out << ",\n      \"padding\": \""
          << (conv->padding == Padding::kValid ? "valid" : "same") << "\"";
    } else if (const auto* drop = std::get_if<DropoutLayer>(&layer)) {
      out << ",\n      \"rate\": " << format_double(drop->rate);
      out << ",\n      \"convention\": \""
          << (drop->convention == DropoutConvention::kStandard ? "standard"
                                                               : "inverted")
          << "\"";
    }
    out << "\n    }";
  }
  out << (net.layers.empty() ? "]\n}\n" : "\n  ]\n}\n");
  return out.str();
}

void save_model_file(const NetworkSpec& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write model file: " + path);
  }
  out << save_model(net);
}

}  // namespace varprop

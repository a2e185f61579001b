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

#ifndef VARPROP_SERIALIZE_HPP_
#define VARPROP_SERIALIZE_HPP_

#include <string>

#include "varprop/network.hpp"

namespace varprop {

/// Decimal rendering with 17 significant digits; parses back to the
/// identical double. Integral values render without an exponent or
/// trailing zeros ("1", not "1.0000000000000000e+00").
std::string format_double(double value);

/// Parse the JSON model document described in docs/model_format.md.
/// Shape inference runs on the result, so structurally valid but
/// incompatible layer stacks are rejected here with the layer index.
NetworkSpec load_model(const std::string& text);
NetworkSpec load_model_file(const std::string& path);

/// Canonical JSON form: fixed key order, fixed indentation, 17-digit
/// floats. Byte-stable: save(load(save(net))) == save(net).
std::string save_model(const NetworkSpec& net);
void save_model_file(const NetworkSpec& net, const std::string& path);

}  // namespace varprop

#endif  // VARPROP_SERIALIZE_HPP_

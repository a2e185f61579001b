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

#ifndef VARPROP_ERRORS_HPP_
#define VARPROP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace varprop {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible tensor extents or layer dimensions.
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed input documents: model files, CSV datasets, report schemas.
struct ParseError : Error {
  using Error::Error;
};

/// Structurally valid input used in an unsupported way
/// (e.g. softmax in diagonal mode, propagation without a noise layer).
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failure at runtime (divergence, non-finite results).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace varprop

#endif  // VARPROP_ERRORS_HPP_

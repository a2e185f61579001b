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

#ifndef VARPROP_RNG_HPP_
#define VARPROP_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace varprop {

/// Counter-based pseudo-random stream (splitmix64 finalizer over a keyed
/// counter). Every draw is a pure function of (seed, stream, counter), so a
/// given stream produces the same sequence no matter which thread runs it.
/// A stream instance is owned by exactly one consumer at a time.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(derive_key(seed, stream)) {}

  std::uint64_t next_u64() { return mix(key_ + counter_++ * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double gaussian() {
    // (0, 1] so the log never sees zero.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed) ^ (stream * kGamma + 0xD1B54A32D192ED03ull));
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace varprop

#endif  // VARPROP_RNG_HPP_

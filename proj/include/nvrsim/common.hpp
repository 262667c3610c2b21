/*
 * Copyright 2026 The nvr-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file common.hpp
 * @brief Scalar aliases, the portable RNG and small bit helpers shared by every module.
 */

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nvrsim {

using Addr = std::uint64_t;
using Cycle = std::uint64_t;

/// Addresses live in a flat 48-bit byte space.
inline constexpr Addr kAddrMask = (Addr{1} << 48) - 1;

/// Raised for invalid arguments, geometries and config values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * SplitMix64 (Steele, Lea, Flood 2014). Chosen as the trace RNG because its
 * output is fully specified by a few lines of integer arithmetic, so traces
 * can be regenerated bit-for-bit by any other implementation.
 */
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) (Lemire's multiply-shift, bias < 2^-64·bound).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  /// Standard normal via Box-Muller (one value per call, the pair partner is discarded).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Derives an independent stream for a sub-task (cell, shard, matrix).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    SplitMix64 g(seed ^ (salt * 0xD1B54A32D192ED03ULL));
    return g.next();
  }

 private:
  std::uint64_t state_;
};

inline constexpr bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

inline constexpr unsigned log2_floor(std::uint64_t v) {
  return v == 0 ? 0u : static_cast<unsigned>(63 - std::countl_zero(v));
}

inline constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// 64-bit FNV-1a, used for trace header spec hashes.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace nvrsim

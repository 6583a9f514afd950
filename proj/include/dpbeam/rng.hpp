// Copyright 2026 The dpbeamsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Seeded random sources. Every stochastic quantity in the simulator is drawn
// from a generator whose seed is derived from (base seed, stream tags) by the
// counter scheme below, so that results do not depend on evaluation order or
// on how work is split across threads.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include "dpbeam/common.hpp"

namespace dpbeam {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the stream identified by `tags` under `base`. Each tag is folded
/// in with one SplitMix64 round, so (1, 2) and (2, 1) give unrelated seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base ^ 0x6A09E667F3BCC908ULL);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x3C6EF372FE94F82BULL));
  return h;
}

/// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, so one can
/// be keyed per (trial, snapshot, angle).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits; identical on every
/// standard library, unlike std::uniform_real_distribution.
template <class Urbg>
double unit_uniform(Urbg& g) {
  static_assert(Urbg::max() == std::numeric_limits<std::uint64_t>::max());
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
template <class Urbg>
cplx complex_gaussian(Urbg& g, double variance) {
  if (variance == 0.0) return {};
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  double re = n(g);
  double im = n(g);
  return {re, im};
}

}  // namespace dpbeam

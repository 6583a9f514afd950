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

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dpbeam {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 2.998e8;  // m/s
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Error taxonomy. Every public operation reports failures by throwing one of
// these; callers that need error codes map them at the CLI boundary.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateChannel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wraps an angle into [-pi, pi).
inline double wrap_to_pi(double x) {
  double r = x - kTwoPi * std::floor((x + kPi) / kTwoPi);
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r += kTwoPi;
  return r;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double wavelength(double carrier_hz) { return kSpeedOfLight / carrier_hz; }

}  // namespace dpbeam

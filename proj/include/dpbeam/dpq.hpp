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

// Uniform angle grids, nearest-level quantization, and the epsilon-DP
// stochastic quantizer (DP-SQ) that releases one of the two levels bracketing
// an angle: the nearer with probability e^eps / (e^eps + 1), the farther
// otherwise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dpbeam/common.hpp"
#include "dpbeam/givens.hpp"
#include "dpbeam/rng.hpp"

namespace dpbeam {

enum class AngleKind { Phase, Mixing };

/// L = 2^bits levels q_j = a_min + j*step. Phase grids cover [-pi, pi)
/// circularly; mixing grids cover [0, pi/2] with the top cell clamped.
struct QuantGrid {
  AngleKind kind = AngleKind::Phase;
  unsigned bits = 1;

  QuantGrid() = default;
  QuantGrid(AngleKind k, unsigned b) : kind(k), bits(b) {
    if (b == 0 || b > 16) throw InvalidInput("QuantGrid: bits must be in [1, 16]");
  }

  std::size_t levels() const { return std::size_t{1} << bits; }
  double range() const { return kind == AngleKind::Phase ? kTwoPi : kPi / 2; }
  double step() const { return range() / static_cast<double>(levels()); }
  double origin() const { return kind == AngleKind::Phase ? -kPi : 0.0; }
  double level(std::size_t j) const { return origin() + static_cast<double>(j) * step(); }
};

struct Bracket {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double offset = 0.0;  // a - q_lo, in [0, step]
};

/// Signed error of releasing `level_value` for `a`; circular for phases.
inline double angle_error(const QuantGrid& g, double level_value, double a) {
  return g.kind == AngleKind::Phase ? wrap_to_pi(level_value - a) : level_value - a;
}

inline Bracket bracket(const QuantGrid& g, double a) {
  const std::size_t L = g.levels();
  const double d = g.step();
  Bracket b;
  if (g.kind == AngleKind::Phase) {
    const double x = wrap_to_pi(a);
    auto lo = static_cast<std::size_t>(std::max(0.0, std::floor((x + kPi) / d)));
    if (lo > L - 1) lo = L - 1;
    b.lo = lo;
    b.hi = (lo + 1) % L;
    b.offset = std::clamp(x - g.level(lo), 0.0, d);
    return b;
  }
  // Mixing: anything at or above the top level is pinned to it and paired
  // with the level below, so the release stays two-point.
  const double top = g.level(L - 1);
  const double x = std::clamp(a, 0.0, kPi / 2);
  if (x >= top) {
    b.lo = L - 2;
    b.hi = L - 1;
    b.offset = d;
    return b;
  }
  auto lo = static_cast<std::size_t>(std::floor(x / d));
  if (lo > L - 2) lo = L - 2;
  b.lo = lo;
  b.hi = lo + 1;
  b.offset = std::clamp(x - g.level(lo), 0.0, d);
  return b;
}

/// Index of the nearer bracketing level; an exact midpoint goes to `lo`.
inline std::size_t quantize_det(const QuantGrid& g, double a) {
  const Bracket b = bracket(g, a);
  return b.offset <= 0.5 * g.step() ? b.lo : b.hi;
}

/// (e^eps - 1) / (e^eps + 1) = tanh(eps / 2).
inline double kappa(double eps) {
  if (!(eps > 0.0)) throw InvalidInput("kappa: epsilon must be positive");
  if (std::isinf(eps)) return 1.0;
  return std::tanh(0.5 * eps);
}

/// Probability of releasing the nearer level, e^eps / (e^eps + 1).
inline double p_star(double eps) {
  if (!(eps > 0.0)) throw InvalidInput("p_star: epsilon must be positive");
  if (std::isinf(eps)) return 1.0;
  return 1.0 / (1.0 + std::exp(-eps));
}

/// DP-SQ release driven by an externally drawn u ~ Uniform[0, 1).
inline std::size_t quantize_dpsq_u(const QuantGrid& g, double a, double eps, double u) {
  const double p = p_star(eps);
  const Bracket b = bracket(g, a);
  const bool lo_is_near = b.offset <= 0.5 * g.step();
  const std::size_t near = lo_is_near ? b.lo : b.hi;
  const std::size_t far = lo_is_near ? b.hi : b.lo;
  return u < p ? near : far;
}

template <class Urbg>
std::size_t quantize_dpsq(const QuantGrid& g, double a, double eps, Urbg& rng) {
  if (!(eps > 0.0)) throw InvalidInput("quantize_dpsq: epsilon must be positive");
  return quantize_dpsq_u(g, a, eps, unit_uniform(rng));
}

/// Closed-form DP-SQ angle MSE for cell-uniform inputs, (step^2/12)(4 - 3 kappa).
inline double mse_predicted(const QuantGrid& g, double eps) {
  const double d = g.step();
  return d * d / 12.0 * (4.0 - 3.0 * kappa(eps));
}

/// (step^2/12)(4 - 6p + 6p^2), the fixed-probability expression as commonly
/// quoted. Reporting only: it does not agree with mse_predicted at any p.
inline double mse_fixed_p(const QuantGrid& g, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("mse_fixed_p: p must be in (0, 1]");
  const double d = g.step();
  return d * d / 12.0 * (4.0 - 6.0 * p + 6.0 * p * p);
}

// ---------------------------------------------------------------------------
// Privacy accounting

struct PrivacyBudget {
  double eps_phi = 0.1;
  double eps_psi = 0.1;
  double delta = 1e-5;
  std::uint64_t releases = 0;

  void validate() const {
    if (!(eps_phi > 0.0) || !(eps_psi > 0.0)) throw InvalidInput("PrivacyBudget: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("PrivacyBudget: delta must be in (0, 1)");
  }
  double max_eps() const { return std::max(eps_phi, eps_psi); }
  void record(std::uint64_t n = 1) { releases += n; }
};

/// Advanced composition over k releases at eps = max(eps_phi, eps_psi):
/// sqrt(2k ln(1/delta)) eps + k eps (e^eps - 1).
inline double compose_budget(const PrivacyBudget& b, std::uint64_t k) {
  if (!(b.delta > 0.0 && b.delta < 1.0)) throw InvalidInput("compose_budget: delta must be in (0, 1)");
  if (k == 0) throw InvalidInput("compose_budget: k must be at least 1");
  if (!(b.eps_phi >= 0.0) || !(b.eps_psi >= 0.0) || std::isinf(b.max_eps()))
    throw InvalidInput("compose_budget: epsilon must be finite");
  const double eps = b.max_eps();
  const auto kd = static_cast<double>(k);
  return std::sqrt(2.0 * kd * std::log(1.0 / b.delta)) * eps + kd * eps * std::expm1(eps);
}

/// Composition over the releases recorded so far.
inline double compose_budget(const PrivacyBudget& b) { return compose_budget(b, b.releases); }

// ---------------------------------------------------------------------------
// Whole-precoder quantization

struct FeedbackGrids {
  QuantGrid phase{AngleKind::Phase, 6};
  QuantGrid mixing{AngleKind::Mixing, 3};
};

/// Quantized angle indices of one precoder, in GivensAngles order.
struct AngleIndices {
  std::size_t n_t = 0;
  std::size_t n_s = 0;
  std::vector<std::uint32_t> phases;
  std::vector<std::uint32_t> mixings;
};

inline AngleIndices quantize_angles_det(const GivensAngles& a, const FeedbackGrids& g) {
  AngleIndices out{a.n_t, a.n_s, {}, {}};
  out.phases.reserve(a.phases.size());
  out.mixings.reserve(a.mixings.size());
  for (double p : a.phases) out.phases.push_back(static_cast<std::uint32_t>(quantize_det(g.phase, p)));
  for (double m : a.mixings) out.mixings.push_back(static_cast<std::uint32_t>(quantize_det(g.mixing, m)));
  return out;
}

/// One independent DP-SQ draw per angle. The draw for angle j comes from a
/// generator keyed by (key, j), so a report is reproducible on its own.
/// Phases use angle slots [0, N) and mixings [N, 2N).
inline AngleIndices quantize_angles_dpsq(const GivensAngles& a, const FeedbackGrids& g,
                                         const PrivacyBudget& budget, std::uint64_t key) {
  AngleIndices out{a.n_t, a.n_s, {}, {}};
  const std::size_t n = a.phases.size();
  out.phases.reserve(n);
  out.mixings.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    SplitMix64 r(derive_seed(key, {j}));
    out.phases.push_back(static_cast<std::uint32_t>(quantize_dpsq(g.phase, a.phases[j], budget.eps_phi, r)));
  }
  for (std::size_t j = 0; j < n; ++j) {
    SplitMix64 r(derive_seed(key, {n + j}));
    out.mixings.push_back(static_cast<std::uint32_t>(quantize_dpsq(g.mixing, a.mixings[j], budget.eps_psi, r)));
  }
  return out;
}

/// Grid values of quantized indices.
inline GivensAngles dequantize(const AngleIndices& idx, const FeedbackGrids& g) {
  GivensAngles a;
  a.n_t = idx.n_t;
  a.n_s = idx.n_s;
  a.phases.reserve(idx.phases.size());
  a.mixings.reserve(idx.mixings.size());
  for (auto j : idx.phases) {
    if (j >= g.phase.levels()) throw InvalidInput("dequantize: phase index out of range");
    a.phases.push_back(g.phase.level(j));
  }
  for (auto j : idx.mixings) {
    if (j >= g.mixing.levels()) throw InvalidInput("dequantize: mixing index out of range");
    a.mixings.push_back(g.mixing.level(j));
  }
  return a;
}

}  // namespace dpbeam

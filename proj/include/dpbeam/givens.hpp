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

// Givens/phase angle parametrization of a semi-unitary precoder.
//
// An n_t x n_s matrix with orthonormal columns is written, up to a phase on
// each column, as
//
//   V = prod_{i=1}^{min(n_s, n_t-1)} [ D_i * prod_{l=i+1}^{n_t} G_{l,i}(psi_{l,i}) ] * E_{n_s}
//
// where D_i = diag(1..1, e^{j phi_{i,i}}, .., e^{j phi_{n_t-1,i}}, 1) and
// G_{l,i}(psi) rotates the (i, l) coordinate plane so that e_i maps to
// cos(psi) e_i + sin(psi) e_l. Column i therefore carries n_t - i phases and
// n_t - i mixing angles.

#include <cstddef>
#include <vector>

#include "dpbeam/cmatrix.hpp"
#include "dpbeam/common.hpp"

namespace dpbeam {

/// Number of columns that carry angles for an (n_t, n_s) precoder.
inline std::size_t angle_columns(std::size_t n_t, std::size_t n_s) {
  return std::min(n_s, n_t - 1);
}

/// Total phase (equivalently, mixing) angle count: n_s*n_t - n_s(n_s+1)/2.
inline std::size_t angle_count(std::size_t n_t, std::size_t n_s) {
  std::size_t total = 0;
  for (std::size_t i = 1; i <= angle_columns(n_t, n_s); ++i) total += n_t - i;
  return total;
}

/// Ordered angle set. Both sequences are column-major: all angles of column
/// 1, then column 2, and so on; within a column phases run over rows i..n_t-1
/// and mixings over rows i+1..n_t.
struct GivensAngles {
  std::size_t n_t = 0;
  std::size_t n_s = 0;
  std::vector<double> phases;   // [-pi, pi)
  std::vector<double> mixings;  // [0, pi/2]

  /// Throws InvalidInput unless counts and domains are consistent.
  void validate() const {
    if (n_t == 0 || n_s == 0 || n_s > n_t) throw InvalidInput("GivensAngles: invalid shape");
    const std::size_t n = angle_count(n_t, n_s);
    if (phases.size() != n || mixings.size() != n)
      throw InvalidInput("GivensAngles: angle count does not match shape");
    for (double p : phases)
      if (!(p >= -kPi && p < kPi)) throw InvalidInput("GivensAngles: phase outside [-pi, pi)");
    for (double m : mixings)
      if (!(m >= 0.0 && m <= kPi / 2)) throw InvalidInput("GivensAngles: mixing outside [0, pi/2]");
  }
};

namespace detail {

// rows (i, l) <- G_{l,i}(psi)^T applied from the left
inline void rotate_rows_forward(ComplexMatrix& m, Eigen::Index i, Eigen::Index l, double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    const cplx a = m(i, col);
    const cplx b = m(l, col);
    m(i, col) = c * a - s * b;
    m(l, col) = s * a + c * b;
  }
}

// rows (i, l) <- G_{l,i}(psi) applied from the left (the inverse rotation)
inline void rotate_rows_inverse(ComplexMatrix& m, Eigen::Index i, Eigen::Index l, double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    const cplx a = m(i, col);
    const cplx b = m(l, col);
    m(i, col) = c * a + s * b;
    m(l, col) = -s * a + c * b;
  }
}

}  // namespace detail

/// Rebuilds the n_t x n_s precoder from its angles. The result has
/// orthonormal columns for any in-domain angle values, quantized or not.
inline ComplexMatrix reconstruct(const GivensAngles& angles) {
  angles.validate();
  const auto n_t = static_cast<Eigen::Index>(angles.n_t);
  const auto n_s = static_cast<Eigen::Index>(angles.n_s);
  ComplexMatrix v = ComplexMatrix::Identity(n_t, n_s);

  const auto cols = static_cast<Eigen::Index>(angle_columns(angles.n_t, angles.n_s));
  // Offsets of each column's block inside the flat angle sequences.
  std::vector<std::size_t> offset(static_cast<std::size_t>(cols) + 1, 0);
  for (Eigen::Index i = 0; i < cols; ++i)
    offset[static_cast<std::size_t>(i) + 1] =
        offset[static_cast<std::size_t>(i)] + static_cast<std::size_t>(n_t - 1 - i);

  for (Eigen::Index i = cols - 1; i >= 0; --i) {
    const std::size_t base = offset[static_cast<std::size_t>(i)];
    for (Eigen::Index l = n_t - 1; l > i; --l)
      detail::rotate_rows_forward(v, i, l, angles.mixings[base + static_cast<std::size_t>(l - i - 1)]);
    for (Eigen::Index k = i; k < n_t - 1; ++k)
      v.row(k) *= std::polar(1.0, angles.phases[base + static_cast<std::size_t>(k - i)]);
  }
  return v;
}

/// Angles of a matrix with orthonormal columns. reconstruct() of the result
/// spans the same subspace as the input; column phases are not preserved.
inline GivensAngles decompose(const ComplexMatrix& v_in, double tol = kOrthonormalTol) {
  if (v_in.cols() > v_in.rows() || !has_orthonormal_columns(v_in, tol))
    throw InvalidInput("decompose: input does not have orthonormal columns");

  ComplexMatrix w = v_in;
  const Eigen::Index n_t = w.rows();
  const Eigen::Index n_s = w.cols();
  const auto cols = static_cast<Eigen::Index>(
      angle_columns(static_cast<std::size_t>(n_t), static_cast<std::size_t>(n_s)));

  GivensAngles out;
  out.n_t = static_cast<std::size_t>(n_t);
  out.n_s = static_cast<std::size_t>(n_s);
  const std::size_t total = angle_count(out.n_t, out.n_s);
  out.phases.reserve(total);
  out.mixings.reserve(total);

  for (Eigen::Index i = 0; i < cols; ++i) {
    // (a) column phase: make the last-row entry real and nonnegative
    const cplx last = w(n_t - 1, i);
    if (std::abs(last) > 0.0) w.col(i) *= std::conj(last) / std::abs(last);
    w(n_t - 1, i) = std::abs(w(n_t - 1, i));

    // (b) per-row phases, removed with D_i^H
    for (Eigen::Index k = i; k < n_t - 1; ++k) {
      const double phi = wrap_to_pi(std::arg(w(k, i)));
      out.phases.push_back(phi);
      w.row(k) *= std::polar(1.0, -phi);
      w(k, i) = std::abs(w(k, i));
    }

    // (c) mixing angles, each zeroing entry (l, i) into row i
    for (Eigen::Index l = i + 1; l < n_t; ++l) {
      const double a = w(i, i).real();
      const double b = std::abs(w(l, i));
      double psi = (b == 0.0) ? 0.0 : std::atan2(b, a);
      psi = std::clamp(psi, 0.0, kPi / 2);
      out.mixings.push_back(psi);
      detail::rotate_rows_inverse(w, i, l, psi);
      w(l, i) = 0.0;
    }
  }
  return out;
}

}  // namespace dpbeam

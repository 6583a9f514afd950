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

// Small dense complex linear algebra. Matrices here are at most 8x8 (or a
// stack of per-subcarrier rows), so everything is a thin wrapper over Eigen's
// dynamic-size types.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <numeric>
#include <vector>

#include "dpbeam/common.hpp"

namespace dpbeam {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kOrthonormalTol = 1e-8;
inline constexpr double kReconstructionTol = 1e-9;

struct SvdResult {
  ComplexMatrix u;            // rows x r
  std::vector<double> sigma;  // descending, r = min(rows, cols)
  ComplexMatrix v;            // cols x r
};

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const cplx z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

/// Frobenius distance of V^H V from the identity.
inline double orthonormality_error(const ComplexMatrix& v) {
  const auto k = v.cols();
  return (v.adjoint() * v - ComplexMatrix::Identity(k, k)).norm();
}

inline bool has_orthonormal_columns(const ComplexMatrix& v, double tol = kOrthonormalTol) {
  return v.size() > 0 && all_finite(v) && orthonormality_error(v) <= tol;
}

/// Compact SVD, H = U diag(sigma) V^H.
///
/// Singular values are sorted descending. Each right-singular vector is
/// rotated so that its last nonzero entry is real and nonnegative (the left
/// vector takes the same phase), which fixes one representative per phase
/// class and makes the result a pure function of the input bytes.
inline SvdResult svd(const ComplexMatrix& h) {
  if (h.size() == 0) throw InvalidInput("svd: empty matrix");
  if (!all_finite(h)) throw InvalidInput("svd: non-finite entry");

  const Eigen::Index r = std::min(h.rows(), h.cols());
  Eigen::JacobiSVD<ComplexMatrix> solver(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = solver.singularValues();

  // Eigen already sorts descending; the stable re-sort only guards ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return s(a) > s(b); });

  SvdResult out;
  out.u.resize(h.rows(), r);
  out.v.resize(h.cols(), r);
  out.sigma.resize(static_cast<std::size_t>(r));
  for (Eigen::Index c = 0; c < r; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    ComplexVector vc = solver.matrixV().col(src);
    ComplexVector uc = solver.matrixU().col(src);
    const double scale = vc.cwiseAbs().maxCoeff();
    for (Eigen::Index k = vc.size() - 1; k >= 0; --k) {
      if (std::abs(vc(k)) > 1e-12 * scale) {
        const cplx rot = std::conj(vc(k)) / std::abs(vc(k));
        vc *= rot;
        uc *= rot;
        vc(k) = std::abs(vc(k));
        break;
      }
    }
    out.v.col(c) = vc;
    out.u.col(c) = uc;
    out.sigma[static_cast<std::size_t>(c)] = std::max(0.0, s(src));
  }
  return out;
}

/// Squared chordal distance between span(V1) and span(V2), 1/2 ||P1 - P2||_F^2.
///
/// Evaluated from the projector difference directly rather than through
/// N_s - ||V1^H V2||_F^2, which cancels catastrophically near zero.
inline double chordal_distance_sq(const ComplexMatrix& v1, const ComplexMatrix& v2,
                                  double tol = kOrthonormalTol) {
  if (v1.rows() != v2.rows() || v1.cols() != v2.cols())
    throw InvalidInput("chordal_distance_sq: shape mismatch");
  if (!has_orthonormal_columns(v1, tol) || !has_orthonormal_columns(v2, tol))
    throw InvalidInput("chordal_distance_sq: columns are not orthonormal");
  const ComplexMatrix diff = v1 * v1.adjoint() - v2 * v2.adjoint();
  return 0.5 * diff.squaredNorm();
}

}  // namespace dpbeam

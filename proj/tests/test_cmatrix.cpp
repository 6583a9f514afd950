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

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "dpbeam/cmatrix.hpp"
#include "test_util.hpp"

namespace dpbeam {
namespace {

using testing::gaussian_matrix;
using testing::random_semi_unitary;

TEST(Svd, DiagonalByHand) {
  ComplexMatrix h(2, 2);
  h << 3.0, 0.0, 0.0, -2.0;
  const SvdResult s = svd(h);
  ASSERT_EQ(s.sigma.size(), 2U);
  EXPECT_NEAR(s.sigma[0], 3.0, 1e-14);
  EXPECT_NEAR(s.sigma[1], 2.0, 1e-14);
  EXPECT_NEAR(std::abs(s.v(0, 0) - cplx(1, 0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(s.v(1, 1) - cplx(1, 0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(s.u(1, 1) - cplx(-1, 0)), 0.0, 1e-14);
}

TEST(Svd, RowVectorByHand) {
  // H = [1, j]: sigma = sqrt(2), v = [j, 1] / sqrt(2) once the last entry is made real.
  ComplexMatrix h(1, 2);
  h << cplx(1, 0), cplx(0, 1);
  const SvdResult s = svd(h);
  ASSERT_EQ(s.sigma.size(), 1U);
  EXPECT_NEAR(s.sigma[0], std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(std::abs(s.v(0, 0) - cplx(0, 1) / std::sqrt(2.0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(s.v(1, 0) - cplx(1, 0) / std::sqrt(2.0)), 0.0, 1e-14);
}

TEST(Svd, MatchesEigenvaluesOfGram) {
  Rng rng(11);
  for (auto [r, c] : {std::pair{1, 2}, {2, 2}, {3, 2}, {2, 4}, {4, 4}, {8, 2}, {52, 2}}) {
    for (int trial = 0; trial < 20; ++trial) {
      const ComplexMatrix h = gaussian_matrix(r, c, rng);
      const SvdResult s = svd(h);
      // Independent route: eigenvalues of H^H H, descending.
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.adjoint() * h);
      const Eigen::VectorXd ev = es.eigenvalues().reverse();
      for (std::size_t i = 0; i < s.sigma.size(); ++i)
        EXPECT_NEAR(s.sigma[i] * s.sigma[i], ev(static_cast<Eigen::Index>(i)), 1e-10 * (1 + ev(0)));
      for (std::size_t i = 1; i < s.sigma.size(); ++i) EXPECT_GE(s.sigma[i - 1], s.sigma[i]);
    }
  }
}

TEST(Svd, ReconstructsAndCanonicalizes) {
  Rng rng(12);
  for (auto [r, c] : {std::pair{1, 2}, {2, 3}, {3, 3}, {4, 8}, {5, 2}}) {
    const ComplexMatrix h = gaussian_matrix(r, c, rng);
    const SvdResult s = svd(h);
    Eigen::VectorXd sig(static_cast<Eigen::Index>(s.sigma.size()));
    for (std::size_t i = 0; i < s.sigma.size(); ++i) sig(static_cast<Eigen::Index>(i)) = s.sigma[i];
    const ComplexMatrix back = s.u * sig.asDiagonal() * s.v.adjoint();
    EXPECT_LT((back - h).norm(), 1e-12 * h.norm());
    EXPECT_TRUE(has_orthonormal_columns(s.v));
    EXPECT_TRUE(has_orthonormal_columns(s.u));
    for (Eigen::Index j = 0; j < s.v.cols(); ++j) {
      const cplx last = s.v(s.v.rows() - 1, j);
      EXPECT_EQ(last.imag(), 0.0);
      EXPECT_GE(last.real(), 0.0);
    }
  }
}

TEST(Svd, PhaseRotatedInputGivesSameV) {
  Rng rng(13);
  const ComplexMatrix h = gaussian_matrix(3, 2, rng);
  const SvdResult a = svd(h);
  const SvdResult b = svd(h * std::polar(1.0, 0.7));
  EXPECT_LT((a.v - b.v).norm(), 1e-12);
}

TEST(Svd, RejectsBadInput) {
  EXPECT_THROW(svd(ComplexMatrix(0, 0)), InvalidInput);
  ComplexMatrix h = ComplexMatrix::Ones(2, 2);
  h(0, 1) = cplx(std::nan(""), 0);
  EXPECT_THROW(svd(h), InvalidInput);
}

TEST(Chordal, ByHand) {
  // 1 - |<v1, v2>|^2 = sin^2 t for unit vectors in the plane
  for (double t : {0.0, 0.1, 0.6, 1.2, kPi / 2}) {
    ComplexMatrix a(2, 1), b(2, 1);
    a << 1.0, 0.0;
    b << std::cos(t), std::sin(t);
    EXPECT_NEAR(chordal_distance_sq(a, b), std::sin(t) * std::sin(t), 1e-15);
  }
}

TEST(Chordal, InvariantToColumnRotations) {
  Rng rng(14);
  const ComplexMatrix v = random_semi_unitary(4, 2, rng);
  const ComplexMatrix q = random_semi_unitary(2, 2, rng);
  EXPECT_LT(chordal_distance_sq(v, v * q), 1e-28);
  EXPECT_LT(chordal_distance_sq(v, v * std::polar(1.0, -2.0)), 1e-28);
}

TEST(Chordal, AgreesWithTraceFormAndIsBounded) {
  Rng rng(15);
  for (int i = 0; i < 200; ++i) {
    const ComplexMatrix a = random_semi_unitary(4, 2, rng);
    const ComplexMatrix b = random_semi_unitary(4, 2, rng);
    const double d = chordal_distance_sq(a, b);
    EXPECT_NEAR(d, 2.0 - (a.adjoint() * b).squaredNorm(), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0 + 1e-12);
    EXPECT_NEAR(d, chordal_distance_sq(b, a), 1e-15);
  }
}

TEST(Chordal, RejectsShapeMismatchAndNonOrthonormal) {
  EXPECT_THROW(chordal_distance_sq(ComplexMatrix::Identity(3, 1), ComplexMatrix::Identity(3, 2)), InvalidInput);
  EXPECT_THROW(chordal_distance_sq(ComplexMatrix::Ones(2, 1), ComplexMatrix::Identity(2, 1)), InvalidInput);
}

TEST(Orthonormality, Tolerance) {
  ComplexMatrix v = ComplexMatrix::Identity(3, 2);
  EXPECT_TRUE(has_orthonormal_columns(v));
  v(0, 0) = 1.0 + 1e-6;
  EXPECT_FALSE(has_orthonormal_columns(v));
  EXPECT_TRUE(has_orthonormal_columns(v, 1e-5));
}

}  // namespace
}  // namespace dpbeam

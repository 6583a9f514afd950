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

#include "dpbeam/givens.hpp"
#include "test_util.hpp"

namespace dpbeam {
namespace {

using testing::random_semi_unitary;

TEST(AngleCount, Shapes) {
  EXPECT_EQ(angle_count(2, 1), 1U);
  EXPECT_EQ(angle_count(3, 1), 2U);
  EXPECT_EQ(angle_count(3, 2), 3U);
  EXPECT_EQ(angle_count(4, 2), 5U);
  EXPECT_EQ(angle_count(8, 2), 13U);
  EXPECT_EQ(angle_count(4, 4), 6U);
  EXPECT_EQ(angle_count(1, 1), 0U);
  for (std::size_t nt = 1; nt <= 8; ++nt)
    for (std::size_t ns = 1; ns < nt; ++ns) EXPECT_EQ(angle_count(nt, ns), ns * nt - ns * (ns + 1) / 2);
}

TEST(Reconstruct, TwoByOneByHand) {
  const double phi = 0.8, psi = 0.3;
  const ComplexMatrix v = reconstruct({2, 1, {phi}, {psi}});
  ASSERT_EQ(v.rows(), 2);
  ASSERT_EQ(v.cols(), 1);
  EXPECT_NEAR(std::abs(v(0, 0) - std::polar(std::cos(psi), phi)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(v(1, 0) - cplx(std::sin(psi), 0.0)), 0.0, 1e-15);
}

TEST(Reconstruct, ThreeByOneByHand) {
  // [e^{j p0} cos a cos b, e^{j p1} sin a cos b, sin b]
  const double p0 = -2.0, p1 = 1.1, a = 0.4, b = 1.2;
  const ComplexMatrix v = reconstruct({3, 1, {p0, p1}, {a, b}});
  EXPECT_NEAR(std::abs(v(0, 0) - std::polar(std::cos(a) * std::cos(b), p0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(v(1, 0) - std::polar(std::sin(a) * std::cos(b), p1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(v(2, 0) - cplx(std::sin(b), 0.0)), 0.0, 1e-15);
}

TEST(Decompose, RecoversHandAngles) {
  const GivensAngles in{3, 1, {-2.0, 1.1}, {0.4, 1.2}};
  const GivensAngles out = decompose(reconstruct(in));
  ASSERT_EQ(out.phases.size(), 2U);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(out.phases[i], in.phases[i], 1e-12);
    EXPECT_NEAR(out.mixings[i], in.mixings[i], 1e-12);
  }
}

TEST(Decompose, StripsGlobalPhase) {
  ComplexMatrix v(2, 1);
  v << std::polar(std::cos(0.3), 2.5), std::polar(std::sin(0.3), -1.0);
  const GivensAngles a = decompose(v);
  EXPECT_NEAR(a.mixings[0], 0.3, 1e-12);
  EXPECT_NEAR(wrap_to_pi(a.phases[0] - 3.5), 0.0, 1e-12);
}

TEST(Decompose, AxisVectors) {
  const GivensAngles a = decompose(ComplexMatrix::Identity(3, 1));
  EXPECT_NEAR(a.mixings[0], 0.0, 1e-15);
  EXPECT_NEAR(a.mixings[1], 0.0, 1e-15);
  ComplexMatrix e3 = ComplexMatrix::Zero(3, 1);
  e3(2, 0) = 1.0;
  const GivensAngles b = decompose(e3);
  EXPECT_NEAR(b.mixings[1], kPi / 2, 1e-15);
  EXPECT_LT(chordal_distance_sq(reconstruct(b), e3), 1e-28);
}

class RoundTrip : public ::testing::TestWithParam<std::pair<int, int>> {};

TEST_P(RoundTrip, ReconstructOfDecomposeSpansInput) {
  const auto [nt, ns] = GetParam();
  Rng rng(derive_seed(5, {static_cast<std::uint64_t>(nt), static_cast<std::uint64_t>(ns)}));
  for (int i = 0; i < 200; ++i) {
    const ComplexMatrix v = random_semi_unitary(nt, ns, rng);
    const GivensAngles a = decompose(v);
    EXPECT_NO_THROW(a.validate());
    const ComplexMatrix back = reconstruct(a);
    EXPECT_LT(chordal_distance_sq(v, back), 1e-18);
    // Column phases aside, each column comes back.
    for (Eigen::Index c = 0; c < ns; ++c) EXPECT_NEAR(std::abs(v.col(c).dot(back.col(c))), 1.0, 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, RoundTrip,
                         ::testing::Values(std::pair{2, 1}, std::pair{2, 2}, std::pair{3, 1}, std::pair{4, 2},
                                           std::pair{4, 4}, std::pair{8, 2}));

TEST(Reconstruct, OrthonormalForArbitraryAngles) {
  SplitMix64 g(9);
  for (int i = 0; i < 500; ++i) {
    GivensAngles a{4, 3, {}, {}};
    for (std::size_t j = 0; j < angle_count(4, 3); ++j) {
      a.phases.push_back(-kPi + kTwoPi * unit_uniform(g));
      a.mixings.push_back(kPi / 2 * unit_uniform(g));
    }
    EXPECT_LT(orthonormality_error(reconstruct(a)), 1e-13);
  }
}

TEST(GivensAngles, Validation) {
  EXPECT_THROW((GivensAngles{2, 1, {0.1, 0.2}, {0.1}}.validate()), InvalidInput);
  EXPECT_THROW((GivensAngles{2, 1, {kPi}, {0.1}}.validate()), InvalidInput);
  EXPECT_THROW((GivensAngles{2, 1, {0.0}, {-0.01}}.validate()), InvalidInput);
  EXPECT_THROW((GivensAngles{2, 1, {0.0}, {kPi / 2 + 1e-9}}.validate()), InvalidInput);
  EXPECT_THROW((GivensAngles{1, 2, {}, {}}.validate()), InvalidInput);
  EXPECT_NO_THROW((GivensAngles{2, 1, {-kPi}, {kPi / 2}}.validate()));
  EXPECT_THROW(reconstruct({2, 1, {0.1, 0.2}, {0.1}}), InvalidInput);
}

TEST(Decompose, RejectsNonOrthonormal) {
  EXPECT_THROW(decompose(ComplexMatrix::Ones(3, 1)), InvalidInput);
  EXPECT_THROW(decompose(ComplexMatrix::Identity(2, 3)), InvalidInput);
}

}  // namespace
}  // namespace dpbeam

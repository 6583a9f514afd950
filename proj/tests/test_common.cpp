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

#include <cmath>
#include <set>

#include "dpbeam/common.hpp"
#include "dpbeam/rng.hpp"

namespace dpbeam {
namespace {

TEST(WrapToPi, LandsInHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_to_pi(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_to_pi(kPi), -kPi);
  EXPECT_DOUBLE_EQ(wrap_to_pi(-kPi), -kPi);
  EXPECT_NEAR(wrap_to_pi(3 * kPi + 0.25), -kPi + 0.25, 1e-12);
  EXPECT_NEAR(wrap_to_pi(-7.0), -7.0 + kTwoPi, 1e-12);
  for (double x = -50.0; x < 50.0; x += 0.37) {
    const double w = wrap_to_pi(x);
    EXPECT_GE(w, -kPi);
    EXPECT_LT(w, kPi);
    EXPECT_NEAR(std::remainder(w - x, kTwoPi), 0.0, 1e-9);
  }
}

TEST(Units, DecibelsAndWavelength) {
  EXPECT_DOUBLE_EQ(db_to_linear(0.0), 1.0);
  EXPECT_NEAR(db_to_linear(4.0), 2.5118864315095801, 1e-15);
  EXPECT_EQ(db_to_linear(-kInf), 0.0);
  // 2.998e8 / 5.785e9
  EXPECT_NEAR(wavelength(5.785e9), 0.051823681936041487, 1e-16);
}

TEST(SplitMix, MatchesReferenceStream) {
  // Reference outputs of SplitMix64 seeded with 0.
  SplitMix64 g(0);
  EXPECT_EQ(g(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(g(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(g(), 0x06C45D188009454FULL);
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(DeriveSeed, DeterministicAndOrderSensitive) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
  EXPECT_NE(derive_seed(7, {}), derive_seed(7, {0}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 100; ++a)
    for (std::uint64_t b = 0; b < 100; ++b) seen.insert(derive_seed(1, {a, b}));
  EXPECT_EQ(seen.size(), 10000U);
}

TEST(UnitUniform, RangeAndMoments) {
  SplitMix64 g(42);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = unit_uniform(g);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sq / n, 1.0 / 3.0, 0.005);
}

TEST(ComplexGaussian, VarianceAndZeroCase) {
  Rng g(3);
  EXPECT_EQ(complex_gaussian(g, 0.0), cplx{});
  double p = 0.0;
  cplx m{};
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const cplx z = complex_gaussian(g, 2.5);
    p += std::norm(z);
    m += z;
  }
  EXPECT_NEAR(p / n, 2.5, 0.05);
  EXPECT_NEAR(std::abs(m / static_cast<double>(n)), 0.0, 0.02);
}

}  // namespace
}  // namespace dpbeam

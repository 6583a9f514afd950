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

#include <set>
#include <sstream>

#include "dpbeam/adversary.hpp"
#include "dpbeam/channel.hpp"

namespace dpbeam {
namespace {

ChannelConfig small_config() {
  ChannelConfig c;
  c.n_snapshots = 64;
  c.speed_profile = {{0.0, 1.5}};
  c.seed = 17;
  return c;
}

TEST(SpeedProfile, PiecewiseSpeedAndDistance) {
  ChannelConfig c;
  c.speed_profile = {{0.0, 0.0}, {1.0, 1.4}, {2.0, 3.0}};
  EXPECT_EQ(c.speed_at(0.5), 0.0);
  EXPECT_EQ(c.speed_at(1.0), 1.4);
  EXPECT_EQ(c.speed_at(7.0), 3.0);
  EXPECT_DOUBLE_EQ(c.distance_at(0.9), 0.0);
  EXPECT_DOUBLE_EQ(c.distance_at(1.5), 0.7);
  EXPECT_DOUBLE_EQ(c.distance_at(2.5), 1.4 + 1.5);
}

TEST(ChannelConfig, Validation) {
  ChannelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_tx = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = ChannelConfig{};
  c.k_factor_db = std::nan("");
  EXPECT_THROW(c.validate(), InvalidInput);
  c = ChannelConfig{};
  c.speed_profile = {{1.0, 1.0}, {0.5, 1.0}};
  EXPECT_THROW(c.validate(), InvalidInput);
  c = ChannelConfig{};
  c.speed_profile = {{0.0, -1.0}};
  EXPECT_THROW(c.validate(), InvalidInput);
  c = ChannelConfig{};
  c.k_factor_db = -kInf;
  EXPECT_NO_THROW(c.validate());
}

TEST(Paths, LineOfSightFirstDistinctDelaysNormalizedPower) {
  ChannelConfig c;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const PathSet ps = draw_paths(c, rng);
    ASSERT_EQ(ps.delays.size(), c.n_paths);
    std::set<std::size_t> d(ps.delays.begin(), ps.delays.end());
    EXPECT_EQ(d.size(), c.n_paths);
    EXPECT_EQ(ps.delays[0], 0U);
    EXPECT_LE(*d.rbegin(), c.max_delay_samples);
    const double K = db_to_linear(c.k_factor_db);
    for (Eigen::Index r = 0; r < 1; ++r)
      for (Eigen::Index t = 0; t < 2; ++t) {
        EXPECT_NEAR(std::norm(ps.gains[0](r, t)), K / (K + 1), 1e-14);
        double nlos = 0.0;
        for (std::size_t p = 1; p < ps.gains.size(); ++p) nlos += std::norm(ps.gains[p](r, t));
        EXPECT_NEAR(nlos, 1 / (K + 1), 1e-14);
      }
  }
}

TEST(Trace, SubcarrierAveragedPowerIsOne) {
  const CsiTrace tr = generate_trace(small_config());
  for (std::size_t n = 0; n < tr.snapshots(); n += 9)
    for (std::size_t t = 0; t < tr.tx(); ++t) {
      double p = 0.0;
      for (std::size_t k = 0; k < tr.subcarriers(); ++k) p += std::norm(tr.at(n, k, 0, t));
      EXPECT_NEAR(p / static_cast<double>(tr.subcarriers()), 1.0, 1e-12);
    }
}

TEST(Trace, ReproducibleFromSeed) {
  const CsiTrace a = generate_trace(small_config());
  const CsiTrace b = generate_trace(small_config());
  EXPECT_EQ(a.samples(), b.samples());
  ChannelConfig other = small_config();
  other.seed = 18;
  EXPECT_NE(generate_trace(other).samples(), a.samples());
}

TEST(Trace, LineOfSightDopplerIsExact) {
  // one path: phase advances by 2 pi v t / lambda
  ChannelConfig c = small_config();
  c.n_paths = 1;
  c.n_snapshots = 300;
  const CsiTrace tr = generate_trace(c);
  std::vector<double> t(tr.snapshots()), ph(tr.snapshots());
  for (std::size_t n = 0; n < tr.snapshots(); ++n) {
    t[n] = tr.time(n);
    ph[n] = std::arg(tr.at(n, 5, 0, 1));
  }
  const double fd = estimate_doppler(t, unwrap_phase(ph));
  EXPECT_NEAR(fd, 28.944296197464977, 1e-8);
  EXPECT_NEAR(estimate_speed(fd, c.f_c_hz), 1.5, 1e-9);
}

TEST(Trace, MatrixAccessorAndResponseAgree) {
  ChannelConfig c = small_config();
  c.n_rx = 2;
  const CsiTrace tr = generate_trace(c);
  const ComplexMatrix h = tr.matrix(10, 3);
  ASSERT_EQ(h.rows(), 2);
  ASSERT_EQ(h.cols(), 2);
  EXPECT_EQ(h(1, 0), tr.at(10, 3, 1, 0));
  Rng rng(derive_seed(c.seed, {0x7472616365ULL}));
  const PathSet ps = draw_paths(c, rng);
  EXPECT_LT((ps.response(c.distance_at(tr.time(10)), 3, c.n_sc) - h).norm(), 1e-12);
}

// With P paths and the scattered gains normalized to a fixed total, the
// scattered sum s has |s|^2 = P' Beta(1, P' - 1) over P' = P - 1 paths, so
// E|s|^4 = 2P' / (P' + 1). The line-of-sight term has fixed modulus a.
TEST(NarrowbandDraw, RicianMoments) {
  ChannelConfig c;
  c.n_tx = 1;
  c.k_factor_db = 10.0;
  Rng rng(2);
  const int n = 100000;
  double m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = std::norm(draw_channel(c, rng)(0, 0));
    m2 += p;
    m4 += p * p;
  }
  const double K = 10.0, a2 = K / (K + 1), b2 = 1 / (K + 1), s4 = 2.0 * 9 / 10;
  EXPECT_NEAR(m2 / n, 1.0, 0.01);
  EXPECT_NEAR(m4 / n, a2 * a2 + b2 * b2 * s4 + 4 * a2 * b2, 0.01);
}

TEST(NarrowbandDraw, RayleighMoments) {
  ChannelConfig c;
  c.n_tx = 1;
  c.k_factor_db = -kInf;
  Rng rng(3);
  const int n = 100000;
  double m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = std::norm(draw_channel(c, rng)(0, 0));
    m2 += p;
    m4 += p * p;
  }
  EXPECT_NEAR(m2 / n, 1.0, 0.015);
  // the line-of-sight slot carries no power, leaving 9 scattered paths
  EXPECT_NEAR(m4 / n, 2.0 * 9 / 10, 0.05);
}

TEST(LsSounding, PilotOrthogonality) {
  const LsSounder s(3, 2.0, 5);
  const ComplexMatrix ssh = s.pilot() * s.pilot().adjoint();
  EXPECT_LT((ssh - 10.0 * ComplexMatrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(s.error_variance(0.5), 0.05);
  EXPECT_THROW(LsSounder(3, 1.0, 2), InvalidInput);
  EXPECT_THROW(LsSounder(2, 0.0, 2), InvalidInput);
}

TEST(LsSounding, NoiselessIsExactAndNoiseVarianceMatches) {
  Rng rng(4);
  ComplexMatrix h(2, 2);
  h << cplx(1, 2), cplx(-0.5, 0), cplx(0, 0.3), cplx(2, -1);
  EXPECT_EQ(sound_ls(h, 1.0, 4, 0.0, rng), h);
  const LsSounder s(2, 1.0, 4);
  double acc = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) acc += (s.estimate(h, 0.2, rng) - h).squaredNorm();
  EXPECT_NEAR(acc / n / 4, 0.05, 0.05 * 0.03);
  EXPECT_THROW(s.estimate(ComplexMatrix::Ones(1, 3), 0.1, rng), InvalidInput);
  EXPECT_THROW(s.estimate(h, -0.1, rng), InvalidInput);
}

TEST(TraceFile, RoundTripAndErrors) {
  ChannelConfig c = small_config();
  c.n_snapshots = 5;
  const CsiTrace tr = generate_trace(c);
  std::stringstream ss;
  write_trace(ss, tr);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.size(), 40U + 5 * 52 * 1 * 2 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "DPBT");
  const CsiTrace back = read_trace(ss);
  EXPECT_EQ(back.snapshots(), 5U);
  EXPECT_EQ(back.config().f_c_hz, c.f_c_hz);
  for (std::size_t i = 0; i < tr.samples().size(); ++i)
    EXPECT_NEAR(std::abs(back.samples()[i] - tr.samples()[i]), 0.0, 1e-6);

  std::stringstream cut(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_trace(cut), TruncationError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream bm(bad);
  EXPECT_THROW(read_trace(bm), FormatError);
}

}  // namespace
}  // namespace dpbeam

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

// Time-varying multipath Rician MIMO channel traces and LS pilot sounding.
//
// Tap-delay-line model: path p has an integer delay d_p (in samples at the
// channel bandwidth), an arrival angle alpha_p and a complex gain per antenna
// pair. Path 0 is the line-of-sight path, arriving along the direction of
// motion. The response on subcarrier k at snapshot n is
//
//   H[n][k] = sum_p g_p * exp(j 2 pi cos(alpha_p - alpha_v) D(t_n) / lambda)
//                       * exp(-j 2 pi k d_p / n_sc)
//
// with D(t) the distance travelled under the piecewise-constant speed
// profile, so a speed step bends the Doppler phase instead of jumping it.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "dpbeam/cmatrix.hpp"
#include "dpbeam/common.hpp"
#include "dpbeam/rng.hpp"

namespace dpbeam {

struct SpeedSegment {
  double start_s = 0.0;
  double speed_mps = 0.0;
};

struct ChannelConfig {
  std::size_t n_tx = 2;
  std::size_t n_rx = 1;
  std::size_t n_sc = 52;
  double bandwidth_hz = 20e6;
  std::size_t n_paths = 10;
  std::size_t max_delay_samples = 20;
  double k_factor_db = 4.0;  // -inf gives Rayleigh fading
  double f_c_hz = 5.785e9;
  double interval_s = 1e-3;
  std::size_t n_snapshots = 5000;
  double velocity_angle_rad = 0.0;
  std::vector<SpeedSegment> speed_profile{{0.0, 0.0}};  // sorted by start time
  std::uint64_t seed = 1;

  void validate() const {
    if (n_tx < 1 || n_rx < 1 || n_sc < 1 || n_paths < 1 || n_snapshots < 1)
      throw InvalidInput("ChannelConfig: counts must be at least 1");
    if (!(bandwidth_hz > 0.0)) throw InvalidInput("ChannelConfig: bandwidth must be positive");
    if (!(interval_s > 0.0)) throw InvalidInput("ChannelConfig: interval must be positive");
    if (!(f_c_hz > 0.0)) throw InvalidInput("ChannelConfig: carrier frequency must be positive");
    if (std::isnan(k_factor_db) || k_factor_db == kInf) throw InvalidInput("ChannelConfig: invalid K-factor");
    for (std::size_t i = 0; i < speed_profile.size(); ++i) {
      if (!(speed_profile[i].speed_mps >= 0.0) || !std::isfinite(speed_profile[i].speed_mps))
        throw InvalidInput("ChannelConfig: speeds must be finite and nonnegative");
      if (i > 0 && !(speed_profile[i].start_s > speed_profile[i - 1].start_s))
        throw InvalidInput("ChannelConfig: speed profile must be sorted by start time");
    }
  }

  double lambda() const { return wavelength(f_c_hz); }

  double speed_at(double t) const {
    double v = 0.0;
    for (const auto& s : speed_profile)
      if (s.start_s <= t) v = s.speed_mps;
    return v;
  }

  /// Integral of the speed profile over [0, t].
  double distance_at(double t) const {
    double d = 0.0;
    for (std::size_t i = 0; i < speed_profile.size(); ++i) {
      const double a = std::max(0.0, speed_profile[i].start_s);
      const double b = (i + 1 < speed_profile.size()) ? speed_profile[i + 1].start_s : kInf;
      if (t <= a) break;
      d += speed_profile[i].speed_mps * (std::min(t, b) - a);
    }
    return d;
  }
};

/// One drawn realization of the path parameters.
struct PathSet {
  std::vector<std::size_t> delays;    // samples
  std::vector<double> doppler_scale;  // cos(alpha_p - alpha_v) / lambda, 1/m
  std::vector<ComplexMatrix> gains;   // n_rx x n_tx per path

  /// Response after travelling `distance` metres, on subcarrier k of n_sc.
  ComplexMatrix response(double distance, std::size_t k, std::size_t n_sc) const {
    ComplexMatrix h = ComplexMatrix::Zero(gains[0].rows(), gains[0].cols());
    for (std::size_t p = 0; p < gains.size(); ++p) {
      const double ph = kTwoPi * (doppler_scale[p] * distance -
                                  static_cast<double>(k * delays[p]) / static_cast<double>(n_sc));
      h += gains[p] * std::polar(1.0, ph);
    }
    return h;
  }
};

template <class Urbg>
PathSet draw_paths(const ChannelConfig& cfg, Urbg& rng) {
  cfg.validate();
  const std::size_t P = cfg.n_paths;
  PathSet ps;

  // Path 0 (line of sight) is the first arrival and sets the timing
  // reference, so it sits at delay 0. The scattered paths take distinct
  // delays in [1, max] whenever there are enough taps; subcarrier cross terms
  // between paths then cancel exactly and per-snapshot power is exact.
  const std::size_t taps = cfg.max_delay_samples + 1;
  ps.delays.assign(1, 0);
  if (P <= taps) {
    std::vector<std::size_t> pool(taps - 1);
    std::iota(pool.begin(), pool.end(), std::size_t{1});
    for (std::size_t i = 0; i + 1 < P; ++i) {
      const auto j = i + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(pool.size() - i));
      std::swap(pool[i], pool[std::min(j, pool.size() - 1)]);
    }
    ps.delays.insert(ps.delays.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(P - 1));
  } else {
    for (std::size_t i = 1; i < P; ++i)
      ps.delays.push_back(std::min(taps - 1, static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(taps))));
  }

  const double lam = cfg.lambda();
  for (std::size_t p = 0; p < P; ++p) {
    const double alpha = (p == 0) ? cfg.velocity_angle_rad : kTwoPi * unit_uniform(rng);
    ps.doppler_scale.push_back(std::cos(alpha - cfg.velocity_angle_rad) / lam);
  }

  const double K = db_to_linear(cfg.k_factor_db);
  const double los_power = (P == 1) ? 1.0 : K / (K + 1.0);
  const double nlos_power = 1.0 - los_power;
  const auto R = static_cast<Eigen::Index>(cfg.n_rx);
  const auto T = static_cast<Eigen::Index>(cfg.n_tx);
  ps.gains.assign(P, ComplexMatrix::Zero(R, T));
  for (Eigen::Index r = 0; r < R; ++r) {
    for (Eigen::Index t = 0; t < T; ++t) {
      ps.gains[0](r, t) = std::polar(std::sqrt(los_power), kTwoPi * unit_uniform(rng));
      double sum = 0.0;
      for (std::size_t p = 1; p < P; ++p) {
        ps.gains[p](r, t) = complex_gaussian(rng, 1.0);
        sum += std::norm(ps.gains[p](r, t));
      }
      if (P > 1 && sum > 0.0) {
        const double scale = std::sqrt(nlos_power / sum);
        for (std::size_t p = 1; p < P; ++p) ps.gains[p](r, t) *= scale;
      }
    }
  }
  return ps;
}

/// Narrowband realization: the response at t = 0 on subcarrier 0.
template <class Urbg>
ComplexMatrix draw_channel(const ChannelConfig& cfg, Urbg& rng) {
  return draw_paths(cfg, rng).response(0.0, 0, 1);
}

/// CSI over time and frequency, indexed [snapshot][subcarrier][rx][tx].
class CsiTrace {
 public:
  CsiTrace() = default;
  explicit CsiTrace(ChannelConfig cfg) : cfg_(std::move(cfg)) {
    data_.assign(cfg_.n_snapshots * cfg_.n_sc * cfg_.n_rx * cfg_.n_tx, cplx{});
  }

  const ChannelConfig& config() const { return cfg_; }
  std::size_t snapshots() const { return cfg_.n_snapshots; }
  std::size_t subcarriers() const { return cfg_.n_sc; }
  std::size_t rx() const { return cfg_.n_rx; }
  std::size_t tx() const { return cfg_.n_tx; }
  double time(std::size_t n) const { return static_cast<double>(n) * cfg_.interval_s; }

  cplx& at(std::size_t n, std::size_t k, std::size_t r, std::size_t t) { return data_[index(n, k, r, t)]; }
  cplx at(std::size_t n, std::size_t k, std::size_t r, std::size_t t) const { return data_[index(n, k, r, t)]; }

  ComplexMatrix matrix(std::size_t n, std::size_t k) const {
    ComplexMatrix h(static_cast<Eigen::Index>(cfg_.n_rx), static_cast<Eigen::Index>(cfg_.n_tx));
    for (std::size_t r = 0; r < cfg_.n_rx; ++r)
      for (std::size_t t = 0; t < cfg_.n_tx; ++t)
        h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = at(n, k, r, t);
    return h;
  }

  const std::vector<cplx>& samples() const { return data_; }

 private:
  std::size_t index(std::size_t n, std::size_t k, std::size_t r, std::size_t t) const {
    return ((n * cfg_.n_sc + k) * cfg_.n_rx + r) * cfg_.n_tx + t;
  }
  ChannelConfig cfg_;
  std::vector<cplx> data_;
};

/// Deterministic in cfg (including cfg.seed).
inline CsiTrace generate_trace(const ChannelConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {0x7472616365ULL}));
  const PathSet ps = draw_paths(cfg, rng);
  CsiTrace tr(cfg);

  const std::size_t P = cfg.n_paths;
  std::vector<cplx> delay_rot(cfg.n_sc * P);
  for (std::size_t k = 0; k < cfg.n_sc; ++k)
    for (std::size_t p = 0; p < P; ++p)
      delay_rot[k * P + p] =
          std::polar(1.0, -kTwoPi * static_cast<double>(k * ps.delays[p]) / static_cast<double>(cfg.n_sc));

  std::vector<cplx> dop(P);
  for (std::size_t n = 0; n < cfg.n_snapshots; ++n) {
    const double dist = cfg.distance_at(tr.time(n));
    for (std::size_t p = 0; p < P; ++p) dop[p] = std::polar(1.0, kTwoPi * ps.doppler_scale[p] * dist);
    for (std::size_t k = 0; k < cfg.n_sc; ++k) {
      for (std::size_t r = 0; r < cfg.n_rx; ++r) {
        for (std::size_t t = 0; t < cfg.n_tx; ++t) {
          cplx acc{};
          for (std::size_t p = 0; p < P; ++p)
            acc += ps.gains[p](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) * dop[p] *
                   delay_rot[k * P + p];
          tr.at(n, k, r, t) = acc;
        }
      }
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// LS sounding

/// Orthogonal pilot S (n_tx x T_p, scaled DFT rows) with S S^H = P T_p I.
class LsSounder {
 public:
  LsSounder(std::size_t n_tx, double p_tx, std::size_t t_p) : p_tx_(p_tx), t_p_(t_p) {
    if (t_p < n_tx) throw InvalidInput("sound_ls: pilot length must be at least n_tx");
    if (!(p_tx > 0.0)) throw InvalidInput("sound_ls: pilot power must be positive");
    pilot_.resize(static_cast<Eigen::Index>(n_tx), static_cast<Eigen::Index>(t_p));
    for (std::size_t i = 0; i < n_tx; ++i)
      for (std::size_t j = 0; j < t_p; ++j)
        pilot_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::polar(std::sqrt(p_tx), -kTwoPi * static_cast<double>(i * j) / static_cast<double>(t_p));
    pilot_adj_scaled_ = pilot_.adjoint() / (p_tx * static_cast<double>(t_p));
  }

  const ComplexMatrix& pilot() const { return pilot_; }

  /// H_hat = H + W S^H / (P T_p) with W ~ CN(0, n0 I); equal to H when n0 = 0.
  template <class Urbg>
  ComplexMatrix estimate(const ComplexMatrix& h, double n0, Urbg& rng) const {
    if (h.cols() != pilot_.rows()) throw InvalidInput("sound_ls: channel/pilot size mismatch");
    if (!(n0 >= 0.0)) throw InvalidInput("sound_ls: noise power must be nonnegative");
    if (n0 == 0.0) return h;
    ComplexMatrix w(h.rows(), static_cast<Eigen::Index>(t_p_));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = complex_gaussian(rng, n0);
    return h + w * pilot_adj_scaled_;
  }

  double error_variance(double n0) const { return n0 / (p_tx_ * static_cast<double>(t_p_)); }

 private:
  double p_tx_;
  std::size_t t_p_;
  ComplexMatrix pilot_;
  ComplexMatrix pilot_adj_scaled_;
};

template <class Urbg>
ComplexMatrix sound_ls(const ComplexMatrix& h, double p_tx, std::size_t t_p, double n0, Urbg& rng) {
  return LsSounder(static_cast<std::size_t>(h.cols()), p_tx, t_p).estimate(h, n0, rng);
}

// ---------------------------------------------------------------------------
// Trace files
//
// Little-endian layout:
//   0  char[4] "DPBT"      4  u32 version (1)
//   8  u32 n_snapshots    12  u32 n_sc
//  16  u32 n_rx           20  u32 n_tx
//  24  f64 f_c_hz         32  f64 interval_s
//  40  samples [snapshot][subcarrier][rx][tx], each f32 re then f32 im

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), static_cast<std::streamsize>(b.size()));
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> b{};
  is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (is.gcount() != static_cast<std::streamsize>(b.size())) throw TruncationError("trace file: unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_trace(std::ostream& os, const CsiTrace& tr) {
  os.write("DPBT", 4);
  detail::put_le<std::uint32_t>(os, 1);
  for (std::size_t v : {tr.snapshots(), tr.subcarriers(), tr.rx(), tr.tx()})
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(tr.config().f_c_hz));
  detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(tr.config().interval_s));
  for (const cplx& z : tr.samples()) {
    detail::put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(z.real())));
    detail::put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(z.imag())));
  }
  if (!os) throw std::runtime_error("write_trace: write failed");
}

/// Reads a trace file. Only counts, carrier and interval are recovered into
/// the returned config; the path model is not stored.
inline CsiTrace read_trace(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "DPBT") throw FormatError("read_trace: bad magic");
  if (detail::get_le<std::uint32_t>(is) != 1) throw FormatError("read_trace: unsupported version");
  ChannelConfig cfg;
  cfg.n_snapshots = detail::get_le<std::uint32_t>(is);
  cfg.n_sc = detail::get_le<std::uint32_t>(is);
  cfg.n_rx = detail::get_le<std::uint32_t>(is);
  cfg.n_tx = detail::get_le<std::uint32_t>(is);
  cfg.f_c_hz = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  cfg.interval_s = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  cfg.validate();
  CsiTrace tr(cfg);
  for (std::size_t n = 0; n < cfg.n_snapshots; ++n)
    for (std::size_t k = 0; k < cfg.n_sc; ++k)
      for (std::size_t r = 0; r < cfg.n_rx; ++r)
        for (std::size_t t = 0; t < cfg.n_tx; ++t) {
          const float re = std::bit_cast<float>(detail::get_le<std::uint32_t>(is));
          const float im = std::bit_cast<float>(detail::get_le<std::uint32_t>(is));
          tr.at(n, k, r, t) = cplx(re, im);
        }
  return tr;
}

}  // namespace dpbeam

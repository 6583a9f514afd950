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

// Link-level evaluation of reconstructed beamformers: Gray-mapped square QAM
// over a beamformed MIMO link with a genie-aided maximum-ratio combiner, BER
// tables, constellation dumps, and the relative beamforming gain.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpbeam/channel.hpp"
#include "dpbeam/cmatrix.hpp"
#include "dpbeam/dpq.hpp"
#include "dpbeam/givens.hpp"
#include "dpbeam/rng.hpp"

namespace dpbeam {

/// Square M-QAM, Gray-coded per dimension, unit average symbol energy.
/// The first half of each symbol's bits selects the in-phase level, the
/// second half the quadrature level, most-significant bit first.
class Qam {
 public:
  explicit Qam(unsigned order) : order_(order) {
    if (order != 4 && order != 16 && order != 64 && order != 256)
      throw InvalidInput("Qam: order must be one of 4, 16, 64, 256");
    bits_per_symbol_ = static_cast<unsigned>(std::countr_zero(order));
    side_ = 1U << (bits_per_symbol_ / 2);
    scale_ = 1.0 / std::sqrt(2.0 * (static_cast<double>(order) - 1.0) / 3.0);
  }

  unsigned order() const { return order_; }
  unsigned bits_per_symbol() const { return bits_per_symbol_; }

  cplx point(std::uint32_t label) const {
    const unsigned half = bits_per_symbol_ / 2;
    return {level(gray_to_index(label >> half)), level(gray_to_index(label & (side_ - 1)))};
  }

  std::vector<cplx> map(std::span<const std::uint8_t> bits) const {
    if (bits.size() % bits_per_symbol_ != 0) throw InvalidInput("Qam::map: bit count not a multiple of log2(M)");
    std::vector<cplx> out;
    out.reserve(bits.size() / bits_per_symbol_);
    for (std::size_t i = 0; i < bits.size(); i += bits_per_symbol_) {
      std::uint32_t label = 0;
      for (unsigned b = 0; b < bits_per_symbol_; ++b) label = (label << 1) | (bits[i + b] & 1U);
      out.push_back(point(label));
    }
    return out;
  }

  /// Hard-decision ML demapping (nearest point per dimension).
  std::vector<std::uint8_t> demap(std::span<const cplx> symbols) const {
    std::vector<std::uint8_t> out;
    out.reserve(symbols.size() * bits_per_symbol_);
    const unsigned half = bits_per_symbol_ / 2;
    for (const cplx& s : symbols) {
      const std::uint32_t label = (index_to_gray(slice(s.real())) << half) | index_to_gray(slice(s.imag()));
      for (unsigned b = bits_per_symbol_; b-- > 0;) out.push_back(static_cast<std::uint8_t>((label >> b) & 1U));
    }
    return out;
  }

  /// Nearest constellation point.
  cplx decide(cplx s) const {
    return {level(slice(s.real())), level(slice(s.imag()))};
  }

 private:
  double level(std::uint32_t idx) const {
    return scale_ * (2.0 * static_cast<double>(idx) - static_cast<double>(side_ - 1));
  }
  std::uint32_t slice(double x) const {
    const double t = std::round((x / scale_ + static_cast<double>(side_ - 1)) / 2.0);
    return static_cast<std::uint32_t>(std::clamp(t, 0.0, static_cast<double>(side_ - 1)));
  }
  static std::uint32_t index_to_gray(std::uint32_t i) { return i ^ (i >> 1); }
  static std::uint32_t gray_to_index(std::uint32_t g) {
    std::uint32_t i = g;
    for (std::uint32_t s = g >> 1; s != 0; s >>= 1) i ^= s;
    return i;
  }

  unsigned order_;
  unsigned bits_per_symbol_ = 0;
  std::uint32_t side_ = 0;
  double scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Beamforming gain

/// ||H v_hat||^2 / ||H v_star||^2 for one stream.
inline double beamforming_gain(const ComplexMatrix& h, const ComplexVector& v_hat, const ComplexVector& v_star) {
  if (v_hat.size() != h.cols() || v_star.size() != h.cols()) throw InvalidInput("beamforming_gain: size mismatch");
  const double den = (h * v_star).squaredNorm();
  if (!(den > 0.0)) throw DegenerateChannel("beamforming_gain: H v_star is zero");
  return (h * v_hat).squaredNorm() / den;
}

/// Average of the per-stream gains over the columns of v_hat / v_star.
inline double beamforming_gain(const ComplexMatrix& h, const ComplexMatrix& v_hat, const ComplexMatrix& v_star) {
  if (v_hat.cols() != v_star.cols() || v_hat.cols() == 0) throw InvalidInput("beamforming_gain: stream count mismatch");
  double g = 0.0;
  for (Eigen::Index k = 0; k < v_hat.cols(); ++k)
    g += beamforming_gain(h, ComplexVector(v_hat.col(k)), ComplexVector(v_star.col(k)));
  return g / static_cast<double>(v_hat.cols());
}

// ---------------------------------------------------------------------------
// Feedback schemes

enum class Scheme { PerfectSvd, Deterministic, DpSq };

inline std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::PerfectSvd: return "perfect";
    case Scheme::Deterministic: return "det";
    case Scheme::DpSq: return "dpsq";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "perfect" || s == "PerfectSvd") return Scheme::PerfectSvd;
  if (s == "det" || s == "Deterministic") return Scheme::Deterministic;
  if (s == "dpsq" || s == "DpSq") return Scheme::DpSq;
  throw InvalidInput("unknown scheme '" + std::string(s) + "'");
}

/// Precoder the AP rebuilds from the STA's report for `v_star`. `key` seeds
/// the DP-SQ draws of this report.
inline ComplexMatrix feedback_beamformer(Scheme scheme, const ComplexMatrix& v_star, const FeedbackGrids& grids,
                                         const PrivacyBudget& budget, std::uint64_t key) {
  if (scheme == Scheme::PerfectSvd) return v_star;
  const GivensAngles angles = decompose(v_star);
  const AngleIndices idx = scheme == Scheme::Deterministic ? quantize_angles_det(angles, grids)
                                                           : quantize_angles_dpsq(angles, grids, budget, key);
  return reconstruct(dequantize(idx, grids));
}

/// Leading n_s right-singular vectors.
inline ComplexMatrix dominant_subspace(const ComplexMatrix& h, std::size_t n_s) {
  const SvdResult s = svd(h);
  if (static_cast<Eigen::Index>(n_s) > s.v.cols()) throw InvalidInput("dominant_subspace: n_s exceeds rank bound");
  return s.v.leftCols(static_cast<Eigen::Index>(n_s));
}

// ---------------------------------------------------------------------------
// BER simulation

struct LinkConfig {
  unsigned modulation = 16;
  std::vector<double> snr_db{0, 5, 10, 15, 20};
  std::vector<Scheme> schemes{Scheme::PerfectSvd, Scheme::Deterministic, Scheme::DpSq};
  unsigned b_phi = 3;
  unsigned b_psi = 3;
  double eps_phi = 0.1;
  double eps_psi = 0.1;
  std::size_t n_bits = 1'000'000;  // cap per SNR point
  std::size_t min_bits = 10'000;
  std::size_t min_errors = 200;    // early stop once every scheme has this many
  std::size_t block_symbols = 100; // symbols per channel realization
  bool noisy_sounding = true;      // sound at the link SNR; false feeds back the true channel
  std::uint64_t seed = 1;

  void validate() const {
    (void)Qam(modulation);
    if (n_bits < 10'000) throw InvalidInput("LinkConfig: n_bits must be at least 1e4");
    if (schemes.empty()) throw InvalidInput("LinkConfig: no schemes");
    if (block_symbols == 0) throw InvalidInput("LinkConfig: block_symbols must be positive");
    (void)QuantGrid(AngleKind::Phase, b_phi);
    (void)QuantGrid(AngleKind::Mixing, b_psi);
    PrivacyBudget{eps_phi, eps_psi, 0.5, 0}.validate();
  }

  FeedbackGrids grids() const { return {QuantGrid(AngleKind::Phase, b_phi), QuantGrid(AngleKind::Mixing, b_psi)}; }
  PrivacyBudget budget() const { return {eps_phi, eps_psi, 1e-5, 0}; }
};

struct BerPoint {
  Scheme scheme = Scheme::PerfectSvd;
  double snr_db = 0.0;
  double ber = 0.0;
  double std_error = 0.0;  // block-level Monte-Carlo standard error
  std::size_t n_bits = 0;
  std::size_t errors = 0;
  std::vector<std::uint32_t> block_errors;  // per channel block, for paired tests
};

/// Paired difference of two points simulated on the same blocks: mean of
/// (errors_a - errors_b) per bit, with its standard error.
struct PairedDifference {
  double mean = 0.0;
  double std_error = 0.0;
};

inline PairedDifference paired_difference(const BerPoint& a, const BerPoint& b) {
  if (a.block_errors.size() != b.block_errors.size() || a.n_bits != b.n_bits || a.block_errors.size() < 2)
    throw InvalidInput("paired_difference: points were not simulated on the same blocks");
  const auto nb = static_cast<double>(a.block_errors.size());
  const double bits_per_block = static_cast<double>(a.n_bits) / nb;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < a.block_errors.size(); ++i) {
    const double d = (static_cast<double>(a.block_errors[i]) - static_cast<double>(b.block_errors[i])) / bits_per_block;
    sum += d;
    sq += d * d;
  }
  const double mean = sum / nb;
  const double var = std::max(0.0, (sq - nb * mean * mean) / (nb - 1.0));
  return {mean, std::sqrt(var / nb)};
}

namespace detail {

struct LinkBlock {
  ComplexMatrix h;
  std::vector<ComplexMatrix> beams;  // one per scheme
  std::vector<std::uint8_t> bits;
  std::vector<cplx> symbols;
  ComplexMatrix noise;  // n_rx x block_symbols
};

inline LinkBlock draw_link_block(const LinkConfig& cfg, const ChannelConfig& chan, const Qam& qam,
                                 const LsSounder& sounder, double n0, std::uint64_t point, std::uint64_t block) {
  LinkBlock b;
  Rng crng(derive_seed(cfg.seed, {1, point, block}));
  b.h = draw_channel(chan, crng);
  Rng srng(derive_seed(cfg.seed, {2, point, block}));
  const ComplexMatrix h_est = cfg.noisy_sounding ? sounder.estimate(b.h, n0, srng) : b.h;
  const ComplexMatrix v_star = dominant_subspace(h_est, 1);
  const auto grids = cfg.grids();
  const auto budget = cfg.budget();
  const std::uint64_t key = derive_seed(cfg.seed, {3, point, block});
  for (Scheme s : cfg.schemes) b.beams.push_back(feedback_beamformer(s, v_star, grids, budget, key));

  Rng drng(derive_seed(cfg.seed, {4, point, block}));
  b.bits.resize(cfg.block_symbols * qam.bits_per_symbol());
  for (auto& x : b.bits) x = static_cast<std::uint8_t>(drng() >> 63);
  b.symbols = qam.map(b.bits);
  b.noise.resize(b.h.rows(), static_cast<Eigen::Index>(cfg.block_symbols));
  for (Eigen::Index i = 0; i < b.noise.size(); ++i) b.noise.data()[i] = complex_gaussian(drng, n0);
  return b;
}

/// Equalized symbols for one beam: y = H v s + w, s_hat = h^H y / ||h||^2.
inline std::vector<cplx> receive(const LinkBlock& b, const ComplexMatrix& beam) {
  const ComplexVector h_eff = b.h * beam.col(0);
  const double g = h_eff.squaredNorm();
  std::vector<cplx> out(b.symbols.size());
  for (std::size_t i = 0; i < b.symbols.size(); ++i) {
    const ComplexVector y = h_eff * b.symbols[i] + b.noise.col(static_cast<Eigen::Index>(i));
    out[i] = g > 0.0 ? h_eff.dot(y) / g : cplx{};
  }
  return out;
}

inline double snr_noise(double snr_db) { return std::isinf(snr_db) && snr_db > 0 ? 0.0 : 1.0 / db_to_linear(snr_db); }

}  // namespace detail

/// BER per (scheme, SNR). All schemes at one SNR share channel, sounding
/// noise, payload bits and receiver noise; only the feedback differs.
inline std::vector<BerPoint> simulate_ber(const LinkConfig& cfg, const ChannelConfig& chan) {
  cfg.validate();
  chan.validate();
  const Qam qam(cfg.modulation);
  const LsSounder sounder(chan.n_tx, 1.0, chan.n_tx);
  std::vector<BerPoint> table;

  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    const double n0 = detail::snr_noise(cfg.snr_db[si]);
    std::vector<BerPoint> pts(cfg.schemes.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
      pts[j].scheme = cfg.schemes[j];
      pts[j].snr_db = cfg.snr_db[si];
    }
    std::size_t bits = 0;
    for (std::uint64_t blk = 0;; ++blk) {
      const auto b = detail::draw_link_block(cfg, chan, qam, sounder, n0, si, blk);
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const auto rx = qam.demap(detail::receive(b, b.beams[j]));
        std::uint32_t e = 0;
        for (std::size_t i = 0; i < rx.size(); ++i) e += rx[i] != b.bits[i];
        pts[j].errors += e;
        pts[j].block_errors.push_back(e);
      }
      bits += b.bits.size();
      bool enough = bits >= cfg.min_bits;
      for (const auto& p : pts) enough = enough && p.errors >= cfg.min_errors;
      if (enough || bits >= cfg.n_bits) break;
    }
    for (auto& p : pts) {
      p.n_bits = bits;
      p.ber = static_cast<double>(p.errors) / static_cast<double>(bits);
      const auto nb = static_cast<double>(p.block_errors.size());
      const double per_block = static_cast<double>(bits) / nb;
      double sq = 0.0;
      for (auto e : p.block_errors) sq += std::pow(static_cast<double>(e) / per_block - p.ber, 2);
      p.std_error = nb > 1 ? std::sqrt(sq / (nb - 1.0) / nb) : 0.0;
      table.push_back(std::move(p));
    }
  }
  return table;
}

struct ConstellationPoint {
  Scheme scheme = Scheme::PerfectSvd;
  cplx received;
  cplx sent;
};

/// Equalized received symbols for each scheme at one SNR (+inf allowed).
inline std::vector<ConstellationPoint> constellation_dump(const LinkConfig& cfg, const ChannelConfig& chan,
                                                          double snr_db, std::size_t n_symbols) {
  cfg.validate();
  chan.validate();
  const Qam qam(cfg.modulation);
  const LsSounder sounder(chan.n_tx, 1.0, chan.n_tx);
  const double n0 = detail::snr_noise(snr_db);
  std::vector<std::vector<ConstellationPoint>> per(cfg.schemes.size());
  std::size_t have = 0;
  for (std::uint64_t blk = 0; have < n_symbols; ++blk) {
    const auto b = detail::draw_link_block(cfg, chan, qam, sounder, n0, 0xC0, blk);
    const std::size_t take = std::min(n_symbols - have, b.symbols.size());
    for (std::size_t j = 0; j < cfg.schemes.size(); ++j) {
      const auto rx = detail::receive(b, b.beams[j]);
      for (std::size_t i = 0; i < take; ++i) per[j].push_back({cfg.schemes[j], rx[i], b.symbols[i]});
    }
    have += take;
  }
  std::vector<ConstellationPoint> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

}  // namespace dpbeam

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

// Passive eavesdropper: turns observed beamforming feedback into effective
// scalar CSI, collapses it across subcarriers, and tracks Doppler and radial
// speed from the slope of the unwrapped phase.

#include <fftw3.h>

#include <algorithm>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "dpbeam/cbr.hpp"
#include "dpbeam/channel.hpp"
#include "dpbeam/cmatrix.hpp"
#include "dpbeam/common.hpp"
#include "dpbeam/dpq.hpp"
#include "dpbeam/givens.hpp"
#include "dpbeam/rng.hpp"

namespace dpbeam {

/// Scalar CSI h[k, n], indexed [snapshot][subcarrier].
struct EffectiveCsi {
  std::size_t n_snapshots = 0;
  std::size_t n_sc = 0;
  std::vector<cplx> values;

  cplx at(std::size_t n, std::size_t k) const { return values[n * n_sc + k]; }
  std::span<const cplx> snapshot(std::size_t n) const { return {values.data() + n * n_sc, n_sc}; }
  bool empty() const { return n_snapshots == 0; }
};

/// Weighted combination sum_k w_k h[k]. Weights must be nonnegative; they are
/// renormalized to sum to one.
inline cplx aggregate(std::span<const cplx> h, std::span<const double> w) {
  if (h.size() != w.size()) throw InvalidInput("aggregate: weight count does not match subcarrier count");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput("aggregate: weights must be finite and nonnegative");
    total += x;
  }
  if (!(total > 0.0)) throw InvalidInput("aggregate: weights sum to zero");
  cplx acc{};
  for (std::size_t k = 0; k < h.size(); ++k) acc += (w[k] / total) * h[k];
  return acc;
}

enum class WeightPolicy { Uniform, Snr };

/// Uniform weights, or weights proportional to the mean power of each
/// subcarrier over the whole observation.
inline std::vector<double> subcarrier_weights(const EffectiveCsi& csi, WeightPolicy policy) {
  std::vector<double> w(csi.n_sc, 1.0 / static_cast<double>(std::max<std::size_t>(csi.n_sc, 1)));
  if (policy == WeightPolicy::Uniform || csi.empty()) return w;
  double total = 0.0;
  for (std::size_t k = 0; k < csi.n_sc; ++k) {
    double p = 0.0;
    for (std::size_t n = 0; n < csi.n_snapshots; ++n) p += std::norm(csi.at(n, k));
    w[k] = p;
    total += p;
  }
  if (total > 0.0)
    for (auto& x : w) x /= total;
  return w;
}

inline std::vector<cplx> aggregate_series(const EffectiveCsi& csi, std::span<const double> w) {
  std::vector<cplx> out;
  out.reserve(csi.n_snapshots);
  for (std::size_t n = 0; n < csi.n_snapshots; ++n) out.push_back(aggregate(csi.snapshot(n), w));
  return out;
}

/// Removes 2 pi jumps: output[0] = input[0] and successive differences are
/// reduced into (-pi, pi].
inline std::vector<double> unwrap_phase(std::span<const double> phi) {
  if (phi.empty()) throw InvalidInput("unwrap_phase: empty input");
  std::vector<double> out(phi.size());
  out[0] = phi[0];
  for (std::size_t i = 1; i < phi.size(); ++i) out[i] = out[i - 1] - wrap_to_pi(-(phi[i] - phi[i - 1]));
  return out;
}

/// OLS slope of phase on time, divided by 2 pi.
inline double estimate_doppler(std::span<const double> times, std::span<const double> phase) {
  if (times.size() != phase.size()) throw EstimationError("estimate_doppler: length mismatch");
  if (times.size() < 2) throw EstimationError("estimate_doppler: need at least two samples");
  const auto n = static_cast<double>(times.size());
  double tm = 0.0, pm = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    tm += times[i];
    pm += phase[i];
  }
  tm /= n;
  pm /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    sxy += (times[i] - tm) * (phase[i] - pm);
    sxx += (times[i] - tm) * (times[i] - tm);
  }
  if (!(sxx > 0.0)) throw EstimationError("estimate_doppler: all sample times are equal");
  return sxy / sxx / kTwoPi;
}

/// Signed radial speed, lambda * f_d.
inline double estimate_speed(double f_d, double f_c) {
  if (!(f_c > 0.0)) throw InvalidInput("estimate_speed: carrier frequency must be positive");
  return wavelength(f_c) * f_d;
}

struct SpeedEstimate {
  std::vector<double> times;
  std::vector<double> doppler_hz;
  std::vector<double> speed_mps;
  std::size_t window = 0;
};

/// Short-time Doppler and speed. The window for center m covers the W
/// samples starting at m - floor(W/2); centers advance by `hop`.
inline SpeedEstimate sliding_speed(std::span<const cplx> series, std::span<const double> times, std::size_t window,
                                   double f_c, std::size_t hop = 1) {
  if (series.size() != times.size()) throw InvalidInput("sliding_speed: length mismatch");
  if (window < 2 || window > series.size()) throw InvalidInput("sliding_speed: window must be in [2, length]");
  if (hop == 0) throw InvalidInput("sliding_speed: hop must be positive");
  SpeedEstimate est;
  est.window = window;
  const std::size_t half = window / 2;
  std::vector<double> wrapped(window);
  for (std::size_t start = 0; start + window <= series.size(); start += hop) {
    for (std::size_t i = 0; i < window; ++i) wrapped[i] = std::arg(series[start + i]);
    const auto unwrapped = unwrap_phase(wrapped);
    const double fd = estimate_doppler(times.subspan(start, window), unwrapped);
    est.times.push_back(times[start + half]);
    est.doppler_hz.push_back(fd);
    est.speed_mps.push_back(estimate_speed(fd, f_c));
  }
  return est;
}

// ---------------------------------------------------------------------------
// Observation model

/// What the eavesdropper sees on snapshot n, subcarrier k: its own noisy view
/// of the channel (receive antenna 0) projected on the reported beam (stream
/// 0), h[k, n] = (H[n][k] + Z) v_hat[n].
template <class Urbg>
EffectiveCsi observe_beams(std::span<const ComplexMatrix> beams, const CsiTrace& trace, double eavesdropper_snr_db,
                           Urbg& rng) {
  EffectiveCsi out;
  if (beams.empty()) return out;
  if (beams.size() > trace.snapshots()) throw InvalidInput("observe_beams: more beams than trace snapshots");
  const double n0 = std::isinf(eavesdropper_snr_db) ? 0.0 : 1.0 / db_to_linear(eavesdropper_snr_db);
  out.n_snapshots = beams.size();
  out.n_sc = trace.subcarriers();
  out.values.resize(out.n_snapshots * out.n_sc);
  for (std::size_t n = 0; n < beams.size(); ++n) {
    if (beams[n].rows() != static_cast<Eigen::Index>(trace.tx()))
      throw InvalidInput("observe_beams: beam length does not match transmit antennas");
    for (std::size_t k = 0; k < out.n_sc; ++k) {
      cplx acc{};
      for (std::size_t t = 0; t < trace.tx(); ++t)
        acc += (trace.at(n, k, 0, t) + complex_gaussian(rng, n0)) * beams[n](static_cast<Eigen::Index>(t), 0);
      out.values[n * out.n_sc + k] = acc;
    }
  }
  return out;
}

struct FrameFormat {
  std::size_t n_t = 2;
  std::size_t n_s = 1;
  FeedbackGrids grids;
};

/// Decodes one payload per snapshot and observes the reconstructed beams.
/// A malformed payload is reported with its frame index.
template <class Urbg>
EffectiveCsi observe_feedback(std::span<const std::vector<std::uint8_t>> payloads, const FrameFormat& fmt,
                              const CsiTrace& trace, double eavesdropper_snr_db, Urbg& rng) {
  std::vector<ComplexMatrix> beams;
  beams.reserve(payloads.size());
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    try {
      const CbrFrame f = cbr_decode(payloads[i], fmt.n_t, fmt.n_s, fmt.grids.phase.bits, fmt.grids.mixing.bits);
      beams.push_back(reconstruct(dequantize(to_indices(f), fmt.grids)));
    } catch (const TruncationError& e) {
      throw TruncationError("frame " + std::to_string(i) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return observe_beams(std::span<const ComplexMatrix>(beams), trace, eavesdropper_snr_db, rng);
}

// ---------------------------------------------------------------------------
// Spectrogram

struct Spectrogram {
  std::vector<double> times;  // frame centers, s
  std::vector<double> freqs;  // Hz, ascending (zero frequency centered)
  std::vector<double> magnitude;  // [frame][bin]

  double at(std::size_t frame, std::size_t bin) const { return magnitude[frame * freqs.size() + bin]; }
  std::size_t peak_bin(std::size_t frame) const {
    const auto* row = magnitude.data() + frame * freqs.size();
    return static_cast<std::size_t>(std::max_element(row, row + freqs.size()) - row);
  }
};

/// Hann-windowed short-time Fourier magnitude of a complex series sampled
/// every `interval_s`.
inline Spectrogram spectrogram(std::span<const cplx> series, std::size_t fft_len, std::size_t hop, double interval_s) {
  if (fft_len < 2 || fft_len > series.size()) throw InvalidInput("spectrogram: fft_len must be in [2, length]");
  if (hop == 0) throw InvalidInput("spectrogram: hop must be positive");
  if (!(interval_s > 0.0)) throw InvalidInput("spectrogram: interval must be positive");

  Spectrogram sg;
  const double fs = 1.0 / interval_s;
  const auto half = static_cast<std::ptrdiff_t>(fft_len / 2);
  for (std::size_t b = 0; b < fft_len; ++b)
    sg.freqs.push_back(static_cast<double>(static_cast<std::ptrdiff_t>(b) - half) * fs / static_cast<double>(fft_len));

  std::vector<double> hann(fft_len);
  for (std::size_t i = 0; i < fft_len; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(fft_len));

  // fftw planning is not thread-safe
  static std::mutex plan_mutex;
  fftw_complex* in = fftw_alloc_complex(fft_len);
  fftw_complex* out = fftw_alloc_complex(fft_len);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(fft_len), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t start = 0; start + fft_len <= series.size(); start += hop) {
    for (std::size_t i = 0; i < fft_len; ++i) {
      in[i][0] = hann[i] * series[start + i].real();
      in[i][1] = hann[i] * series[start + i].imag();
    }
    fftw_execute(plan);
    for (std::size_t b = 0; b < fft_len; ++b) {
      const std::size_t src = (b + fft_len - static_cast<std::size_t>(half)) % fft_len;
      sg.magnitude.push_back(std::hypot(out[src][0], out[src][1]));
    }
    sg.times.push_back(static_cast<double>(start + fft_len / 2) * interval_s);
  }
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return sg;
}

}  // namespace dpbeam

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

// Experiment orchestration behind the dpbeamsim CLI: configuration, the
// experiment runners, the analytic-vs-Monte-Carlo validation suite, and
// result writers. Workers only see immutable configs and return values; all
// seeds are derived from the experiment seed with derive_seed(), so results
// do not depend on the thread count.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dpbeam/adversary.hpp"
#include "dpbeam/cbr.hpp"
#include "dpbeam/channel.hpp"
#include "dpbeam/cmatrix.hpp"
#include "dpbeam/dpq.hpp"
#include "dpbeam/givens.hpp"
#include "dpbeam/link.hpp"

namespace dpbeam {

inline constexpr const char* kVersion = "1.0.0";

struct Shape {
  std::size_t first = 0;   // n_t
  std::size_t second = 0;  // n_r or n_s, depending on use
  bool operator==(const Shape&) const = default;
};

struct AdversaryConfig {
  std::size_t window = 256;
  std::size_t hop = 64;  // W/4
  double eavesdropper_snr_db = 20.0;
  double sounding_snr_db = 20.0;
  WeightPolicy weights = WeightPolicy::Uniform;
};

struct SpectrogramConfig {
  std::size_t fft_len = 256;
  std::size_t hop = 64;
  std::vector<SpeedSegment> speed_profile{{0.0, 0.0}, {1.0, 1.4}, {2.0, 3.0}, {3.0, 5.0}};
  double k_factor_db = 10.0;
};

struct GainConfig {
  std::vector<Shape> shapes{{2, 1}, {2, 2}, {2, 3}, {2, 4}, {2, 8}};  // (n_t, n_r), one stream
  std::size_t realizations = 5000;
  double k_factor_db = -kInf;  // Rayleigh
};

struct ConstellationConfig {
  double snr_db = 15.0;
  std::size_t n_symbols = 2000;
  unsigned bits = 1;
  unsigned modulation = 16;
};

struct ValidateConfig {
  std::size_t mse_draws = 1'000'000;
  std::size_t bound_channels = 10'000;
  std::vector<Shape> bound_shapes{{2, 1}, {4, 2}, {8, 2}};  // (n_t, n_s)
  std::size_t ratio_pairs = 100;
  std::size_t ratio_draws = 100'000;
  std::size_t ls_trials = 100'000;
};

struct ExperimentConfig {
  ChannelConfig channel;
  std::size_t num_sts = 1;
  unsigned bits_phi = 6;
  unsigned bits_psi = 3;
  PrivacyBudget budget;
  LinkConfig link;
  std::vector<unsigned> ber_modulations{16, 256};
  std::vector<unsigned> ber_bits{1, 3};
  ConstellationConfig constellation;
  GainConfig gain;
  AdversaryConfig adversary;
  SpectrogramConfig spectrogram;
  ValidateConfig validate;
  std::size_t trials = 1;
  std::uint64_t seed = 1;

  FeedbackGrids grids() const { return {QuantGrid(AngleKind::Phase, bits_phi), QuantGrid(AngleKind::Mixing, bits_psi)}; }

  void check() const {
    channel.validate();
    budget.validate();
    link.validate();
    (void)grids();
    if (num_sts < 1 || num_sts > channel.n_tx) throw ConfigError("NumSTS: must be in [1, NumTx]");
    if (trials < 1) throw ConfigError("Trials: must be at least 1");
    if (ber_modulations.empty() || ber_bits.empty()) throw ConfigError("link: empty Modulation or FeedbackBits list");
    for (unsigned m : ber_modulations) (void)Qam(m);
    for (unsigned b : ber_bits) (void)QuantGrid(AngleKind::Mixing, b);
    (void)Qam(constellation.modulation);
    (void)QuantGrid(AngleKind::Mixing, constellation.bits);
    if (constellation.n_symbols < 1) throw ConfigError("constellation.NumSymbols: must be at least 1");
    if (adversary.hop < 1 || spectrogram.hop < 1) throw ConfigError("Hop: must be at least 1");
    if (gain.realizations < 1) throw ConfigError("gain.Realizations: must be at least 1");
    if (adversary.window < 2 || adversary.window > channel.n_snapshots)
      throw ConfigError("adversary.Window: must be in [2, NumPackets]");
    if (spectrogram.fft_len < 2 || spectrogram.fft_len > channel.n_snapshots)
      throw ConfigError("spectrogram.FftLen: must be in [2, NumPackets]");
    for (const auto& s : gain.shapes)
      if (s.first < 1 || s.second < 1) throw ConfigError("gain.Shapes: antenna counts must be positive");
    for (const auto& s : validate.bound_shapes)
      if (s.second < 1 || s.second > s.first) throw ConfigError("validate.BoundShapes: need 1 <= n_s <= n_t");
  }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) throw ConfigError(key + ": expected a nonnegative integer");
  // integers past 2^53 are only exact when written without exponent
  if (v.find_first_of(".eE") == std::string::npos) return std::stoull(v);
  return static_cast<std::uint64_t>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false");
}

inline std::vector<SpeedSegment> parse_speed_profile(const std::string& key, const std::string& v) {
  std::vector<SpeedSegment> out;
  for (const auto& item : split_list(v)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(key + ": expected 'start_s:speed_mps' pairs");
    out.push_back({to_double(key, item.substr(0, colon)), to_double(key, item.substr(colon + 1))});
  }
  if (out.empty()) throw ConfigError(key + ": empty speed profile");
  return out;
}

inline std::vector<Shape> parse_shapes(const std::string& key, const std::string& v) {
  std::vector<Shape> out;
  for (const auto& item : split_list(v)) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw ConfigError(key + ": expected shapes like '2x1'");
    out.push_back({static_cast<std::size_t>(to_uint(key, item.substr(0, x))),
                   static_cast<std::size_t>(to_uint(key, item.substr(x + 1)))});
  }
  if (out.empty()) throw ConfigError(key + ": empty shape list");
  return out;
}

inline std::string format_speed_profile(const std::vector<SpeedSegment>& p) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i].start_s << ':' << p[i].speed_mps;
  return os.str();
}

inline std::string format_shapes(const std::vector<Shape>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? ", " : "") + std::to_string(s[i].first) + "x" + std::to_string(s[i].second);
  return out;
}

template <class T>
std::string format_list(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

inline std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace detail

/// Applies one "section.Key = value" setting. Unknown keys are rejected.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  auto u = [&] { return static_cast<std::size_t>(to_uint(key, v)); };
  auto d = [&] { return to_double(key, v); };
  if (key == "NumTx") c.channel.n_tx = u();
  else if (key == "NumRx") c.channel.n_rx = u();
  else if (key == "NumSTS") c.num_sts = u();
  else if (key == "NumPackets") c.channel.n_snapshots = u();
  else if (key == "NumPaths") c.channel.n_paths = u();
  else if (key == "MaxDelaySamples") c.channel.max_delay_samples = u();
  else if (key == "CenterFreqHz") c.channel.f_c_hz = d();
  else if (key == "IntervalSec") c.channel.interval_s = d();
  else if (key == "KFactor_dB") c.channel.k_factor_db = d();
  else if (key == "VelocityAngleRad") c.channel.velocity_angle_rad = d();
  else if (key == "NumSubcarriers") c.channel.n_sc = u();
  else if (key == "SpeedProfile") c.channel.speed_profile = parse_speed_profile(key, v);
  else if (key == "Seed") c.seed = to_uint(key, v);
  else if (key == "Trials") c.trials = u();
  else if (key == "ChannelBandwidth") {
    static const std::map<std::string, double> bw{{"CBW20", 20e6}, {"CBW40", 40e6}, {"CBW80", 80e6}, {"CBW160", 160e6}};
    const auto it = bw.find(v);
    c.channel.bandwidth_hz = it != bw.end() ? it->second : d();
  }
  else if (key == "privacy.EpsPhi") c.budget.eps_phi = d();
  else if (key == "privacy.EpsPsi") c.budget.eps_psi = d();
  else if (key == "privacy.Delta") c.budget.delta = d();
  else if (key == "privacy.BitsPhi") c.bits_phi = static_cast<unsigned>(u());
  else if (key == "privacy.BitsPsi") c.bits_psi = static_cast<unsigned>(u());
  else if (key == "link.Modulation") {
    c.ber_modulations.clear();
    for (const auto& s : split_list(v)) c.ber_modulations.push_back(static_cast<unsigned>(to_uint(key, s)));
  }
  else if (key == "link.FeedbackBits") {
    c.ber_bits.clear();
    for (const auto& s : split_list(v)) c.ber_bits.push_back(static_cast<unsigned>(to_uint(key, s)));
  }
  else if (key == "link.SnrDb") {
    c.link.snr_db.clear();
    for (const auto& s : split_list(v)) c.link.snr_db.push_back(to_double(key, s));
  }
  else if (key == "link.Schemes") {
    c.link.schemes.clear();
    try {
      for (const auto& s : split_list(v)) c.link.schemes.push_back(parse_scheme(s));
    } catch (const InvalidInput& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  else if (key == "link.NumBits") c.link.n_bits = u();
  else if (key == "link.MinBits") c.link.min_bits = u();
  else if (key == "link.MinErrors") c.link.min_errors = u();
  else if (key == "link.BlockSymbols") c.link.block_symbols = u();
  else if (key == "link.NoisySounding") c.link.noisy_sounding = to_bool(key, v);
  else if (key == "constellation.SnrDb") c.constellation.snr_db = d();
  else if (key == "constellation.NumSymbols") c.constellation.n_symbols = u();
  else if (key == "constellation.Bits") c.constellation.bits = static_cast<unsigned>(u());
  else if (key == "constellation.Modulation") c.constellation.modulation = static_cast<unsigned>(u());
  else if (key == "gain.Shapes") c.gain.shapes = parse_shapes(key, v);
  else if (key == "gain.Realizations") c.gain.realizations = u();
  else if (key == "gain.KFactor_dB") c.gain.k_factor_db = d();
  else if (key == "adversary.Window") c.adversary.window = u();
  else if (key == "adversary.Hop") c.adversary.hop = u();
  else if (key == "adversary.EavesdropperSnrDb") c.adversary.eavesdropper_snr_db = d();
  else if (key == "adversary.SoundingSnrDb") c.adversary.sounding_snr_db = d();
  else if (key == "adversary.Weights") {
    if (v == "uniform") c.adversary.weights = WeightPolicy::Uniform;
    else if (v == "snr") c.adversary.weights = WeightPolicy::Snr;
    else throw ConfigError(key + ": expected 'uniform' or 'snr'");
  }
  else if (key == "spectrogram.FftLen") c.spectrogram.fft_len = u();
  else if (key == "spectrogram.Hop") c.spectrogram.hop = u();
  else if (key == "spectrogram.SpeedProfile") c.spectrogram.speed_profile = parse_speed_profile(key, v);
  else if (key == "spectrogram.KFactor_dB") c.spectrogram.k_factor_db = d();
  else if (key == "validate.MseDraws") c.validate.mse_draws = u();
  else if (key == "validate.BoundChannels") c.validate.bound_channels = u();
  else if (key == "validate.BoundShapes") c.validate.bound_shapes = parse_shapes(key, v);
  else if (key == "validate.RatioPairs") c.validate.ratio_pairs = u();
  else if (key == "validate.RatioDraws") c.validate.ratio_draws = u();
  else if (key == "validate.LsTrials") c.validate.ls_trials = u();
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Keeps derived fields in sync after parsing or a CLI override.
inline void finalize(ExperimentConfig& c) {
  c.channel.seed = c.seed;
  c.link.seed = c.seed;
  c.link.eps_phi = c.budget.eps_phi;
  c.link.eps_psi = c.budget.eps_psi;
}

/// Parses INI-style text: "Key = value" lines, optional [section] headers,
/// '#' or ';' comments. Link and channel keys live at the top level.
inline ExperimentConfig parse_config(std::istream& is) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [key, node] : pt) {
    if (node.empty()) {
      apply_setting(c, key, node.data());
    } else {
      for (const auto& [sub, leaf] : node) apply_setting(c, key + "." + sub, leaf.data());
    }
  }
  finalize(c);
  try {
    c.check();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(f);
}

/// Every setting as (key, value) text; parse_config() of this round-trips.
inline std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& c) {
  using namespace detail;
  std::vector<std::pair<std::string, std::string>> kv = {
      {"NumTx", std::to_string(c.channel.n_tx)},
      {"NumRx", std::to_string(c.channel.n_rx)},
      {"ChannelBandwidth", fmt(c.channel.bandwidth_hz)},
      {"NumSTS", std::to_string(c.num_sts)},
      {"NumPackets", std::to_string(c.channel.n_snapshots)},
      {"NumPaths", std::to_string(c.channel.n_paths)},
      {"MaxDelaySamples", std::to_string(c.channel.max_delay_samples)},
      {"CenterFreqHz", fmt(c.channel.f_c_hz)},
      {"IntervalSec", fmt(c.channel.interval_s)},
      {"KFactor_dB", fmt(c.channel.k_factor_db)},
      {"VelocityAngleRad", fmt(c.channel.velocity_angle_rad)},
      {"NumSubcarriers", std::to_string(c.channel.n_sc)},
      {"SpeedProfile", format_speed_profile(c.channel.speed_profile)},
      {"Seed", std::to_string(c.seed)},
      {"Trials", std::to_string(c.trials)},
      {"privacy.EpsPhi", fmt(c.budget.eps_phi)},
      {"privacy.EpsPsi", fmt(c.budget.eps_psi)},
      {"privacy.Delta", fmt(c.budget.delta)},
      {"privacy.BitsPhi", std::to_string(c.bits_phi)},
      {"privacy.BitsPsi", std::to_string(c.bits_psi)},
      {"link.Modulation", format_list(c.ber_modulations)},
      {"link.FeedbackBits", format_list(c.ber_bits)},
      {"link.SnrDb", format_list(c.link.snr_db)},
      {"link.NumBits", std::to_string(c.link.n_bits)},
      {"link.MinBits", std::to_string(c.link.min_bits)},
      {"link.MinErrors", std::to_string(c.link.min_errors)},
      {"link.BlockSymbols", std::to_string(c.link.block_symbols)},
      {"link.NoisySounding", c.link.noisy_sounding ? "true" : "false"},
      {"constellation.SnrDb", fmt(c.constellation.snr_db)},
      {"constellation.NumSymbols", std::to_string(c.constellation.n_symbols)},
      {"constellation.Bits", std::to_string(c.constellation.bits)},
      {"constellation.Modulation", std::to_string(c.constellation.modulation)},
      {"gain.Shapes", format_shapes(c.gain.shapes)},
      {"gain.Realizations", std::to_string(c.gain.realizations)},
      {"gain.KFactor_dB", fmt(c.gain.k_factor_db)},
      {"adversary.Window", std::to_string(c.adversary.window)},
      {"adversary.Hop", std::to_string(c.adversary.hop)},
      {"adversary.EavesdropperSnrDb", fmt(c.adversary.eavesdropper_snr_db)},
      {"adversary.SoundingSnrDb", fmt(c.adversary.sounding_snr_db)},
      {"adversary.Weights", c.adversary.weights == WeightPolicy::Snr ? "snr" : "uniform"},
      {"spectrogram.FftLen", std::to_string(c.spectrogram.fft_len)},
      {"spectrogram.Hop", std::to_string(c.spectrogram.hop)},
      {"spectrogram.SpeedProfile", format_speed_profile(c.spectrogram.speed_profile)},
      {"spectrogram.KFactor_dB", fmt(c.spectrogram.k_factor_db)},
      {"validate.MseDraws", std::to_string(c.validate.mse_draws)},
      {"validate.BoundChannels", std::to_string(c.validate.bound_channels)},
      {"validate.BoundShapes", format_shapes(c.validate.bound_shapes)},
      {"validate.RatioPairs", std::to_string(c.validate.ratio_pairs)},
      {"validate.RatioDraws", std::to_string(c.validate.ratio_draws)},
      {"validate.LsTrials", std::to_string(c.validate.ls_trials)},
  };
  std::vector<std::string> schemes;
  for (Scheme s : c.link.schemes) schemes.emplace_back(scheme_name(s));
  kv.emplace_back("link.Schemes", format_list(schemes));
  return kv;
}

/// INI text equivalent to `c`.
inline std::string config_to_ini(const ExperimentConfig& c) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : echo_config(c)) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) sections[""].emplace_back(k, v);
    else sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
  }
  std::ostringstream os;
  for (const auto& [k, v] : sections[""]) os << k << " = " << v << '\n';
  for (const auto& [name, items] : sections) {
    if (name.empty()) continue;
    os << "\n[" << name << "]\n";
    for (const auto& [k, v] : items) os << k << " = " << v << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Parallel execution

/// fn(i) for i in [0, n) on up to `threads` workers; results in index order.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t threads, Fn fn) {
  std::vector<T> out(n);
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Beamforming gain (relative-gain figures)

struct GainSummary {
  Shape shape;  // (n_t, n_r)
  Scheme scheme = Scheme::Deterministic;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
};

struct GainSamples {
  std::vector<double> det;
  std::vector<double> dpsq;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

}  // namespace detail

/// Per-realization relative gains for one (n_t, n_r) shape and one stream,
/// with feedback computed from the true channel.
inline GainSamples gain_samples(const ExperimentConfig& cfg, Shape shape, double k_factor_db, std::uint64_t stream,
                                std::size_t realizations, std::size_t threads = 1) {
  ChannelConfig chan = cfg.channel;
  chan.n_tx = shape.first;
  chan.n_rx = shape.second;
  chan.k_factor_db = k_factor_db;
  chan.validate();
  const auto grids = cfg.grids();
  struct Pair {
    double det = 0, dpsq = 0;
  };
  auto pairs = parallel_map<Pair>(realizations, threads, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, {0x6761696EULL, stream, i}));
    const ComplexMatrix h = draw_channel(chan, rng);
    const ComplexMatrix v_star = dominant_subspace(h, 1);
    const std::uint64_t key = derive_seed(cfg.seed, {0x64707371ULL, stream, i});
    return Pair{beamforming_gain(h, feedback_beamformer(Scheme::Deterministic, v_star, grids, cfg.budget, key), v_star),
                beamforming_gain(h, feedback_beamformer(Scheme::DpSq, v_star, grids, cfg.budget, key), v_star)};
  });
  GainSamples s;
  for (const auto& p : pairs) {
    s.det.push_back(p.det);
    s.dpsq.push_back(p.dpsq);
  }
  return s;
}

inline GainSummary summarize_gain(Shape shape, Scheme scheme, const std::vector<double>& g) {
  GainSummary s{shape, scheme, 0.0, detail::median_of(g), g.empty() ? 0.0 : *std::min_element(g.begin(), g.end())};
  for (double x : g) s.mean += x;
  if (!g.empty()) s.mean /= static_cast<double>(g.size());
  return s;
}

/// Mean/median/min gain for every configured shape (Rayleigh by default).
inline std::vector<GainSummary> run_gain(const ExperimentConfig& cfg, std::size_t threads = 1) {
  std::vector<GainSummary> out;
  for (std::size_t i = 0; i < cfg.gain.shapes.size(); ++i) {
    const auto s = gain_samples(cfg, cfg.gain.shapes[i], cfg.gain.k_factor_db, i, cfg.gain.realizations, threads);
    out.push_back(summarize_gain(cfg.gain.shapes[i], Scheme::Deterministic, s.det));
    out.push_back(summarize_gain(cfg.gain.shapes[i], Scheme::DpSq, s.dpsq));
  }
  return out;
}

/// Gain distribution on the configured channel, NumTx x NumRx.
inline GainSamples gain_distribution(const ExperimentConfig& cfg, std::size_t threads = 1) {
  return gain_samples(cfg, {cfg.channel.n_tx, cfg.channel.n_rx}, cfg.channel.k_factor_db, 0xF17, cfg.gain.realizations,
                      threads);
}

// ---------------------------------------------------------------------------
// BER and constellations

struct BerRow {
  unsigned modulation = 16;
  unsigned bits = 3;
  BerPoint point;
};

inline LinkConfig link_for(const ExperimentConfig& cfg, unsigned modulation, unsigned bits) {
  LinkConfig lc = cfg.link;
  lc.modulation = modulation;
  lc.b_phi = bits;
  lc.b_psi = bits;
  lc.seed = derive_seed(cfg.seed, {0x626572ULL, modulation, bits});
  return lc;
}

inline std::vector<BerRow> run_ber(const ExperimentConfig& cfg, std::size_t threads = 1) {
  struct Job {
    unsigned m, b;
  };
  std::vector<Job> jobs;
  for (unsigned m : cfg.ber_modulations)
    for (unsigned b : cfg.ber_bits) jobs.push_back({m, b});
  ChannelConfig chan = cfg.channel;
  auto tables = parallel_map<std::vector<BerPoint>>(jobs.size(), threads, [&](std::size_t i) {
    return simulate_ber(link_for(cfg, jobs[i].m, jobs[i].b), chan);
  });
  std::vector<BerRow> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    for (auto& p : tables[i]) rows.push_back({jobs[i].m, jobs[i].b, std::move(p)});
  return rows;
}

inline std::vector<ConstellationPoint> run_constellation(const ExperimentConfig& cfg) {
  LinkConfig lc = link_for(cfg, cfg.constellation.modulation, cfg.constellation.bits);
  return constellation_dump(lc, cfg.channel, cfg.constellation.snr_db, cfg.constellation.n_symbols);
}

// ---------------------------------------------------------------------------
// Speed-estimation attack

enum class FeedbackKind { None, Deterministic, DpSq };

inline std::string_view feedback_name(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::None: return "none";
    case FeedbackKind::Deterministic: return "det";
    case FeedbackKind::DpSq: return "dpsq";
  }
  return "?";
}

struct AttackSeries {
  FeedbackKind kind = FeedbackKind::None;
  SpeedEstimate estimate;
  std::vector<double> v_true;
  double mean_rel_error = 0.0;  // mean over windows of | |v_hat| - v | / v, where v > 0
};

struct AttackTrial {
  std::vector<AttackSeries> series;  // none, det, dpsq
  double eps_total = 0.0;            // composed budget over this trial's releases
  std::uint64_t releases = 0;
};

/// Feedback observed by an eavesdropper over one trace: the STA sounds every
/// subcarrier, feeds back the dominant wideband subspace once per snapshot,
/// and the eavesdropper tracks speed from its own noisy channel view
/// projected on the reported beam. All three feedback kinds share the trace,
/// sounding noise and eavesdropper noise.
inline AttackTrial run_attack_trial(const ExperimentConfig& cfg, std::size_t trial) {
  ChannelConfig chan = cfg.channel;
  chan.seed = derive_seed(cfg.seed, {0x61747461ULL, trial});
  const CsiTrace trace = generate_trace(chan);
  const auto grids = cfg.grids();
  const LsSounder sounder(chan.n_tx, 1.0, chan.n_tx);
  const double n0 = std::isinf(cfg.adversary.sounding_snr_db) ? 0.0 : 1.0 / db_to_linear(cfg.adversary.sounding_snr_db);
  Rng srng(derive_seed(chan.seed, {1}));

  std::vector<ComplexMatrix> exact;
  std::vector<std::vector<std::uint8_t>> det_frames, dp_frames;
  PrivacyBudget budget = cfg.budget;
  const auto rows = static_cast<Eigen::Index>(chan.n_sc * chan.n_rx);
  ComplexMatrix stacked(rows, static_cast<Eigen::Index>(chan.n_tx));
  for (std::size_t n = 0; n < trace.snapshots(); ++n) {
    for (std::size_t k = 0; k < chan.n_sc; ++k)
      stacked.middleRows(static_cast<Eigen::Index>(k * chan.n_rx), static_cast<Eigen::Index>(chan.n_rx)) =
          sounder.estimate(trace.matrix(n, k), n0, srng);
    const ComplexMatrix v = dominant_subspace(stacked, cfg.num_sts);
    const GivensAngles angles = decompose(v);
    exact.push_back(reconstruct(angles));
    det_frames.push_back(cbr_encode(quantize_angles_det(angles, grids), cfg.bits_phi, cfg.bits_psi).payload);
    dp_frames.push_back(
        cbr_encode(quantize_angles_dpsq(angles, grids, budget, derive_seed(chan.seed, {2, n})), cfg.bits_phi, cfg.bits_psi)
            .payload);
    budget.record();
  }

  const FrameFormat fmt{chan.n_tx, cfg.num_sts, grids};
  const std::uint64_t eve_seed = derive_seed(chan.seed, {3});
  std::vector<std::pair<FeedbackKind, EffectiveCsi>> observed;
  {
    Rng r(eve_seed);
    observed.emplace_back(FeedbackKind::None, observe_beams(std::span<const ComplexMatrix>(exact), trace,
                                                            cfg.adversary.eavesdropper_snr_db, r));
  }
  {
    Rng r(eve_seed);
    observed.emplace_back(FeedbackKind::Deterministic,
                          observe_feedback(std::span<const std::vector<std::uint8_t>>(det_frames), fmt, trace,
                                           cfg.adversary.eavesdropper_snr_db, r));
  }
  {
    Rng r(eve_seed);
    observed.emplace_back(FeedbackKind::DpSq, observe_feedback(std::span<const std::vector<std::uint8_t>>(dp_frames), fmt,
                                                               trace, cfg.adversary.eavesdropper_snr_db, r));
  }

  std::vector<double> times(trace.snapshots());
  for (std::size_t n = 0; n < times.size(); ++n) times[n] = trace.time(n);

  AttackTrial out;
  out.releases = budget.releases;
  out.eps_total = compose_budget(budget);
  for (auto& [kind, csi] : observed) {
    AttackSeries s;
    s.kind = kind;
    const auto w = subcarrier_weights(csi, cfg.adversary.weights);
    const auto series = aggregate_series(csi, w);
    s.estimate = sliding_speed(series, times, cfg.adversary.window, chan.f_c_hz, cfg.adversary.hop);
    double err = 0.0;
    std::size_t used = 0;
    for (std::size_t m = 0; m < s.estimate.times.size(); ++m) {
      const double v = chan.speed_at(s.estimate.times[m]);
      s.v_true.push_back(v);
      if (v > 0.0) {
        err += std::abs(std::abs(s.estimate.speed_mps[m]) - v) / v;
        ++used;
      }
    }
    s.mean_rel_error = used ? err / static_cast<double>(used) : 0.0;
    out.series.push_back(std::move(s));
  }
  return out;
}

inline std::vector<AttackTrial> run_attack(const ExperimentConfig& cfg, std::size_t threads = 1) {
  return parallel_map<AttackTrial>(cfg.trials, threads, [&](std::size_t t) { return run_attack_trial(cfg, t); });
}

// ---------------------------------------------------------------------------
// Spectrogram of the raw channel

inline Spectrogram run_spectrogram(const ExperimentConfig& cfg) {
  ChannelConfig chan = cfg.channel;
  chan.speed_profile = cfg.spectrogram.speed_profile;
  chan.k_factor_db = cfg.spectrogram.k_factor_db;
  chan.seed = derive_seed(cfg.seed, {0x73706563ULL});
  const CsiTrace trace = generate_trace(chan);
  EffectiveCsi csi{trace.snapshots(), trace.subcarriers(), {}};
  csi.values.reserve(trace.snapshots() * trace.subcarriers());
  for (std::size_t n = 0; n < trace.snapshots(); ++n)
    for (std::size_t k = 0; k < trace.subcarriers(); ++k) csi.values.push_back(trace.at(n, k, 0, 0));
  const auto series = aggregate_series(csi, subcarrier_weights(csi, WeightPolicy::Uniform));
  return spectrogram(series, cfg.spectrogram.fft_len, cfg.spectrogram.hop, chan.interval_s);
}

// ---------------------------------------------------------------------------
// Composition table

struct BudgetRow {
  std::uint64_t releases = 0;
  double eps_total = 0.0;
};

inline std::vector<BudgetRow> run_budget(const ExperimentConfig& cfg) {
  std::set<std::uint64_t> ks{1, 10, 100, 1000, 10000, static_cast<std::uint64_t>(cfg.channel.n_snapshots)};
  std::vector<BudgetRow> rows;
  for (auto k : ks) rows.push_back({k, compose_budget(cfg.budget, k)});
  return rows;
}

// ---------------------------------------------------------------------------
// Validation suite

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double reference = 0.0;
  std::string detail;
};

/// Monte-Carlo DP-SQ MSE for inputs uniform over one interior cell.
inline double mse_monte_carlo(const QuantGrid& g, double eps, std::size_t draws, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const std::size_t cell = g.kind == AngleKind::Phase ? g.levels() / 2 : (g.levels() - 2) / 2;
  const double q0 = g.level(cell);
  double acc = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double a = q0 + unit_uniform(rng) * g.step();
    const std::size_t out = quantize_dpsq(g, a, eps, rng);
    const double e = angle_error(g, g.level(out), a);
    acc += e * e;
  }
  return acc / static_cast<double>(draws);
}

inline std::vector<CheckResult> check_quant_mse(const ValidateConfig& vc, std::uint64_t seed) {
  std::vector<CheckResult> out;
  for (AngleKind kind : {AngleKind::Mixing, AngleKind::Phase}) {
    for (unsigned b : {1U, 3U, 6U}) {
      for (double eps : {0.1, 1.0, 10.0}) {
        const QuantGrid g(kind, b);
        const double mc = mse_monte_carlo(g, eps, vc.mse_draws,
                                                derive_seed(seed, {0x6C656D, static_cast<std::uint64_t>(kind), b,
                                                                   static_cast<std::uint64_t>(eps * 1000)}));
        const double pred = mse_predicted(g, eps);
        const double rel = std::abs(mc - pred) / pred;
        std::ostringstream name;
        name << "quant_mse " << (kind == AngleKind::Phase ? "phase" : "mixing") << " B=" << b << " eps=" << eps;
        out.push_back({name.str(), rel <= 0.01, mc, pred, "relative error " + detail::fmt(rel)});
      }
    }
  }
  return out;
}

/// Expected chordal distortion of DP-SQ precoders against the bound
/// E[d_q^2] + 2 N_s N_tot (sigma_psi^2 + sigma_phi^2), over Rayleigh channels
/// with n_r = n_s.
struct BoundMeasurement {
  Shape shape;  // (n_t, n_s)
  double mean_dp = 0.0;
  double mean_det = 0.0;
  double bound = 0.0;
  std::size_t channels = 0;
};

inline BoundMeasurement measure_bound(const ExperimentConfig& cfg, Shape shape, std::size_t channels,
                                          double eps_phi, double eps_psi, std::size_t threads = 1) {
  ChannelConfig chan = cfg.channel;
  chan.n_tx = shape.first;
  chan.n_rx = shape.second;
  chan.k_factor_db = -kInf;
  const auto grids = cfg.grids();
  const PrivacyBudget budget{eps_phi, eps_psi, cfg.budget.delta, 0};
  struct D {
    double dp = 0, det = 0;
  };
  auto d = parallel_map<D>(channels, threads, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, {0x746872ULL, shape.first, shape.second, i}));
    const ComplexMatrix h = draw_channel(chan, rng);
    const ComplexMatrix v_star = dominant_subspace(h, shape.second);
    const std::uint64_t key = derive_seed(cfg.seed, {0x746873ULL, shape.first, shape.second, i});
    const ComplexMatrix v_det = feedback_beamformer(Scheme::Deterministic, v_star, grids, budget, key);
    const ComplexMatrix v_dp = feedback_beamformer(Scheme::DpSq, v_star, grids, budget, key);
    return D{chordal_distance_sq(v_star, v_dp), chordal_distance_sq(v_star, v_det)};
  });
  BoundMeasurement m{shape, 0.0, 0.0, 0.0, channels};
  for (const auto& x : d) {
    m.mean_dp += x.dp;
    m.mean_det += x.det;
  }
  m.mean_dp /= static_cast<double>(channels);
  m.mean_det /= static_cast<double>(channels);
  const double n_tot = static_cast<double>(angle_count(shape.first, shape.second));
  m.bound = m.mean_det + 2.0 * static_cast<double>(shape.second) * n_tot *
                             (mse_predicted(grids.mixing, eps_psi) + mse_predicted(grids.phase, eps_phi));
  return m;
}

inline std::vector<CheckResult> check_error_bound(const ExperimentConfig& cfg, std::size_t threads = 1) {
  std::vector<CheckResult> out;
  for (const Shape& s : cfg.validate.bound_shapes) {
    const auto m = measure_bound(cfg, s, cfg.validate.bound_channels, cfg.budget.eps_phi, cfg.budget.eps_psi, threads);
    out.push_back({"error_bound " + std::to_string(s.first) + "x" + std::to_string(s.second), m.mean_dp <= m.bound,
                   m.mean_dp, m.bound, "E[d_q^2] = " + detail::fmt(m.mean_det) + ", slack " + detail::fmt(m.bound - m.mean_dp)});
  }
  return out;
}

/// Empirical per-level probability ratios for pairs of inputs in one cell,
/// each against e^eps with 3-sigma (delta-method) slack on the log ratio.
inline CheckResult check_dp_ratio(const ValidateConfig& vc, double eps, std::uint64_t seed) {
  const QuantGrid g(AngleKind::Phase, 6);
  SplitMix64 pick(derive_seed(seed, {0x726174ULL}));
  double worst_excess = -kInf;
  bool ok = true;
  for (std::size_t i = 0; i < vc.ratio_pairs; ++i) {
    const std::size_t cell = static_cast<std::size_t>(unit_uniform(pick) * static_cast<double>(g.levels()));
    const double a = g.level(cell) + unit_uniform(pick) * g.step();
    const double b = g.level(cell) + unit_uniform(pick) * g.step();
    const std::size_t lo = bracket(g, a).lo;
    auto freq_lo = [&](double x, std::uint64_t s) {
      SplitMix64 r(s);
      std::size_t n = 0;
      for (std::size_t k = 0; k < vc.ratio_draws; ++k) n += quantize_dpsq(g, x, eps, r) == lo;
      return static_cast<double>(n) / static_cast<double>(vc.ratio_draws);
    };
    const double fa = freq_lo(a, derive_seed(seed, {i, 0}));
    const double fb = freq_lo(b, derive_seed(seed, {i, 1}));
    const double nd = static_cast<double>(vc.ratio_draws);
    for (auto [p, q] : {std::pair{fa, fb}, std::pair{fb, fa}, std::pair{1 - fa, 1 - fb}, std::pair{1 - fb, 1 - fa}}) {
      if (p <= 0.0 || q <= 0.0) {
        ok = false;
        continue;
      }
      const double sigma = std::sqrt((1 - p) / (nd * p) + (1 - q) / (nd * q));
      const double excess = std::log(p / q) - (eps + 3.0 * sigma);
      worst_excess = std::max(worst_excess, excess);
      ok = ok && excess <= 0.0;
    }
  }
  return {"dp_ratio eps=" + detail::fmt(eps), ok, worst_excess, 0.0, "max(log ratio - eps - 3 sigma)"};
}

inline CheckResult check_ls_variance(std::size_t trials, double p_tx, std::size_t t_p, double n0, std::uint64_t seed) {
  const LsSounder s(2, p_tx, t_p);
  Rng rng(seed);
  const ComplexMatrix h = ComplexMatrix::Constant(1, 2, cplx(0.3, -0.7));
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const ComplexMatrix e = s.estimate(h, n0, rng) - h;
    acc += e.squaredNorm();
    n += static_cast<std::size_t>(e.size());
  }
  const double emp = acc / static_cast<double>(n);
  const double ref = n0 / (p_tx * static_cast<double>(t_p));
  const double rel = std::abs(emp - ref) / ref;
  return {"ls_variance P=" + detail::fmt(p_tx) + " Tp=" + std::to_string(t_p), rel <= 0.02, emp, ref,
          "relative error " + detail::fmt(rel)};
}

inline std::vector<CheckResult> check_composition(const PrivacyBudget& b) {
  // Closed-form values at eps = 0.1, delta = 1e-5, evaluated in 40-digit
  // arithmetic.
  const PrivacyBudget ref{0.1, 0.1, 1e-5, 0};
  std::vector<CheckResult> out;
  for (auto [k, expect] : {std::pair<std::uint64_t, double>{1, 0.49036968302637288},
                           std::pair<std::uint64_t, double>{10000, 153.15617719752844}}) {
    const double got = compose_budget(ref, k);
    out.push_back({"composition k=" + std::to_string(k), std::abs(got - expect) <= 1e-9 * std::max(1.0, expect), got,
                   expect, ""});
  }
  const double total = compose_budget(b, 1);
  out.push_back({"composition configured budget", std::isfinite(total) && total > 0.0, total, 0.0,
                 "eps_total for one release"});
  return out;
}

inline std::vector<CheckResult> validate_bounds(const ExperimentConfig& cfg, std::size_t threads = 1) {
  std::vector<CheckResult> all = check_quant_mse(cfg.validate, cfg.seed);
  for (auto& r : check_error_bound(cfg, threads)) all.push_back(std::move(r));
  all.push_back(check_dp_ratio(cfg.validate, cfg.budget.eps_phi, derive_seed(cfg.seed, {0x72})));
  all.push_back(check_ls_variance(cfg.validate.ls_trials, 1.0, 4, 0.1, derive_seed(cfg.seed, {0x6C73, 1})));
  all.push_back(check_ls_variance(cfg.validate.ls_trials, 2.0, 8, 0.1, derive_seed(cfg.seed, {0x6C73, 2})));
  for (auto& r : check_composition(cfg.budget)) all.push_back(std::move(r));
  return all;
}

// ---------------------------------------------------------------------------
// CSV writers. Full double precision so reruns can be compared byte for byte.

namespace csv {

inline std::ostream& prep(std::ostream& os) {
  os.precision(17);
  return os;
}

inline void write_ber(std::ostream& os, const std::vector<BerRow>& rows) {
  prep(os) << "modulation,bits,scheme,snr_db,ber,stderr,n_bits,errors\n";
  for (const auto& r : rows)
    os << r.modulation << ',' << r.bits << ',' << scheme_name(r.point.scheme) << ',' << r.point.snr_db << ','
       << r.point.ber << ',' << r.point.std_error << ',' << r.point.n_bits << ',' << r.point.errors << '\n';
}

inline void write_constellation(std::ostream& os, const std::vector<ConstellationPoint>& pts) {
  prep(os) << "re,im,scheme,sent_re,sent_im\n";
  for (const auto& p : pts)
    os << p.received.real() << ',' << p.received.imag() << ',' << scheme_name(p.scheme) << ',' << p.sent.real() << ','
       << p.sent.imag() << '\n';
}

inline void write_gain_summary(std::ostream& os, const std::vector<GainSummary>& rows) {
  prep(os) << "n_tx,n_rx,scheme,mean,median,min\n";
  for (const auto& r : rows)
    os << r.shape.first << ',' << r.shape.second << ',' << scheme_name(r.scheme) << ',' << r.mean << ',' << r.median
       << ',' << r.min << '\n';
}

inline void write_gain_samples(std::ostream& os, const GainSamples& s) {
  prep(os) << "realization,det,dpsq\n";
  for (std::size_t i = 0; i < s.det.size(); ++i) os << i << ',' << s.det[i] << ',' << s.dpsq[i] << '\n';
}

inline void write_attack(std::ostream& os, const std::vector<AttackTrial>& trials) {
  prep(os) << "trial,scheme,t,f_d_hz,v_mps,v_true_mps\n";
  for (std::size_t t = 0; t < trials.size(); ++t)
    for (const auto& s : trials[t].series)
      for (std::size_t m = 0; m < s.estimate.times.size(); ++m)
        os << t << ',' << feedback_name(s.kind) << ',' << s.estimate.times[m] << ',' << s.estimate.doppler_hz[m] << ','
           << s.estimate.speed_mps[m] << ',' << s.v_true[m] << '\n';
}

inline void write_attack_summary(std::ostream& os, const std::vector<AttackTrial>& trials) {
  prep(os) << "trial,scheme,mean_rel_error,releases,eps_total\n";
  for (std::size_t t = 0; t < trials.size(); ++t)
    for (const auto& s : trials[t].series)
      os << t << ',' << feedback_name(s.kind) << ',' << s.mean_rel_error << ',' << trials[t].releases << ','
         << trials[t].eps_total << '\n';
}

/// First row: frequency axis (Hz) after a "t_s\f_hz" corner cell. Each
/// following row: frame centre time, then magnitudes.
inline void write_spectrogram(std::ostream& os, const Spectrogram& sg) {
  prep(os) << "t_s\\f_hz";
  for (double f : sg.freqs) os << ',' << f;
  os << '\n';
  for (std::size_t i = 0; i < sg.times.size(); ++i) {
    os << sg.times[i];
    for (std::size_t b = 0; b < sg.freqs.size(); ++b) os << ',' << sg.at(i, b);
    os << '\n';
  }
}

inline void write_checks(std::ostream& os, const std::vector<CheckResult>& rows) {
  prep(os) << "check,passed,measured,reference,detail\n";
  for (const auto& r : rows)
    os << '"' << r.name << "\"," << (r.passed ? 1 : 0) << ',' << r.measured << ',' << r.reference << ",\"" << r.detail
       << "\"\n";
}

inline void write_budget(std::ostream& os, const std::vector<BudgetRow>& rows, const PrivacyBudget& b) {
  prep(os) << "releases,eps_phi,eps_psi,delta,eps_total\n";
  for (const auto& r : rows) os << r.releases << ',' << b.eps_phi << ',' << b.eps_psi << ',' << b.delta << ',' << r.eps_total << '\n';
}

}  // namespace csv

}  // namespace dpbeam

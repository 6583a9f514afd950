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

// dpbeamsim <subcommand> --config <file> [--seed N] [--out DIR] [--threads N]
//
// Exit status: 0 ok, 1 a validation check failed, 2 bad config or I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dpbeam/dpbeam.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kConfigError = 2;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A manifest.json from an earlier run is accepted as a config too.
dpbeam::ExperimentConfig read_config(const fs::path& path) {
  if (path.extension() != ".json") return dpbeam::load_config(path);
  std::ifstream f(path);
  if (!f) throw dpbeam::ConfigError("cannot open config file '" + path.string() + "'");
  ordered_json m;
  try {
    m = ordered_json::parse(f);
  } catch (const ordered_json::exception& e) {
    throw dpbeam::ConfigError(std::string("manifest: ") + e.what());
  }
  if (!m.contains("config_ini") || !m["config_ini"].is_string())
    throw dpbeam::ConfigError("manifest: missing 'config_ini'");
  std::istringstream is(m["config_ini"].get<std::string>());
  return dpbeam::parse_config(is);
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  template <class Fn>
  void write(const std::string& name, Fn fn) {
    const fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
    fn(os);
    os.flush();
    if (!os) throw IoError("write failed for '" + p.string() + "'");
    files_.push_back(name);
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

void write_manifest(Writer& w, const std::string& sub, const dpbeam::ExperimentConfig& cfg) {
  ordered_json m;
  m["tool"] = "dpbeamsim";
  m["version"] = dpbeam::kVersion;
  m["subcommand"] = sub;
  m["seed"] = cfg.seed;
  ordered_json c = ordered_json::object();
  for (const auto& [k, v] : dpbeam::echo_config(cfg)) c[k] = v;
  m["config"] = c;
  m["config_ini"] = dpbeam::config_to_ini(cfg);
  m["outputs"] = w.files();
  w.write("manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

int run(const std::string& sub, const dpbeam::ExperimentConfig& cfg, const fs::path& out, std::size_t threads) {
  using namespace dpbeam;
  Writer w(out);
  int status = kOk;
  if (sub == "ber") {
    const auto rows = run_ber(cfg, threads);
    w.write("ber.csv", [&](std::ostream& os) { csv::write_ber(os, rows); });
  } else if (sub == "constellation") {
    const auto pts = run_constellation(cfg);
    w.write("constellation.csv", [&](std::ostream& os) { csv::write_constellation(os, pts); });
  } else if (sub == "gain") {
    const auto summary = run_gain(cfg, threads);
    const auto dist = gain_distribution(cfg, threads);
    w.write("gain.csv", [&](std::ostream& os) { csv::write_gain_summary(os, summary); });
    w.write("gain_distribution.csv", [&](std::ostream& os) { csv::write_gain_samples(os, dist); });
    std::vector<GainSummary> table = {
        summarize_gain({cfg.channel.n_tx, cfg.channel.n_rx}, Scheme::Deterministic, dist.det),
        summarize_gain({cfg.channel.n_tx, cfg.channel.n_rx}, Scheme::DpSq, dist.dpsq)};
    w.write("gain_distribution_summary.csv", [&](std::ostream& os) { csv::write_gain_summary(os, table); });
  } else if (sub == "attack") {
    const auto trials = run_attack(cfg, threads);
    w.write("attack.csv", [&](std::ostream& os) { csv::write_attack(os, trials); });
    w.write("attack_summary.csv", [&](std::ostream& os) { csv::write_attack_summary(os, trials); });
  } else if (sub == "spectrogram") {
    const auto sg = run_spectrogram(cfg);
    w.write("spectrogram.csv", [&](std::ostream& os) { csv::write_spectrogram(os, sg); });
  } else if (sub == "validate") {
    const auto checks = validate_bounds(cfg, threads);
    w.write("validate.csv", [&](std::ostream& os) { csv::write_checks(os, checks); });
    for (const auto& c : checks) {
      std::cout << (c.passed ? "ok    " : "FAIL  ") << c.name << "  measured=" << c.measured
                << " reference=" << c.reference;
      if (!c.detail.empty()) std::cout << "  (" << c.detail << ')';
      std::cout << '\n';
      if (!c.passed) status = kValidationFailed;
    }
  } else if (sub == "budget") {
    const auto rows = run_budget(cfg);
    w.write("budget.csv", [&](std::ostream& os) { csv::write_budget(os, rows, cfg.budget); });
  }
  write_manifest(w, sub, cfg);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private beamforming feedback simulator"};
  app.set_version_flag("--version", std::string(dpbeam::kVersion));
  app.require_subcommand(1, 1);

  fs::path config_path;
  std::optional<std::uint64_t> seed;
  fs::path out_dir = "results";
  std::size_t threads = std::max(1U, std::thread::hardware_concurrency());

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"ber", "BER tables per modulation and feedback resolution"},
      {"constellation", "received-symbol dumps per scheme"},
      {"gain", "relative beamforming gain across antenna configurations"},
      {"attack", "speed-estimation attack traces, private vs. non-private"},
      {"spectrogram", "Doppler spectrogram of the raw channel"},
      {"validate", "analytic vs. Monte-Carlo checks"},
      {"budget", "advanced-composition table"},
  };
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "config file (INI, or a manifest.json)")->required()->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "override Seed");
    s->add_option("--out", out_dir, "output directory")->capture_default_str();
    s->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  dpbeam::ExperimentConfig cfg;
  try {
    cfg = read_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      dpbeam::finalize(cfg);
    }
  } catch (const dpbeam::ConfigError& e) {
    std::cerr << "dpbeamsim: config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    return run(sub, cfg, out_dir, threads);
  } catch (const IoError& e) {
    std::cerr << "dpbeamsim: " << e.what() << '\n';
    return kConfigError;
  } catch (const dpbeam::InvalidInput& e) {
    std::cerr << "dpbeamsim: invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "dpbeamsim: " << e.what() << '\n';
    return kConfigError;
  }
}

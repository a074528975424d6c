// Copyright 2026 The qdsps Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qdsps command-line runner: loads a scenario, runs one pipeline and writes
// its data files plus manifest.json into the output directory.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qdsps/default_scenario.hpp"
#include "qdsps/reproduction.hpp"
#include "qdsps/scenario.hpp"
#include "qdsps/version.hpp"

namespace fs = std::filesystem;
using namespace qdsps;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAcceptance = 4;

struct Invocation {
  std::string subcommand;
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string clicks_path;
};

/// Raised for unreadable inputs and unwritable outputs.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunResult {
  repro::Artifacts files;
  nlohmann::json derived_seeds = nlohmann::json::object();
  int exit_code = kExitOk;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json seed_entry(const ScenarioConfig& c, repro::SeedTag tag) { return repro::derived_seed(c, tag); }

RunResult run_design(const ScenarioConfig& c) {
  auto d = repro::run_design(c);
  std::cout << "diameter_um  Q       F_P_max  eta_ext\n";
  for (const auto& r : d.rows) {
    std::cout << repro::fmt(r.diameter_um, 2) << "         " << repro::fmt(r.q, 0) << "  " << repro::fmt(r.f_p_max, 3)
              << "    " << repro::fmt(r.eta_ext, 3) << '\n';
  }
  return {d.files, nlohmann::json::object()};
}

RunResult run_detuning(const ScenarioConfig& c) {
  auto d = repro::run_detuning_scan(c);
  std::cout << "Lorentzian fit: F_P = " << repro::fmt(d.noisy_fit.value("purcell_factor"), 4) << " +/- "
            << repro::fmt(d.noisy_fit.error("purcell_factor"), 4) << " (noiseless " +
                   repro::fmt(d.noiseless_fit.value("purcell_factor"), 6) + ")\n";
  return {d.files, {{"detuning_noise", seed_entry(c, repro::SeedTag::detuning_noise)}}};
}

RunResult run_lifetime(const ScenarioConfig& c, unsigned threads) {
  auto l = repro::run_lifetime(c, threads);
  nlohmann::json seeds = nlohmann::json::array();
  for (std::size_t i = 0; i < l.deltas_ueV.size(); ++i) {
    const auto& f = l.fits[i];
    std::cout << "delta " << format_number(l.deltas_ueV[i]) << " ueV: " << family_name(f.family) << " lifetime "
              << repro::fmt(f.lifetime_ps.value, 1) << " +/- " << repro::fmt(f.lifetime_ps.sigma, 1) << " ps"
              << (f.slow_lifetime_ps ? ", slow " + repro::fmt(f.slow_lifetime_ps->value, 1) + " ps" : std::string())
              << (f.reliable ? "" : " (unreliable)") << '\n';
    seeds.push_back(repro::derived_seed(c, repro::SeedTag::lifetime, i));
  }
  return {l.files, {{"lifetime", seeds}}};
}

RunResult run_rabi(const ScenarioConfig& c, unsigned threads) {
  if (c.rabi.areas_rad.empty() && c.rabi.series_deltas_ueV.empty()) {
    throw ConfigError("$.sweep.rabi", "rabi needs areas_rad or a detuning_series");
  }
  auto r = repro::run_rabi(c, threads);
  if (!r.curve.points.empty()) {
    std::cout << r.curve.points.size() << " pulse areas";
    if (r.fit) {
      std::cout << ", theta_pi = " << repro::fmt(r.fit->value("theta_pi"), 4)
                << " rad, damping = " << repro::fmt(r.fit->value("damping_per_rad"), 4) << " /rad";
    }
    std::cout << '\n';
  }
  for (const auto& s : r.series_fits) {
    std::cout << "delta " << format_number(s.delta_ueV) << " ueV: peak " << repro::fmt(s.peak_emission, 4)
              << ", theta_pi " << repro::fmt(s.fit.value("theta_pi"), 3) << " rad, damping "
              << repro::fmt(s.fit.value("damping_per_rad"), 4) << " /rad\n";
  }
  nlohmann::json seeds = nlohmann::json::object();
  if (c.rabi.method == RabiMethod::trajectories) seeds["rabi_trajectories"] = seed_entry(c, repro::SeedTag::rabi_trajectories);
  return {r.files, seeds};
}

ClickStream read_clicks(const std::string& path) {
  try {
    return load_click_stream(path);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, std::string("bad sidecar: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

RunResult run_hbt(const ScenarioConfig& c, const std::string& clicks_path, unsigned threads) {
  repro::HbtOutput h;
  nlohmann::json seeds{{"hbt_split", seed_entry(c, repro::SeedTag::hbt_split)}};
  if (!clicks_path.empty()) {
    h = repro::analyse_clicks(c, read_clicks(clicks_path), threads);
  } else {
    h = repro::run_hbt(c, threads);
    seeds["click_stream"] = c.seed;
    std::cout << "background photons per pulse: " << repro::fmt(h.background_mean_per_pulse, 5) << '\n';
  }
  std::cout << "clicks A/B: " << h.stream.count('A') << '/' << h.stream.count('B') << '\n';
  std::cout << "g2(0) = " << repro::fmt(h.g2.g2, 4) << " +/- " << repro::fmt(h.g2.error, 4) << '\n';
  if (h.envelope) {
    std::cout << "blinking-corrected g2(0) = " << repro::fmt(h.envelope->g2_corrected, 4) << " +/- "
              << repro::fmt(h.envelope->g2_corrected_error, 4) << '\n';
  }
  return {h.files, seeds};
}

RunResult run_paper_check(const ScenarioConfig& c, unsigned threads) {
  const auto a = repro::run_acceptance(c, threads);
  for (const auto& r : a.rows) std::cout << repro::format_row(r) << '\n';
  std::cout << (a.all_passed() ? "all acceptance rows passed" : "acceptance FAILED") << '\n';
  nlohmann::json seeds{{"detuning_noise", seed_entry(c, repro::SeedTag::detuning_noise)},
                       {"oracle_trajectories", seed_entry(c, repro::SeedTag::oracle_trajectories)},
                       {"perfect_source", seed_entry(c, repro::SeedTag::perfect_source)},
                       {"poisson_source", seed_entry(c, repro::SeedTag::poisson_source)},
                       {"hbt_split", seed_entry(c, repro::SeedTag::hbt_split)},
                       {"click_stream", c.seed}};
  return {a.files, seeds, a.all_passed() ? kExitOk : kExitAcceptance};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << content;
  os.close();
  if (!os) throw IoError("write failed for " + path.string());
}

/// Writes every artifact and the manifest; on failure removes what was written.
void commit(const Invocation& inv, const ScenarioConfig& c, const RunResult& result) {
  const fs::path dir(inv.out_dir);
  std::error_code ec;
  const bool existed = fs::exists(dir, ec);
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  std::vector<fs::path> written;
  try {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& a : result.files) {
      if (a.name == "manifest.json") throw std::logic_error("artifact name clashes with the manifest");
      const fs::path p = dir / a.name;
      if (fs::exists(p, ec) && !fs::is_regular_file(p, ec)) throw IoError(p.string() + " exists and is not a regular file");
      written.push_back(p);
      write_file(p, a.content);
      files.push_back({{"name", a.name}, {"bytes", a.content.size()}, {"fnv1a64", hex64(fnv1a64(a.content))}});
    }
    const nlohmann::json manifest{
        {"tool", "qdsps"},
        {"version", kVersion},
        {"eigen_version", eigen_version()},
        {"subcommand", inv.subcommand},
        {"scenario", {{"source", inv.scenario_path.empty() ? "built-in" : inv.scenario_path}, {"hash", c.hash}}},
        {"seeds", {{"base", c.seed}, {"derived", result.derived_seeds}}},
        {"threads", inv.threads},
        {"created_utc", utc_now()},
        {"files", files}};
    if (fs::exists(dir / "manifest.json", ec) && !fs::is_regular_file(dir / "manifest.json", ec)) {
      throw IoError((dir / "manifest.json").string() + " exists and is not a regular file");
    }
    written.push_back(dir / "manifest.json");
    write_file(dir / "manifest.json", dump_json(manifest));
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    if (!existed) fs::remove(dir, ec);
    throw;
  }
}

int run(const Invocation& inv) {
  ScenarioConfig c;
  if (inv.scenario_path.empty()) {
    c = parse_scenario(default_scenario(), inv.seed);
  } else {
    c = load_scenario(inv.scenario_path, inv.seed);
  }
  RunResult result;
  if (inv.subcommand == "design-sweep") {
    result = run_design(c);
  } else if (inv.subcommand == "detuning-scan") {
    result = run_detuning(c);
  } else if (inv.subcommand == "lifetime") {
    result = run_lifetime(c, inv.threads);
  } else if (inv.subcommand == "rabi") {
    result = run_rabi(c, inv.threads);
  } else if (inv.subcommand == "hbt") {
    result = run_hbt(c, inv.clicks_path, inv.threads);
  } else {
    result = run_paper_check(c, inv.threads);
  }
  commit(inv, c, result);
  std::cout << "wrote " << result.files.size() + 1 << " files to " << inv.out_dir << '\n';
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdsps: quantum-dot micropillar single-photon source simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Invocation inv;
  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {"design-sweep", "Purcell factor and extraction efficiency versus pillar diameter"},
      {"detuning-scan", "Emitter intensity versus QD-cavity detuning with Lorentzian fit"},
      {"lifetime", "Time-resolved decay traces with mono/biexponential fits"},
      {"rabi", "Emission versus pulse area, with damped-sinusoid fits"},
      {"hbt", "Click stream, coincidence histogram and g2(0) report"},
      {"paper-check", "Run the acceptance suite and print a pass/fail table"},
  };
  for (const auto& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--scenario", inv.scenario_path, "Scenario JSON file (default: built-in scenario)");
    sub->add_option("--out", inv.out_dir, "Output directory")->default_val(std::string("qdsps-") + s.name);
    sub->add_option("--seed", inv.seed, "Base seed, overrides seeds.base");
    sub->add_option("--threads", inv.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    if (std::string(s.name) == "hbt") {
      sub->add_option("--clicks", inv.clicks_path, "Analyse an existing click CSV (with .json sidecar)");
    }
    sub->callback([&inv, sub] { inv.subcommand = sub->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return run(inv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IntegrationError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const TrajectoryError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

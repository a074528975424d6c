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

#ifndef QDSPS_SCENARIO_HPP
#define QDSPS_SCENARIO_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdsps/click_stream.hpp"
#include "qdsps/cqed.hpp"
#include "qdsps/emission.hpp"
#include "qdsps/fitting.hpp"
#include "qdsps/model.hpp"

namespace qdsps {

/// Scenario schema violation; `path` points at the offending key ("$.system.kappa_ueV").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline constexpr int kScenarioSchemaVersion = 1;

/// Read-only view of one JSON object that remembers which keys were consumed.
class ConfigNode {
 public:
  ConfigNode(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "must be an object");
  }

  const std::string& path() const { return path_; }
  std::string key_path(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

  double number(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key_path(key), "must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

  std::int64_t integer(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) { return has(key) ? integer(key) : mark(key, fallback); }

  std::uint64_t unsigned_integer(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(key_path(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return mark(key, fallback);
    const auto& v = at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : mark(key, fallback); }

  std::vector<double> numbers(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_array()) throw ConfigError(key_path(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected a finite number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  ConfigNode child(const std::string& key) { return ConfigNode(at(key), key_path(key)); }
  std::optional<ConfigNode> optional_child(const std::string& key) {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return child(key);
  }

  const nlohmann::json& raw(const std::string& key) { return at(key); }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const nlohmann::json& at(const std::string& key) {
    used_.insert(key);
    if (!j_->contains(key)) throw ConfigError(key_path(key), "required key is missing");
    return (*j_)[key];
  }
  template <class T>
  T mark(const std::string& key, T value) {
    used_.insert(key);
    return value;
  }

  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string> used_;
};

struct CouplingConfig {
  /// "lifetimes", "g" or "purcell".
  std::string mode = "lifetimes";
  double t_on_ps = 221.0;
  double t_off_ps = 890.0;
  double delta_off_ueV = 360.0;
  double g_ueV = 0.0;
  double gamma_leaky_per_ps = 1.0 / 890.0;
  double purcell_factor = 3.0;
};

struct DesignSweepConfig {
  std::vector<double> diameters_um{1.0, 2.0, 2.5, 3.0, 4.0, 8.0};
  QTable q_table{{1.0, 2000.0}, {2.0, 4800.0}, {2.5, 5300.0}, {3.0, 5600.0}, {4.0, 5950.0}, {8.0, 6500.0}};
  ModeVolumeReference reference;
  double q_2d = 6670.0;
  double gamma_fraction = 1.0;
};

struct DetuningScanConfig {
  std::vector<double> deltas_ueV;
  double purcell_factor = 3.1;
  double gamma_c_ueV = 233.0;
  double amplitude = 1.0;
  double relative_noise = 0.05;
};

struct LifetimeSweepConfig {
  std::vector<double> deltas_ueV{0.0, 360.0};
  /// Cavity-feeding amplitude per detuning; a single value applies to all.
  std::vector<double> feeding_amplitudes{0.1, 0.0};
  LifetimeTraceOptions trace;
};

struct RabiSweepConfig {
  std::vector<double> areas_rad;
  RabiMethod method = RabiMethod::master_equation;
  std::size_t n_trajectories = 10000;
  std::vector<double> series_deltas_ueV;
  std::vector<double> series_areas_rad;
  DephasingMap dephasing{0.01, 1e-4};
};

struct HbtAnalysisConfig {
  double bin_width_ps = 64.0;
  int n_side_peaks = 10;
  std::optional<double> window_ps;
  bool envelope = true;
};

struct LifetimeAnalysisConfig {
  LifetimeMode mode = LifetimeMode::automatic;
  double aicc_margin = 10.0;
};

struct ScenarioConfig {
  ExperimentScenario experiment;
  CouplingConfig coupling;
  std::optional<double> background_g2_target;
  DesignSweepConfig design;
  DetuningScanConfig detuning;
  LifetimeSweepConfig lifetime;
  RabiSweepConfig rabi;
  HbtAnalysisConfig hbt;
  LifetimeAnalysisConfig lifetime_analysis;
  bool write_click_stream = true;
  std::uint64_t seed = 0;
  /// Effective document (with any seed override applied) and its hash.
  nlohmann::json document;
  std::string hash;
};

namespace detail {

inline std::vector<double> linspace(double start, double stop, std::int64_t count) {
  std::vector<double> out;
  for (std::int64_t i = 0; i < count; ++i) {
    out.push_back(count == 1 ? start : start + (stop - start) * double(i) / double(count - 1));
  }
  return out;
}

/// Either a plain array or {"start_<unit>", "stop_<unit>", "count"}.
inline std::vector<double> grid(ConfigNode& parent, const std::string& key, const std::string& unit) {
  const auto& v = parent.raw(key);
  if (v.is_array()) return parent.numbers(key);
  ConfigNode g = parent.child(key);
  const double start = g.number("start_" + unit), stop = g.number("stop_" + unit);
  const std::int64_t count = g.integer("count");
  if (count < 1) throw ConfigError(g.key_path("count"), "must be >= 1");
  g.finish();
  return linspace(start, stop, count);
}

inline void parse_system(ConfigNode n, ScenarioConfig& c) {
  auto& m = c.experiment.model;
  m.kappa_ueV = n.number("kappa_ueV", 233.0);
  m.gamma_dephasing_per_ps = n.number("gamma_dephasing_per_ps", 0.0);
  m.delta_qd_cavity_ueV = n.number("delta_qd_cavity_ueV", 0.0);
  m.delta_laser_qd_ueV = n.number("delta_laser_qd_ueV", 0.0);
  c.experiment.hilbert.n_fock = int(n.integer("n_fock", 2));
  if (auto cn = n.optional_child("coupling")) {
    auto& k = c.coupling;
    k.mode = cn->string("mode");
    if (k.mode == "lifetimes") {
      k.t_on_ps = cn->number("t_on_ps");
      k.t_off_ps = cn->number("t_off_ps");
      k.delta_off_ueV = cn->number("delta_off_ueV");
    } else if (k.mode == "g") {
      k.g_ueV = cn->number("g_ueV");
      k.gamma_leaky_per_ps = cn->number("gamma_leaky_per_ps");
    } else if (k.mode == "purcell") {
      k.purcell_factor = cn->number("purcell_factor");
      k.gamma_leaky_per_ps = cn->number("gamma_leaky_per_ps");
    } else {
      throw ConfigError(cn->key_path("mode"), "must be \"lifetimes\", \"g\" or \"purcell\"");
    }
    cn->finish();
  }
  n.finish();
}

inline void resolve_coupling(ScenarioConfig& c) {
  auto& m = c.experiment.model;
  const auto& k = c.coupling;
  if (k.mode == "lifetimes") {
    const auto cal = calibrate_to_lifetimes(k.t_on_ps, k.t_off_ps, k.delta_off_ueV, m.kappa_ueV);
    m.g_ueV = cal.g_ueV;
    m.gamma_leaky_per_ps = cal.gamma_leaky_per_ps;
  } else if (k.mode == "g") {
    m.g_ueV = k.g_ueV;
    m.gamma_leaky_per_ps = k.gamma_leaky_per_ps;
  } else {
    m.gamma_leaky_per_ps = k.gamma_leaky_per_ps;
    m.g_ueV = coupling_for_purcell(k.purcell_factor, m.kappa_ueV, k.gamma_leaky_per_ps);
  }
}

inline void parse_source(ConfigNode n, ScenarioConfig& c) {
  auto& e = c.experiment;
  const double rate_mhz = n.number("rep_rate_MHz", 82.0);
  if (!(rate_mhz > 0.0)) throw ConfigError(n.key_path("rep_rate_MHz"), "must be positive");
  e.rep_period_ps = 1e6 / rate_mhz;
  e.n_pulses = n.integer("n_pulses", 100000);
  e.emitter_enabled = n.boolean("emitter_enabled", true);
  if (auto b = n.optional_child("background")) {
    e.background.delay_tau_ps = b->number("delay_tau_ps", 1000.0);
    if (b->has("g2_target") && b->has("mean_per_pulse")) {
      throw ConfigError(b->path(), "give either mean_per_pulse or g2_target, not both");
    }
    if (b->has("g2_target")) {
      c.background_g2_target = b->number("g2_target");
      b->number("mean_per_pulse", 0.0);
    } else {
      e.background.mean_per_pulse = b->number("mean_per_pulse", 0.0);
      b->number("g2_target", 0.0);
    }
    b->finish();
  }
  if (auto b = n.optional_child("blinking")) {
    e.blinking = Blinking{b->number("rate_on_to_off_per_ps"), b->number("rate_off_to_on_per_ps")};
    b->finish();
  }
  n.finish();
}

inline void parse_sweep(ConfigNode n, ScenarioConfig& c) {
  if (auto d = n.optional_child("design")) {
    auto& s = c.design;
    s.diameters_um = d->numbers("diameters_um");
    if (d->has("q_table")) {
      const auto& table = d->raw("q_table");
      const std::string path = d->key_path("q_table");
      if (!table.is_array()) throw ConfigError(path, "expected an array of {diameter_um, q}");
      s.q_table.clear();
      for (std::size_t i = 0; i < table.size(); ++i) {
        ConfigNode row(table[i], path + "[" + std::to_string(i) + "]");
        s.q_table[row.number("diameter_um")] = row.number("q");
        row.finish();
      }
    }
    s.q_2d = d->number("q_2d", 6670.0);
    s.gamma_fraction = d->number("gamma_fraction", 1.0);
    if (auto r = d->optional_child("mode_volume_reference")) {
      s.reference.diameter_um = r->number("diameter_um", 4.0);
      s.reference.v_mode = r->number("v_mode_cubic_wavelengths", 141.3);
      r->finish();
    }
    d->finish();
  }
  if (auto d = n.optional_child("detuning")) {
    auto& s = c.detuning;
    s.deltas_ueV = grid(*d, "deltas_ueV", "ueV");
    s.purcell_factor = d->number("purcell_factor", 3.1);
    s.gamma_c_ueV = d->number("gamma_c_ueV", 233.0);
    s.amplitude = d->number("amplitude", 1.0);
    s.relative_noise = d->number("relative_noise", 0.05);
    d->finish();
  }
  if (auto d = n.optional_child("lifetime")) {
    auto& s = c.lifetime;
    s.deltas_ueV = d->numbers("deltas_ueV");
    s.feeding_amplitudes = d->has("feeding_amplitudes") ? d->numbers("feeding_amplitudes") : std::vector<double>{0.0};
    s.trace.feeding_tau_ps = d->number("feeding_tau_ps", 1000.0);
    s.trace.bin_width_ps = d->number("bin_width_ps", 16.0);
    s.trace.pre_pulse_ps = d->number("pre_pulse_ps", 2000.0);
    s.trace.span_ps = d->number("span_ps", 8000.0);
    s.trace.peak_counts = d->number("peak_counts", 20000.0);
    s.trace.dark_counts_per_bin = d->number("dark_counts_per_bin", 20.0);
    s.trace.poisson = d->boolean("poisson", true);
    d->finish();
  }
  if (auto d = n.optional_child("rabi")) {
    auto& s = c.rabi;
    s.areas_rad = grid(*d, "areas_rad", "rad");
    const std::string method = d->string("method", "master_equation");
    if (method == "master_equation") {
      s.method = RabiMethod::master_equation;
    } else if (method == "trajectories") {
      s.method = RabiMethod::trajectories;
    } else {
      throw ConfigError(d->key_path("method"), "must be \"master_equation\" or \"trajectories\"");
    }
    s.n_trajectories = std::size_t(d->integer("n_trajectories", 10000));
    if (auto series = d->optional_child("detuning_series")) {
      s.series_deltas_ueV = series->numbers("deltas_ueV");
      s.series_areas_rad = grid(*series, "areas_rad", "rad");
      if (auto dm = series->optional_child("dephasing")) {
        s.dephasing.base_per_ps = dm->number("base_per_ps", 0.0);
        s.dephasing.slope_per_ps_per_ueV = dm->number("slope_per_ps_per_ueV", 0.0);
        dm->finish();
      }
      series->finish();
    }
    d->finish();
  }
  n.finish();
}

inline void parse_analysis(ConfigNode n, ScenarioConfig& c) {
  if (auto h = n.optional_child("hbt")) {
    c.hbt.bin_width_ps = h->number("bin_width_ps", 64.0);
    c.hbt.n_side_peaks = int(h->integer("n_side_peaks", 10));
    if (h->has("window_ps")) {
      c.hbt.window_ps = h->number("window_ps");
    } else {
      h->number("window_ps", 0.0);
    }
    c.hbt.envelope = h->boolean("envelope_fit", true);
    h->finish();
  }
  if (auto l = n.optional_child("lifetime")) {
    const std::string mode = l->string("mode", "auto");
    if (mode == "auto") {
      c.lifetime_analysis.mode = LifetimeMode::automatic;
    } else if (mode == "mono") {
      c.lifetime_analysis.mode = LifetimeMode::mono;
    } else if (mode == "bi") {
      c.lifetime_analysis.mode = LifetimeMode::bi;
    } else {
      throw ConfigError(l->key_path("mode"), "must be \"auto\", \"mono\" or \"bi\"");
    }
    c.lifetime_analysis.aicc_margin = l->number("aicc_margin", 10.0);
    l->finish();
  }
  n.finish();
}

template <class Check>
void checked(const std::string& path, Check&& check) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

/// Parses and validates a scenario document. `seed_override` replaces seeds.base.
inline ScenarioConfig parse_scenario(nlohmann::json doc, std::optional<std::uint64_t> seed_override = std::nullopt) {
  ConfigNode root(doc, "$");
  const std::int64_t version = root.integer("schema_version");
  if (version != kScenarioSchemaVersion) {
    throw ConfigError("$.schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                              std::to_string(kScenarioSchemaVersion) + ")");
  }
  ScenarioConfig c;
  if (auto n = root.optional_child("system")) detail::parse_system(std::move(*n), c);
  if (auto n = root.optional_child("pulse")) {
    auto& p = c.experiment.model.pulse;
    p.area_rad = n->number("area_rad", kPi);
    p.fwhm_ps = n->number("fwhm_ps", 1.3);
    p.center_ps = n->number("center_ps", 10.0);
    n->finish();
  }
  if (auto n = root.optional_child("detector")) {
    auto& d = c.experiment.detector;
    d.jitter_fwhm_ps = n->number("jitter_fwhm_ps", 400.0);
    d.efficiency = n->number("efficiency", 1.0);
    d.dead_time_ps = n->number("dead_time_ps", 0.0);
    d.dark_rate_per_ps = n->number("dark_rate_per_ps", 0.0);
    n->finish();
  }
  if (auto n = root.optional_child("source")) detail::parse_source(std::move(*n), c);
  if (auto n = root.optional_child("sweep")) detail::parse_sweep(std::move(*n), c);
  if (auto n = root.optional_child("analysis")) detail::parse_analysis(std::move(*n), c);
  if (auto n = root.optional_child("seeds")) {
    c.seed = n->unsigned_integer("base");
    n->finish();
  }
  if (auto n = root.optional_child("outputs")) {
    c.write_click_stream = n->boolean("click_stream", true);
    n->finish();
  }
  root.finish();

  if (seed_override) {
    c.seed = *seed_override;
    doc["seeds"]["base"] = *seed_override;
  }
  c.experiment.base_seed = c.seed;
  c.document = doc;
  c.hash = json_hash(doc);
  c.experiment.hash = c.hash;

  detail::checked("$.system", [&] { detail::resolve_coupling(c); });
  detail::checked("$", [&] { c.experiment.validate(); });
  if (c.background_g2_target) {
    const double g = *c.background_g2_target;
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("$.source.background.g2_target", "must lie in [0, 1)");
  }
  detail::checked("$.sweep.lifetime", [&] {
    const auto& l = c.lifetime;
    require(!l.deltas_ueV.empty(), "deltas_ueV must not be empty");
    require(l.feeding_amplitudes.size() == 1 || l.feeding_amplitudes.size() == l.deltas_ueV.size(),
            "feeding_amplitudes needs one value or one per detuning");
    for (double a : l.feeding_amplitudes) require_non_negative(a, "feeding_amplitudes");
  });
  detail::checked("$.sweep.detuning", [&] {
    require_positive(c.detuning.gamma_c_ueV, "gamma_c_ueV");
    require_non_negative(c.detuning.purcell_factor, "purcell_factor");
    require_non_negative(c.detuning.relative_noise, "relative_noise");
  });
  detail::checked("$.sweep.rabi", [&] {
    require(c.rabi.n_trajectories >= 2, "n_trajectories must be >= 2");
    c.rabi.dephasing.validate();
  });
  detail::checked("$.analysis.hbt", [&] {
    require_positive(c.hbt.bin_width_ps, "bin_width_ps");
    require(c.hbt.n_side_peaks >= 1, "n_side_peaks must be >= 1");
    if (c.hbt.window_ps) {
      require(*c.hbt.window_ps > 0.0 && *c.hbt.window_ps <= c.experiment.rep_period_ps,
              "window_ps must lie in (0, rep period]");
    }
  });
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path, "cannot open scenario file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario(std::move(doc), seed_override);
}

/// Calibrated background for `background.g2_target`; no-op otherwise.
inline void resolve_background(ScenarioConfig& c) {
  if (!c.background_g2_target) return;
  const auto stats = pulse_photon_statistics(c.experiment);
  c.experiment.background.mean_per_pulse = background_for_g2(stats.mean, stats.g2_intrinsic, *c.background_g2_target);
}

}  // namespace qdsps

#endif  // QDSPS_SCENARIO_HPP

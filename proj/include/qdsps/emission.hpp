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

#ifndef QDSPS_EMISSION_HPP
#define QDSPS_EMISSION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qdsps/click_stream.hpp"
#include "qdsps/common.hpp"
#include "qdsps/cqed.hpp"
#include "qdsps/csv.hpp"
#include "qdsps/fitting.hpp"
#include "qdsps/hilbert.hpp"
#include "qdsps/master_equation.hpp"
#include "qdsps/model.hpp"
#include "qdsps/random.hpp"
#include "qdsps/trajectory.hpp"

namespace qdsps {

struct DetectorModel {
  double jitter_fwhm_ps = 400.0;
  /// Overall detection probability per emitted photon, setup losses included.
  double efficiency = 1.0;
  double dead_time_ps = 0.0;
  double dark_rate_per_ps = 0.0;

  void validate() const {
    require_non_negative(jitter_fwhm_ps, "detector jitter_fwhm_ps");
    require(std::isfinite(efficiency) && efficiency >= 0.0 && efficiency <= 1.0, "detector efficiency must lie in [0, 1]");
    require_non_negative(dead_time_ps, "detector dead_time_ps");
    require_non_negative(dark_rate_per_ps, "detector dark_rate_per_ps");
  }
};

/// Two-state telegraph process; the emitter is dark while off.
struct Blinking {
  double rate_on_to_off_per_ps = 0.0;
  double rate_off_to_on_per_ps = 0.0;

  double duty_cycle() const { return rate_off_to_on_per_ps / (rate_on_to_off_per_ps + rate_off_to_on_per_ps); }

  /// Side-peak bunching contrast c and correlation length k0 (in pulses).
  double contrast() const { return rate_on_to_off_per_ps / rate_off_to_on_per_ps; }
  double correlation_pulses(double rep_period_ps) const {
    return 1.0 / ((rate_on_to_off_per_ps + rate_off_to_on_per_ps) * rep_period_ps);
  }

  void validate() const {
    require_positive(rate_on_to_off_per_ps, "blinking rate_on_to_off_per_ps");
    require_positive(rate_off_to_on_per_ps, "blinking rate_off_to_on_per_ps");
  }
};

/// Uncorrelated photons per pulse (spectator-emitter cavity feeding), Poisson
/// distributed, emitted with an exponential delay after the pulse center.
struct BackgroundPhotons {
  double mean_per_pulse = 0.0;
  double delay_tau_ps = 1000.0;

  void validate() const {
    require_non_negative(mean_per_pulse, "background mean_per_pulse");
    require_positive(delay_tau_ps, "background delay_tau_ps");
  }
};

inline constexpr double kRepPeriod82MHzPs = 1e6 / 82.0;

struct ExperimentScenario {
  SystemModel model;
  HilbertConfig hilbert{2};
  std::int64_t n_pulses = 1;
  double rep_period_ps = kRepPeriod82MHzPs;
  DetectorModel detector;
  std::optional<Blinking> blinking;
  BackgroundPhotons background;
  bool emitter_enabled = true;
  std::uint64_t base_seed = 0;
  /// Fingerprint of the scenario document this was loaded from, if any.
  std::string hash;

  void validate() const {
    model.validate();
    hilbert.validate();
    require(n_pulses >= 1, "n_pulses must be >= 1");
    require_positive(rep_period_ps, "rep_period_ps");
    require(rep_period_ps > 20.0 * model.pulse.fwhm_ps, "rep_period_ps must exceed 20 pulse FWHM");
    require(model.pulse.end_ps() < rep_period_ps, "pulse must end inside the repetition period");
    detector.validate();
    if (blinking) blinking->validate();
    background.validate();
  }
};

// ---------------------------------------------------------------------------
// Rabi curves

struct RabiPoint {
  double area_rad = 0.0;
  /// Plotting axis for a √power abscissa: power ∝ area².
  double power = 0.0;
  double emission_probability = 0.0;
  double mc_error = 0.0;
  /// Excited-state population right after the pulse.
  double inversion = 0.0;
};

struct RabiCurve {
  std::vector<RabiPoint> points;
};

/// Emission probability (integrated cavity flux over one period from |g,0>)
/// and post-pulse inversion at pulse area `area_rad`.
inline RabiPoint rabi_point(const ExperimentScenario& scenario, double area_rad, OdeOptions options = {}) {
  require(std::isfinite(area_rad) && area_rad >= 0.0, "pulse areas must be finite and >= 0");
  SystemModel m = scenario.model;
  m.pulse.area_rad = area_rad;
  const auto ops = build_model_operators(scenario.hilbert, m);
  TimeGrid grid{0.0, scenario.rep_period_ps, std::numeric_limits<double>::infinity(), {m.pulse.end_ps(), scenario.rep_period_ps}};
  try {
    const auto ev = evolve_master_equation(DensityMatrix::pure(ops::basis_state(scenario.hilbert, false, 0), 0.0), ops,
                                           grid, options);
    RabiPoint p;
    p.area_rad = area_rad;
    p.power = area_rad * area_rad;
    p.emission_probability = std::clamp(ev.integrated_flux.back()[std::size_t(Channel::cavity)], 0.0, 1.0);
    p.inversion = std::clamp(expectation_real(ops::excited_population(scenario.hilbert), ev.states.front()), 0.0, 1.0);
    return p;
  } catch (const IntegrationError& e) {
    throw IntegrationError(std::string(e.what()) + " at pulse area " + format_number(area_rad) + " rad", e.time_ps());
  }
}

/// Monte Carlo estimate from `n_trajectories` jump trajectories: mean cavity
/// clicks per pulse with its standard error. Trajectory k uses stream (seed, k).
inline RabiPoint rabi_point_mc(const ExperimentScenario& scenario, double area_rad, std::size_t n_trajectories,
                               std::uint64_t seed, unsigned threads = 1) {
  require(std::isfinite(area_rad) && area_rad >= 0.0, "pulse areas must be finite and >= 0");
  require(n_trajectories >= 2, "need at least two trajectories");
  SystemModel m = scenario.model;
  m.pulse.area_rad = area_rad;
  const auto ops = build_model_operators(scenario.hilbert, m);
  const JumpUnraveling unraveling(ops);
  const StateVector ground = ops::basis_state(scenario.hilbert, false, 0);
  const TimeGrid grid{0.0, scenario.rep_period_ps, std::numeric_limits<double>::infinity(), {m.pulse.end_ps()}};
  std::vector<double> clicks(n_trajectories), inversion(n_trajectories);
  parallel_for(n_trajectories, threads, [&](std::size_t k) {
    Rng rng = make_stream(seed, k);
    const Trajectory tr = unraveling.sample(ground, grid, rng);
    clicks[k] = double(tr.cavity_clicks.size());
    double pe = 0.0;
    for (int n = 0; n <= scenario.hilbert.n_fock; ++n) pe += std::norm(tr.samples[0](scenario.hilbert.index(true, n)));
    inversion[k] = pe;
  });
  const double n = double(n_trajectories);
  double mean = 0.0, mean_inv = 0.0;
  for (std::size_t k = 0; k < n_trajectories; ++k) mean += clicks[k], mean_inv += inversion[k];
  mean /= n;
  double var = 0.0;
  for (double c : clicks) var += (c - mean) * (c - mean);
  var /= (n - 1.0);
  RabiPoint p;
  p.area_rad = area_rad;
  p.power = area_rad * area_rad;
  p.emission_probability = mean;
  p.mc_error = std::sqrt(var / n);
  p.inversion = mean_inv / n;
  return p;
}

enum class RabiMethod { master_equation, trajectories };

struct RabiOptions {
  RabiMethod method = RabiMethod::master_equation;
  std::size_t n_trajectories = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  OdeOptions ode;
};

/// Emission probability versus pulse area. With trajectories, area i uses seed
/// stream_seed(seed, i).
inline RabiCurve rabi_curve(const ExperimentScenario& scenario, const std::vector<double>& areas,
                            const RabiOptions& options = {}) {
  scenario.validate();
  RabiCurve curve;
  curve.points.resize(areas.size());
  if (options.method == RabiMethod::trajectories) {
    for (std::size_t i = 0; i < areas.size(); ++i) {
      curve.points[i] = rabi_point_mc(scenario, areas[i], options.n_trajectories, stream_seed(options.seed, i),
                                      options.threads);
    }
    return curve;
  }
  parallel_for(areas.size(), options.threads,
               [&](std::size_t i) { curve.points[i] = rabi_point(scenario, areas[i], options.ode); });
  return curve;
}

/// Pulse area reaching the emitter when the drive is funnelled through the cavity:
/// the field amplitude is filtered by the cavity Lorentzian L = 1/(1+(2δ/κ)²).
inline double cavity_filtered_drive(double area_at_resonance, double delta_laser_cavity_ueV, double kappa_ueV) {
  require_positive(kappa_ueV, "kappa_ueV");
  require_finite(area_at_resonance, "area_at_resonance");
  require_finite(delta_laser_cavity_ueV, "delta_laser_cavity_ueV");
  const double x = 2.0 * delta_laser_cavity_ueV / kappa_ueV;
  return area_at_resonance / std::sqrt(1.0 + x * x);
}

/// Cavity Lorentzian transmission L(δ); the input power for a fixed emitter area scales as 1/L.
inline double cavity_lorentzian(double delta_ueV, double kappa_ueV) {
  require_positive(kappa_ueV, "kappa_ueV");
  const double x = 2.0 * delta_ueV / kappa_ueV;
  return 1.0 / (1.0 + x * x);
}

/// Pure-dephasing rate as a function of |Δ|: base + slope·|Δ|.
struct DephasingMap {
  double base_per_ps = 0.0;
  double slope_per_ps_per_ueV = 0.0;

  double operator()(double delta_ueV) const { return base_per_ps + slope_per_ps_per_ueV * std::abs(delta_ueV); }

  void validate() const {
    require_non_negative(base_per_ps, "dephasing base_per_ps");
    require_non_negative(slope_per_ps_per_ueV, "dephasing slope_per_ps_per_ueV");
  }
};

struct DetuningCurve {
  double delta_ueV = 0.0;
  double gamma_dephasing_per_ps = 0.0;
  /// Cavity transmission of the drive, L(Δ).
  double drive_transmission = 1.0;
  /// F/(F+1+Δ²/γ_c²) relative to Δ=0 with the lifetime-based Purcell factor;
  /// reported for comparison, the curve itself comes from the master equation.
  double lorentzian_reference = 1.0;
  /// Input (laser-side) pulse areas; the emitter sees area·sqrt(L).
  RabiCurve curve;
};

struct DetuningSeriesOptions {
  DephasingMap dephasing;
  /// Purcell factor used for the reference Lorentzian.
  double reference_purcell = 3.03;
};

/// Rabi curves versus QD–cavity detuning with the laser resonant with the QD.
/// Each detuning changes the cavity funnelling (emission and drive) and the
/// dephasing rate through `options.dephasing`.
inline std::vector<DetuningCurve> detuning_series(const ExperimentScenario& scenario, const std::vector<double>& deltas_ueV,
                                                  const std::vector<double>& input_areas,
                                                  const DetuningSeriesOptions& options, unsigned threads = 1) {
  require(!deltas_ueV.empty() && !input_areas.empty(), "detuning series needs detunings and areas");
  options.dephasing.validate();
  scenario.validate();
  const std::size_t nd = deltas_ueV.size(), na = input_areas.size();
  std::vector<DetuningCurve> out(nd);
  std::vector<ExperimentScenario> per_delta(nd, scenario);
  for (std::size_t d = 0; d < nd; ++d) {
    const double delta = deltas_ueV[d];
    auto& s = per_delta[d];
    s.model.delta_qd_cavity_ueV = delta;
    s.model.delta_laser_qd_ueV = 0.0;
    s.model.gamma_dephasing_per_ps = options.dephasing(delta);
    out[d].delta_ueV = delta;
    out[d].gamma_dephasing_per_ps = s.model.gamma_dephasing_per_ps;
    out[d].drive_transmission = cavity_lorentzian(delta, scenario.model.kappa_ueV);
    out[d].lorentzian_reference = intensity_vs_detuning(options.reference_purcell, scenario.model.kappa_ueV, delta) /
                                  intensity_vs_detuning(options.reference_purcell, scenario.model.kappa_ueV, 0.0);
    out[d].curve.points.resize(na);
  }
  parallel_for(nd * na, threads, [&](std::size_t job) {
    const std::size_t d = job / na, a = job % na;
    const double effective = cavity_filtered_drive(input_areas[a], deltas_ueV[d], scenario.model.kappa_ueV);
    RabiPoint p = rabi_point(per_delta[d], effective);
    p.area_rad = input_areas[a];
    p.power = input_areas[a] * input_areas[a];
    out[d].curve.points[a] = p;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Lifetime traces

struct LifetimeTraceOptions {
  /// Cavity-feeding background amplitude relative to the emitter's peak intensity.
  double feeding_amplitude = 0.0;
  double feeding_tau_ps = 1000.0;
  double bin_width_ps = 16.0;
  double pre_pulse_ps = 2000.0;
  double span_ps = 8000.0;
  /// Emitter peak intensity in counts per bin, before jitter.
  double peak_counts = 20000.0;
  double dark_counts_per_bin = 20.0;
  bool poisson = true;
  std::uint64_t seed = 0;
  /// Resolution of the underlying intensity grid.
  double resolution_ps = 2.0;
};

struct LifetimeTraceResult {
  DecayTrace trace;
  /// Noise-free expected counts per bin.
  std::vector<double> expected;
};

/// Time-resolved emission after instantaneous preparation of |e,0> at detuning Δ,
/// plus optional cavity feeding, convolved with the detector jitter.
inline LifetimeTraceResult lifetime_trace(const ExperimentScenario& scenario, double delta_qd_cavity_ueV,
                                          const LifetimeTraceOptions& opt = {}) {
  scenario.validate();
  require_positive(opt.bin_width_ps, "bin_width_ps");
  require_positive(opt.resolution_ps, "resolution_ps");
  require_non_negative(opt.pre_pulse_ps, "pre_pulse_ps");
  require_positive(opt.span_ps, "span_ps");
  require_non_negative(opt.feeding_amplitude, "feeding_amplitude");
  require_positive(opt.feeding_tau_ps, "feeding_tau_ps");
  require_non_negative(opt.peak_counts, "peak_counts");
  require_non_negative(opt.dark_counts_per_bin, "dark_counts_per_bin");
  const int sub = std::max(1, int(std::lround(opt.bin_width_ps / opt.resolution_ps)));
  const double dt = opt.bin_width_ps / sub;

  SystemModel m = scenario.model;
  m.delta_qd_cavity_ueV = delta_qd_cavity_ueV;
  m.pulse.area_rad = 0.0;
  const auto ops = build_model_operators(scenario.hilbert, m);
  const std::size_t n_after = std::size_t(std::ceil(opt.span_ps / dt));
  TimeGrid grid{0.0, double(n_after) * dt, std::numeric_limits<double>::infinity(), {}};
  for (std::size_t i = 0; i <= n_after; ++i) grid.output_times.push_back(double(i) * dt);
  const auto ev = evolve_master_equation(DensityMatrix::pure(ops::basis_state(scenario.hilbert, true, 0), 0.0), ops, grid);
  const LindbladGenerator gen(ops);
  std::vector<double> rate(ev.states.size());
  for (std::size_t i = 0; i < rate.size(); ++i) {
    const auto& rho = ev.states[i].matrix;
    rate[i] = (gen.rate_operator(std::size_t(Channel::cavity)) * rho).trace().real() +
              (gen.rate_operator(std::size_t(Channel::leaky)) * rho).trace().real();
  }
  const double peak_rate = *std::max_element(rate.begin(), rate.end());

  const std::size_t n_pre = std::size_t(std::ceil(opt.pre_pulse_ps / dt));
  std::vector<double> fine(n_pre + rate.size(), 0.0);
  for (std::size_t i = 0; i < rate.size(); ++i) {
    const double t = double(i) * dt;
    const double emitter = peak_rate > 0.0 ? rate[i] / peak_rate : 0.0;
    fine[n_pre + i] = opt.peak_counts * (emitter + opt.feeding_amplitude * std::exp(-t / opt.feeding_tau_ps));
  }

  std::vector<double> blurred = fine;
  if (scenario.detector.jitter_fwhm_ps > 0.0) {
    const double s = sigma_from_fwhm(scenario.detector.jitter_fwhm_ps);
    const int half = int(std::ceil(6.0 * s / dt));
    std::vector<double> kernel(std::size_t(2 * half + 1));
    double norm = 0.0;
    for (int j = -half; j <= half; ++j) {
      const double x = j * dt / s;
      kernel[std::size_t(j + half)] = std::exp(-0.5 * x * x);
      norm += kernel[std::size_t(j + half)];
    }
    for (auto& k : kernel) k /= norm;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      double acc = 0.0;
      for (int j = -half; j <= half; ++j) {
        const std::ptrdiff_t src = std::ptrdiff_t(i) - j;
        if (src >= 0 && src < std::ptrdiff_t(fine.size())) acc += kernel[std::size_t(j + half)] * fine[std::size_t(src)];
      }
      blurred[i] = acc;
    }
  }

  LifetimeTraceResult out;
  out.trace.excitation_ps = double(n_pre) * dt;
  out.trace.jitter_fwhm_ps = scenario.detector.jitter_fwhm_ps;
  out.trace.poisson = opt.poisson;
  Rng rng = make_stream(opt.seed, 0);
  for (std::size_t b = 0; (b + 1) * std::size_t(sub) <= blurred.size(); ++b) {
    double mean = 0.0;
    for (int j = 0; j < sub; ++j) mean += blurred[b * std::size_t(sub) + std::size_t(j)];
    mean = mean / sub + opt.dark_counts_per_bin;
    out.trace.t_ps.push_back((double(b) + 0.5) * opt.bin_width_ps);
    out.expected.push_back(mean);
    out.trace.counts.push_back(opt.poisson ? double(std::poisson_distribution<long long>(mean)(rng)) : mean);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Click streams

namespace detail {

inline constexpr std::uint64_t kBlinkingStream = 0xb1b1b1b1b1b1b1b1ULL;

/// On/off state at each pulse from the stationary telegraph chain.
inline std::vector<char> telegraph_states(const Blinking& b, std::int64_t n_pulses, double rep_period_ps,
                                          std::uint64_t seed) {
  const double lambda = b.rate_on_to_off_per_ps + b.rate_off_to_on_per_ps;
  const double p_on = b.duty_cycle();
  const double relax = 1.0 - std::exp(-lambda * rep_period_ps);
  const double p_on_to_off = (1.0 - p_on) * relax;
  const double p_off_to_on = p_on * relax;
  Rng rng = make_stream(seed, kBlinkingStream);
  std::vector<char> on(static_cast<std::size_t>(n_pulses));
  bool state = uniform01(rng) < p_on;
  for (std::int64_t k = 0; k < n_pulses; ++k) {
    if (k > 0) {
      const double u = uniform01(rng);
      state = state ? !(u < p_on_to_off) : (u < p_off_to_on);
    }
    on[std::size_t(k)] = state ? 1 : 0;
  }
  return on;
}

}  // namespace detail

/// Synthetic single-detector click stream: one jump trajectory per pulse from
/// |g,0>, blinking gate, background photons, efficiency thinning, Gaussian jitter,
/// dark counts, then a per-channel dead-time filter. Pulse k uses stream
/// (base_seed, k), so the result does not depend on `threads`.
inline ClickStream generate_click_stream(const ExperimentScenario& scenario, unsigned threads = 1) {
  scenario.validate();
  const auto& det = scenario.detector;
  const double period = scenario.rep_period_ps;
  const auto ops = build_model_operators(scenario.hilbert, scenario.model);
  const JumpUnraveling unraveling(ops);
  const StateVector ground = ops::basis_state(scenario.hilbert, false, 0);
  const TimeGrid grid{0.0, period, std::numeric_limits<double>::infinity(), {}};
  const std::vector<char> on = scenario.blinking ? detail::telegraph_states(*scenario.blinking, scenario.n_pulses, period,
                                                                             scenario.base_seed)
                                                 : std::vector<char>(std::size_t(scenario.n_pulses), 1);
  const double jitter_sigma = sigma_from_fwhm(det.jitter_fwhm_ps);
  const double center = scenario.model.pulse.center_ps;

  // Pulses are processed in fixed blocks so per-thread buffers stay small.
  const std::int64_t block = 4096;
  const std::size_t n_blocks = std::size_t((scenario.n_pulses + block - 1) / block);
  std::vector<std::vector<ClickEvent>> parts(n_blocks);
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    auto& out = parts[b];
    const std::int64_t k_end = std::min<std::int64_t>(scenario.n_pulses, std::int64_t(b + 1) * block);
    std::vector<double> photons;
    for (std::int64_t k = std::int64_t(b) * block; k < k_end; ++k) {
      Rng rng = make_stream(scenario.base_seed, std::uint64_t(k));
      photons.clear();
      if (scenario.emitter_enabled && on[std::size_t(k)]) {
        const Trajectory tr = unraveling.sample(ground, grid, rng);
        photons = tr.cavity_clicks;
      }
      if (scenario.background.mean_per_pulse > 0.0) {
        const long n_bg = std::poisson_distribution<long>(scenario.background.mean_per_pulse)(rng);
        std::exponential_distribution<double> delay(1.0 / scenario.background.delay_tau_ps);
        for (long i = 0; i < n_bg; ++i) photons.push_back(center + delay(rng));
      }
      const double origin = double(k) * period;
      std::normal_distribution<double> jitter(0.0, jitter_sigma);
      const std::size_t first = out.size();
      for (double t : photons) {
        if (!(uniform01(rng) < det.efficiency)) continue;
        const double dt = jitter_sigma > 0.0 ? jitter(rng) : 0.0;
        out.push_back({std::llround(origin + t + dt), 'S'});
      }
      if (det.dark_rate_per_ps > 0.0) {
        const long n_dark = std::poisson_distribution<long>(det.dark_rate_per_ps * period)(rng);
        for (long i = 0; i < n_dark; ++i) out.push_back({std::llround(origin + uniform01(rng) * period), 'S'});
      }
      std::stable_sort(out.begin() + std::ptrdiff_t(first), out.end(),
                       [](const ClickEvent& x, const ClickEvent& y) { return x.timestamp_ps < y.timestamp_ps; });
    }
  });

  ClickStream stream;
  stream.channels = "S";
  stream.meta.rep_period_ps = period;
  stream.meta.seed = scenario.base_seed;
  stream.meta.scenario_hash = scenario.hash;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  stream.events.reserve(total);
  for (auto& p : parts) stream.events.insert(stream.events.end(), p.begin(), p.end());
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const ClickEvent& x, const ClickEvent& y) { return x.timestamp_ps < y.timestamp_ps; });
  if (det.dead_time_ps > 0.0) {
    std::vector<ClickEvent> kept;
    kept.reserve(stream.events.size());
    std::optional<std::int64_t> last;
    for (const auto& e : stream.events) {
      if (last && double(e.timestamp_ps - *last) < det.dead_time_ps) continue;
      kept.push_back(e);
      last = e.timestamp_ps;
    }
    stream.events = std::move(kept);
  }
  return stream;
}

/// Cavity photon-number statistics of one pulse period from |g,0>.
struct PulsePhotonStatistics {
  /// P(0), P(1), P(2), P(>=3).
  std::vector<double> distribution;
  double mean = 0.0;
  /// 2 P(2) / mean² (intrinsic, before background).
  double g2_intrinsic = 0.0;
};

inline PulsePhotonStatistics pulse_photon_statistics(const ExperimentScenario& scenario) {
  scenario.validate();
  const auto ops = build_model_operators(scenario.hilbert, scenario.model);
  PulsePhotonStatistics out;
  out.distribution =
      photon_number_distribution(DensityMatrix::pure(ops::basis_state(scenario.hilbert, false, 0), 0.0), ops, 0.0,
                                 scenario.rep_period_ps, 3, Channel::cavity);
  for (std::size_t n = 0; n < out.distribution.size(); ++n) out.mean += double(n) * out.distribution[n];
  out.g2_intrinsic = out.mean > 0.0 ? 2.0 * out.distribution[2] / (out.mean * out.mean) : 0.0;
  return out;
}

/// Mean background photons per pulse that raise the intrinsic g² of the emitter
/// to `target_g2`: with emitter mean p and Poisson background μ,
/// g² = (g_s p² + 2pμ + μ²)/(p+μ)², so μ/p = sqrt((1-g_s)/(1-g²)) - 1.
inline double background_for_g2(double emitter_mean, double g2_intrinsic, double target_g2) {
  require_positive(emitter_mean, "emitter_mean");
  require(target_g2 >= g2_intrinsic && target_g2 < 1.0, "target g2 must lie in [intrinsic g2, 1)");
  require(g2_intrinsic >= 0.0 && g2_intrinsic < 1.0, "intrinsic g2 must lie in [0, 1)");
  return emitter_mean * (std::sqrt((1.0 - g2_intrinsic) / (1.0 - target_g2)) - 1.0);
}

}  // namespace qdsps

#endif  // QDSPS_EMISSION_HPP

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

#ifndef QDSPS_MODEL_HPP
#define QDSPS_MODEL_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qdsps/common.hpp"
#include "qdsps/hilbert.hpp"

namespace qdsps {

/// Gaussian Rabi-frequency envelope, truncated at ±5σ and renormalized so that
/// its time integral equals `area_rad` exactly.
struct PulseShape {
  double area_rad = kPi;
  double fwhm_ps = 1.3;
  double center_ps = 10.0;

  static constexpr double kTruncationSigmas = 5.0;

  double sigma_ps() const { return sigma_from_fwhm(fwhm_ps); }
  double start_ps() const { return center_ps - kTruncationSigmas * sigma_ps(); }
  double end_ps() const { return center_ps + kTruncationSigmas * sigma_ps(); }
  bool active() const { return area_rad != 0.0; }

  /// Ω at the pulse center, 1/ps.
  double peak_rabi_frequency() const {
    return area_rad / (sigma_ps() * std::sqrt(2.0 * kPi) * std::erf(kTruncationSigmas / std::sqrt(2.0)));
  }

  /// Ω(t) in 1/ps.
  double rabi_frequency(double t_ps) const {
    const double x = (t_ps - center_ps) / sigma_ps();
    if (std::abs(x) > kTruncationSigmas) return 0.0;
    return peak_rabi_frequency() * std::exp(-0.5 * x * x);
  }

  void validate() const {
    require_non_negative(area_rad, "pulse area_rad");
    require_positive(fwhm_ps, "pulse fwhm_ps");
    require_finite(center_ps, "pulse center_ps");
  }
};

/// Physical parameters of the driven emitter–cavity system. Energies in μeV,
/// rates in 1/ps. Detunings: delta_qd_cavity = E_X - E_C, delta_laser_qd = E_L - E_X.
struct SystemModel {
  double g_ueV = 0.0;
  double kappa_ueV = 233.0;
  double gamma_leaky_per_ps = 0.0;
  double gamma_dephasing_per_ps = 0.0;
  double delta_qd_cavity_ueV = 0.0;
  double delta_laser_qd_ueV = 0.0;
  PulseShape pulse;

  /// g < κ/4.
  bool weak_coupling() const { return g_ueV < kappa_ueV / 4.0; }

  void validate() const {
    require_non_negative(g_ueV, "g_ueV");
    require_positive(kappa_ueV, "kappa_ueV");
    require_non_negative(gamma_leaky_per_ps, "gamma_leaky_per_ps");
    require_non_negative(gamma_dephasing_per_ps, "gamma_dephasing_per_ps");
    require_finite(delta_qd_cavity_ueV, "delta_qd_cavity_ueV");
    require_finite(delta_laser_qd_ueV, "delta_laser_qd_ueV");
    pulse.validate();
  }
};

enum class Channel { cavity = 0, leaky = 1, dephasing = 2 };
inline constexpr std::size_t kChannelCount = 3;

inline const char* channel_name(Channel c) {
  switch (c) {
    case Channel::cavity: return "cavity";
    case Channel::leaky: return "leaky";
    case Channel::dephasing: return "dephasing";
  }
  return "?";
}

struct CollapseOperator {
  Channel channel;
  Operator op;  // sqrt(1/ps)
};

/// Hamiltonian pieces (μeV) and collapse operators for one model.
struct ModelOperators {
  HilbertConfig cfg;
  Operator h0;           // rotating frame at the laser frequency, μeV
  Operator drive_shape;  // σ⁺ + σ⁻, scaled at runtime by ħΩ(t)/2
  std::array<CollapseOperator, kChannelCount> collapse;
  PulseShape pulse;

  /// H(t)/ħ in 1/ps.
  Matrix hamiltonian_rate(double t_ps) const {
    Matrix h = h0.matrix / kHbarUeVPs;
    const double omega = pulse.rabi_frequency(t_ps);
    if (omega != 0.0) h += (0.5 * omega) * drive_shape.matrix;
    return h;
  }
};

inline ModelOperators build_model_operators(const HilbertConfig& cfg, const SystemModel& model) {
  cfg.validate();
  model.validate();
  const Matrix sm = ops::sigma_minus(cfg).matrix;
  const Matrix sp = sm.adjoint();
  const Matrix a = ops::annihilation(cfg).matrix;
  const Matrix ad = a.adjoint();

  const double qd_minus_laser = -model.delta_laser_qd_ueV;
  const double cavity_minus_laser = -model.delta_qd_cavity_ueV - model.delta_laser_qd_ueV;
  Matrix h0 = qd_minus_laser * (sp * sm) + cavity_minus_laser * (ad * a) + model.g_ueV * (sp * a + sm * ad);

  ModelOperators out{
      cfg,
      {h0, "H0"},
      {sp + sm, "sigma_x"},
      {CollapseOperator{Channel::cavity, {std::sqrt(rate_from_energy(model.kappa_ueV)) * a, "sqrt(kappa) a"}},
       CollapseOperator{Channel::leaky, {std::sqrt(model.gamma_leaky_per_ps) * sm, "sqrt(gamma_leaky) sigma-"}},
       CollapseOperator{Channel::dephasing,
                        {std::sqrt(2.0 * model.gamma_dephasing_per_ps) * (sp * sm), "sqrt(2 gamma_dephasing) sigma+sigma-"}}},
      model.pulse};
  return out;
}

/// Emitter-like decay rate (1/ps) of the single-excitation manifold without drive
/// or pure dephasing: -2 Im of the eigenvalue of the non-Hermitian 2x2 block with
/// the smaller imaginary part.
inline double emitter_decay_rate(double g_ueV, double kappa_ueV, double gamma_leaky_per_ps, double delta_qd_cavity_ueV) {
  const Complex i(0.0, 1.0);
  const Complex e = rate_from_energy(delta_qd_cavity_ueV) - 0.5 * i * gamma_leaky_per_ps;
  const Complex c = -0.5 * i * rate_from_energy(kappa_ueV);
  const double coupling = rate_from_energy(g_ueV);
  const Complex mean = 0.5 * (e + c);
  const Complex root = std::sqrt(0.25 * (e - c) * (e - c) + coupling * coupling);
  const double r1 = -2.0 * (mean + root).imag();
  const double r2 = -2.0 * (mean - root).imag();
  return std::min(r1, r2);
}

/// Bad-cavity estimate of g (μeV) giving a Purcell factor F at zero detuning:
/// F = 4 g² / (ħ κ γ_leaky).
inline double coupling_for_purcell(double purcell_factor, double kappa_ueV, double gamma_leaky_per_ps) {
  require_non_negative(purcell_factor, "purcell_factor");
  require_positive(kappa_ueV, "kappa_ueV");
  require_positive(gamma_leaky_per_ps, "gamma_leaky_per_ps");
  return std::sqrt(purcell_factor * kappa_ueV * kHbarUeVPs * gamma_leaky_per_ps / 4.0);
}

struct LifetimeCalibration {
  double g_ueV;
  double gamma_leaky_per_ps;
};

/// Finds (g, γ_leaky) such that the emitter-like decay rate is 1/t_on at zero
/// detuning and 1/t_off at `delta_off_ueV`.
inline LifetimeCalibration calibrate_to_lifetimes(double t_on_ps, double t_off_ps, double delta_off_ueV, double kappa_ueV) {
  require_positive(t_on_ps, "t_on_ps");
  require_positive(t_off_ps, "t_off_ps");
  require_positive(kappa_ueV, "kappa_ueV");
  require(t_off_ps > t_on_ps, "t_off_ps must exceed t_on_ps");
  require(delta_off_ueV != 0.0, "delta_off_ueV must be non-zero");

  auto coupling_for_on = [&](double gamma_leaky) {
    double lo = 0.0;
    double hi = kappa_ueV / 4.0;
    require(emitter_decay_rate(hi, kappa_ueV, gamma_leaky, 0.0) >= 1.0 / t_on_ps,
            "t_on_ps is unreachable in the weak-coupling regime");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (emitter_decay_rate(mid, kappa_ueV, gamma_leaky, 0.0) < 1.0 / t_on_ps ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double lo = 0.0;
  double hi = 1.0 / t_on_ps;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double rate_off = emitter_decay_rate(coupling_for_on(mid), kappa_ueV, mid, delta_off_ueV);
    (rate_off < 1.0 / t_off_ps ? lo : hi) = mid;
  }
  const double gamma_leaky = 0.5 * (lo + hi);
  return {coupling_for_on(gamma_leaky), gamma_leaky};
}

}  // namespace qdsps

#endif  // QDSPS_MODEL_HPP

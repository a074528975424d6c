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

#ifndef QDSPS_CQED_HPP
#define QDSPS_CQED_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <vector>

#include "qdsps/common.hpp"
#include "qdsps/csv.hpp"
#include "qdsps/random.hpp"

namespace qdsps {

enum class VolumeUnit { cubic_wavelength, cubic_micron };

/// Maximum Purcell enhancement 3Q(λ/n)³/(4π² V).
/// With `cubic_wavelength` the volume is already in units of (λ/n)³ and λ, n only
/// need to be positive.
inline double purcell_max(double q, double lambda_c_nm, double n_refractive, double v_mode,
                          VolumeUnit unit = VolumeUnit::cubic_wavelength) {
  require_positive(q, "q");
  require_positive(lambda_c_nm, "lambda_c_nm");
  require_positive(n_refractive, "n_refractive");
  require_positive(v_mode, "v_mode");
  double v = v_mode;
  if (unit == VolumeUnit::cubic_micron) {
    const double cube = std::pow(lambda_c_nm * 1e-3 / n_refractive, 3);
    v = v_mode / cube;
  }
  return 3.0 * q / (4.0 * kPi * kPi * v);
}

/// Mode volume in (λ/n)³ that yields F_P,max = f at quality factor q.
inline double mode_volume_for_purcell(double q, double f) {
  require_positive(q, "q");
  require_positive(f, "purcell factor");
  return 3.0 * q / (4.0 * kPi * kPi * f);
}

struct PillarDesign {
  double diameter_um = 4.0;
  double q_pillar = 5950.0;
  double q_2d = 6670.0;
  double lambda_c_nm = 894.0;
  double n_refractive = 3.5;
  double v_mode = 141.3;  // (λ/n)³
  double gamma_fraction = 1.0;

  void validate() const {
    require_positive(diameter_um, "diameter_um");
    require_positive(q_pillar, "q_pillar");
    require_positive(q_2d, "q_2d");
    require_positive(lambda_c_nm, "lambda_c_nm");
    require_positive(n_refractive, "n_refractive");
    require_positive(v_mode, "v_mode");
    require(std::isfinite(gamma_fraction) && gamma_fraction > 0.0 && gamma_fraction <= 1.0,
            "gamma_fraction must lie in (0, 1]");
  }

  /// Etched pillars should not beat the planar cavity; a warning condition only.
  bool q_exceeds_planar() const { return q_pillar > q_2d; }

  double purcell() const { return purcell_max(q_pillar, lambda_c_nm, n_refractive, v_mode); }
};

/// η_ext = (Q_pillar/Q_2D)·F/(γ+F).
inline double extraction_efficiency(double q_pillar, double q_2d, double f_p_max, double gamma_fraction = 1.0) {
  require_positive(q_pillar, "q_pillar");
  require_positive(q_2d, "q_2d");
  require_positive(f_p_max, "f_p_max");
  require(std::isfinite(gamma_fraction) && gamma_fraction > 0.0 && gamma_fraction <= 1.0,
          "gamma_fraction must lie in (0, 1]");
  return q_pillar / q_2d * f_p_max / (gamma_fraction + f_p_max);
}

inline double extraction_efficiency(const PillarDesign& design, double f_p_max) {
  design.validate();
  return extraction_efficiency(design.q_pillar, design.q_2d, f_p_max, design.gamma_fraction);
}

/// Relative emitter intensity F/(F+1+Δ²/γ_c²).
inline double intensity_vs_detuning(double f_p, double gamma_c_ueV, double delta_ueV) {
  require_positive(f_p, "f_p");
  require_positive(gamma_c_ueV, "gamma_c_ueV");
  require_finite(delta_ueV, "delta_ueV");
  const double x = delta_ueV / gamma_c_ueV;
  return f_p / (f_p + 1.0 + x * x);
}

/// F_P = T_off/T_on - 1 with first-order propagated uncertainty.
inline Estimate purcell_from_lifetimes(double t_on_ps, double t_off_ps, double sigma_on_ps = 0.0,
                                       double sigma_off_ps = 0.0) {
  require_positive(t_on_ps, "t_on_ps");
  require_positive(t_off_ps, "t_off_ps");
  require_non_negative(sigma_on_ps, "sigma_on_ps");
  require_non_negative(sigma_off_ps, "sigma_off_ps");
  const double ratio = t_off_ps / t_on_ps;
  const double d_on = -ratio / t_on_ps;
  const double d_off = 1.0 / t_on_ps;
  return {ratio - 1.0, std::hypot(d_on * sigma_on_ps, d_off * sigma_off_ps)};
}

/// Monte Carlo cross-check of the propagated Purcell uncertainty: Gaussian
/// resampling of both lifetimes, non-positive draws rejected. Returns mean and
/// standard deviation of the resampled F_P.
inline Estimate purcell_from_lifetimes_resampled(double t_on_ps, double t_off_ps, double sigma_on_ps,
                                                 double sigma_off_ps, std::size_t n_samples, std::uint64_t seed) {
  require_positive(t_on_ps, "t_on_ps");
  require_positive(t_off_ps, "t_off_ps");
  require_non_negative(sigma_on_ps, "sigma_on_ps");
  require_non_negative(sigma_off_ps, "sigma_off_ps");
  require(n_samples >= 2, "need at least two samples");
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double on, off;
    do on = t_on_ps + sigma_on_ps * normal(rng); while (on <= 0.0);
    do off = t_off_ps + sigma_off_ps * normal(rng); while (off <= 0.0);
    const double f = off / on - 1.0;
    sum += f;
    sum2 += f * f;
  }
  const double n = double(n_samples);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)))};
}

/// Q = E/ΔE.
inline double q_from_linewidth(double e_center_ueV, double delta_e_ueV) {
  require_positive(e_center_ueV, "e_center_ueV");
  require_positive(delta_e_ueV, "delta_e_ueV");
  return e_center_ueV / delta_e_ueV;
}

/// η_SPS = η·sqrt(1 - g²(0)).
inline double single_photon_efficiency(double eta, double g2_zero) {
  require(std::isfinite(eta) && eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
  require_finite(g2_zero, "g2_zero");
  if (g2_zero >= 1.0) throw std::domain_error("g2_zero must be below 1");
  require(g2_zero >= 0.0, "g2_zero must be non-negative");
  return eta * std::sqrt(1.0 - g2_zero);
}

/// Source efficiency implied by a detected count rate behind a linear polarizer.
/// `eta_setup` covers the full collection path including that polarizer, so the
/// ratio counts/(rep·eta_setup) counts both polarizations. Factor 1 returns the
/// per-polarization efficiency, factor 2 the unpolarized source efficiency.
inline double count_rate_to_efficiency(double counts_hz, double rep_rate_hz, double eta_setup,
                                       int polarization_factor) {
  require_non_negative(counts_hz, "counts_hz");
  require_positive(rep_rate_hz, "rep_rate_hz");
  require(std::isfinite(eta_setup) && eta_setup > 0.0 && eta_setup <= 1.0, "eta_setup must lie in (0, 1]");
  require(polarization_factor == 1 || polarization_factor == 2, "polarization_factor must be 1 or 2");
  const double eta = 0.5 * polarization_factor * counts_hz / (rep_rate_hz * eta_setup);
  if (eta > 1.0) throw std::domain_error("count rate implies an efficiency above 1");
  return eta;
}

/// Efficiency accounting from a CCD count rate to single-photon efficiencies.
struct EfficiencyChain {
  double eta_setup = 0.0036;
  double rep_rate_hz = 82e6;
  double counts_detected_hz = 0.0;
  double eta_lin = 0.0;
  double eta_source = 0.0;
  double g2_zero = 0.0;
  double eta_sps = 0.0;
  double eta_sps_lin = 0.0;

  static EfficiencyChain from_counts(double counts_hz, double rep_rate_hz, double eta_setup, double g2_zero) {
    EfficiencyChain c;
    c.eta_setup = eta_setup;
    c.rep_rate_hz = rep_rate_hz;
    c.counts_detected_hz = counts_hz;
    c.eta_lin = count_rate_to_efficiency(counts_hz, rep_rate_hz, eta_setup, 1);
    c.eta_source = count_rate_to_efficiency(counts_hz, rep_rate_hz, eta_setup, 2);
    c.g2_zero = g2_zero;
    c.eta_sps = single_photon_efficiency(c.eta_source, g2_zero);
    c.eta_sps_lin = single_photon_efficiency(c.eta_lin, g2_zero);
    return c;
  }
};

/// Mode volume at a reference diameter, scaled with the pillar area.
struct ModeVolumeReference {
  double diameter_um = 4.0;
  double v_mode = 141.3;  // (λ/n)³

  double at(double diameter_um_) const {
    require_positive(diameter_um_, "diameter_um");
    const double r = diameter_um_ / diameter_um;
    return v_mode * r * r;
  }
};

struct DesignRow {
  double diameter_um;
  double q;
  double f_p_max;
  double eta_ext;
};

/// Q versus pillar diameter (μm).
using QTable = std::map<double, double>;

inline std::vector<DesignRow> design_sweep(const std::vector<double>& diameters_um, const QTable& q_table,
                                           const ModeVolumeReference& reference, double q_2d = 6670.0,
                                           double gamma_fraction = 1.0) {
  require(!q_table.empty(), "q_table must not be empty");
  require_positive(reference.diameter_um, "reference diameter_um");
  require_positive(reference.v_mode, "reference v_mode");
  std::vector<DesignRow> rows;
  rows.reserve(diameters_um.size());
  for (double d : diameters_um) {
    auto it = q_table.lower_bound(d - 1e-9 * std::max(1.0, std::abs(d)));
    if (it == q_table.end() || std::abs(it->first - d) > 1e-9 * std::max(1.0, std::abs(d))) {
      throw std::invalid_argument("no Q value for diameter " + format_number(d) + " um");
    }
    const double q = it->second;
    const double f = 3.0 * q / (4.0 * kPi * kPi * reference.at(d));
    rows.push_back({d, q, f, extraction_efficiency(q, q_2d, f, gamma_fraction)});
  }
  return rows;
}

inline void write_design_csv(std::ostream& os, const std::vector<DesignRow>& rows) {
  os << "diameter_um,Q,F_P_max,eta_ext\n";
  for (const auto& r : rows) {
    os << format_number(r.diameter_um) << ',' << format_number(r.q) << ',' << format_number(r.f_p_max) << ','
       << format_number(r.eta_ext) << '\n';
  }
}

}  // namespace qdsps

#endif  // QDSPS_CQED_HPP

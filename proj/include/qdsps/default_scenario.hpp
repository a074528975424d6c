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

#ifndef QDSPS_DEFAULT_SCENARIO_HPP
#define QDSPS_DEFAULT_SCENARIO_HPP

#include <nlohmann/json.hpp>

namespace qdsps {

/// Built-in scenario used by `paper-check` when no --scenario is given.
/// Kept identical to scenarios/default.json.
inline nlohmann::json default_scenario() {
  return nlohmann::json::parse(R"json({
  "schema_version": 1,
  "system": {
    "kappa_ueV": 233.0,
    "coupling": {"mode": "lifetimes", "t_on_ps": 221.0, "t_off_ps": 890.0, "delta_off_ueV": 360.0},
    "gamma_dephasing_per_ps": 0.0,
    "delta_qd_cavity_ueV": 75.0,
    "delta_laser_qd_ueV": 0.0,
    "n_fock": 2
  },
  "pulse": {"area_rad": 3.141592653589793, "fwhm_ps": 1.3, "center_ps": 10.0},
  "detector": {"jitter_fwhm_ps": 400.0, "efficiency": 0.5, "dead_time_ps": 0.0, "dark_rate_per_ps": 0.0},
  "source": {
    "rep_rate_MHz": 82.0,
    "n_pulses": 100000,
    "emitter_enabled": true,
    "background": {"g2_target": 0.072, "delay_tau_ps": 1000.0}
  },
  "sweep": {
    "design": {
      "diameters_um": [1.0, 2.0, 2.5, 3.0, 4.0, 8.0],
      "q_table": [
        {"diameter_um": 1.0, "q": 2000.0},
        {"diameter_um": 2.0, "q": 4800.0},
        {"diameter_um": 2.5, "q": 5300.0},
        {"diameter_um": 3.0, "q": 5600.0},
        {"diameter_um": 4.0, "q": 5950.0},
        {"diameter_um": 8.0, "q": 6500.0}
      ],
      "q_2d": 6670.0,
      "gamma_fraction": 1.0,
      "mode_volume_reference": {"diameter_um": 4.0, "v_mode_cubic_wavelengths": 141.3}
    },
    "detuning": {
      "deltas_ueV": {"start_ueV": -700.0, "stop_ueV": 700.0, "count": 15},
      "purcell_factor": 3.1,
      "gamma_c_ueV": 233.0,
      "amplitude": 1.0,
      "relative_noise": 0.05
    },
    "lifetime": {
      "deltas_ueV": [0.0, 360.0],
      "feeding_amplitudes": [0.1, 0.0],
      "feeding_tau_ps": 1000.0,
      "bin_width_ps": 16.0,
      "pre_pulse_ps": 2000.0,
      "span_ps": 8000.0,
      "peak_counts": 20000.0,
      "dark_counts_per_bin": 20.0,
      "poisson": true
    },
    "rabi": {
      "areas_rad": {"start_rad": 0.0, "stop_rad": 12.0, "count": 61},
      "method": "master_equation",
      "n_trajectories": 10000,
      "detuning_series": {
        "deltas_ueV": [0.0, 58.25, 116.5, 233.0, 350.0, 450.0, 600.0],
        "areas_rad": {"start_rad": 0.0, "stop_rad": 36.0, "count": 181},
        "dephasing": {"base_per_ps": 0.01, "slope_per_ps_per_ueV": 0.0001}
      }
    }
  },
  "analysis": {
    "hbt": {"bin_width_ps": 64.0, "n_side_peaks": 10, "envelope_fit": false},
    "lifetime": {"mode": "auto", "aicc_margin": 10.0}
  },
  "seeds": {"base": 20260101},
  "outputs": {"click_stream": true}
}
)json");
}

}  // namespace qdsps

#endif  // QDSPS_DEFAULT_SCENARIO_HPP

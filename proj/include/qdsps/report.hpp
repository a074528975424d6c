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

#ifndef QDSPS_REPORT_HPP
#define QDSPS_REPORT_HPP

#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdsps/csv.hpp"
#include "qdsps/emission.hpp"
#include "qdsps/fitting.hpp"

namespace qdsps {

/// {family, estimates, std_errors, reduced_chi2, converged, n_points}.
inline nlohmann::json fit_report(const FitResult& r) {
  nlohmann::json estimates = nlohmann::json::object(), errors = nlohmann::json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    estimates[r.names[i]] = r.estimates[i];
    // Fixed parameters and undetermined errors serialize as null.
    errors[r.names[i]] = std::isfinite(r.std_errors[i]) && !r.fixed[i] ? nlohmann::json(r.std_errors[i]) : nlohmann::json();
  }
  return {{"family", family_name(r.family)},
          {"estimates", estimates},
          {"std_errors", errors},
          {"reduced_chi2", std::isfinite(r.reduced_chi2) ? nlohmann::json(r.reduced_chi2) : nlohmann::json()},
          {"converged", r.converged},
          {"n_points", r.n_points}};
}

inline nlohmann::json lifetime_report(const LifetimeFit& f) {
  auto finite = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
  nlohmann::json j{{"selected_family", family_name(f.family)},
                   {"lifetime_ps", finite(f.lifetime_ps.value)},
                   {"lifetime_error_ps", finite(f.lifetime_ps.sigma)},
                   {"background", f.background},
                   {"window_start_ps", f.window_start_ps},
                   {"aicc_mono", finite(f.aicc_mono)},
                   {"aicc_bi", finite(f.aicc_bi)},
                   {"reliable", f.reliable},
                   {"fit", fit_report(f.result)}};
  if (f.slow_lifetime_ps) {
    j["slow_lifetime_ps"] = finite(f.slow_lifetime_ps->value);
    j["slow_lifetime_error_ps"] = finite(f.slow_lifetime_ps->sigma);
  }
  return j;
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string rabi_curve_csv(const RabiCurve& c) {
  std::ostringstream os;
  os << "area_rad,power_rad2,emission_probability,mc_error,inversion\n";
  for (const auto& p : c.points) {
    os << format_number(p.area_rad) << ',' << format_number(p.power) << ',' << format_number(p.emission_probability)
       << ',' << format_number(p.mc_error) << ',' << format_number(p.inversion) << '\n';
  }
  return os.str();
}

inline std::string decay_trace_csv(const LifetimeTraceResult& r) {
  std::ostringstream os;
  os << "t_ps,counts,expected\n";
  for (std::size_t i = 0; i < r.trace.t_ps.size(); ++i) {
    os << format_number(r.trace.t_ps[i]) << ',' << format_number(r.trace.counts[i]) << ','
       << format_number(r.expected[i]) << '\n';
  }
  return os.str();
}

}  // namespace qdsps

#endif  // QDSPS_REPORT_HPP

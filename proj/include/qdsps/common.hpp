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

#ifndef QDSPS_COMMON_HPP
#define QDSPS_COMMON_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qdsps {

inline constexpr double kPi = std::numbers::pi;

/// Reduced Planck constant in micro-electronvolt picoseconds.
inline constexpr double kHbarUeVPs = 658.2119;

/// Converts an energy (μeV) into an angular rate (1/ps).
constexpr double rate_from_energy(double energy_ueV) { return energy_ueV / kHbarUeVPs; }

/// Converts an angular rate (1/ps) into an energy (μeV).
constexpr double energy_from_rate(double rate_per_ps) { return rate_per_ps * kHbarUeVPs; }

/// Gaussian FWHM to standard deviation.
inline double sigma_from_fwhm(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

/// A value with a one-standard-deviation uncertainty.
struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

/// Raised when an adaptive integration cannot make progress.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time_ps)
      : std::runtime_error(what + " (t = " + std::to_string(time_ps) + " ps)"), time_ps_(time_ps) {}

  double time_ps() const { return time_ps_; }

 private:
  double time_ps_;
};

/// Raised when a quantum-jump trajectory cannot resolve its next jump.
class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

inline void require_finite(double value, const std::string& name) {
  if (!std::isfinite(value)) throw std::invalid_argument(name + " must be finite");
}

inline void require_positive(double value, const std::string& name) {
  require_finite(value, name);
  if (!(value > 0.0)) throw std::invalid_argument(name + " must be positive");
}

inline void require_non_negative(double value, const std::string& name) {
  require_finite(value, name);
  if (value < 0.0) throw std::invalid_argument(name + " must be non-negative");
}

}  // namespace qdsps

#endif  // QDSPS_COMMON_HPP

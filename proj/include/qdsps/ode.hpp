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

#ifndef QDSPS_ODE_HPP
#define QDSPS_ODE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "qdsps/common.hpp"
#include "qdsps/hilbert.hpp"

namespace qdsps {

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
};

/// Dormand–Prince 5(4) embedded Runge–Kutta on complex vectors.
/// Rhs: void(double t, const StateVector& y, StateVector& dydt).
template <class Rhs>
class DormandPrince {
 public:
  struct Trial {
    StateVector y;
    double error_norm;
  };

  DormandPrince(Rhs rhs, OdeOptions options) : rhs_(std::move(rhs)), options_(options) {}

  const OdeOptions& options() const { return options_; }
  void set_max_step(double max_step) { options_.max_step = max_step; }

  /// Single trial step of size h from (t, y).
  Trial trial(double t, const StateVector& y, double h) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    // First-same-as-last: reuse the final stage of the previous accepted step.
    if (fsal_valid_ && t == fsal_t_ && y.size() == fsal_y_.size() && y == fsal_y_) {
      k1_ = fsal_k_;
    } else {
      rhs_(t, y, k1_);
    }
    tmp_ = y + h * (a21 * k1_);
    rhs_(t + c2 * h, tmp_, k2_);
    tmp_ = y + h * (a31 * k1_ + a32 * k2_);
    rhs_(t + c3 * h, tmp_, k3_);
    tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t + c4 * h, tmp_, k4_);
    tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t + c5 * h, tmp_, k5_);
    tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t + h, tmp_, k6_);
    Trial out{y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_), 0.0};
    rhs_(t + h, out.y, k7_);
    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double scale = options_.atol + options_.rtol * std::sqrt(std::max(std::norm(y(i)), std::norm(out.y(i))));
      sum += std::norm(err_(i)) / (scale * scale);
    }
    out.error_norm = std::sqrt(sum / double(std::max<Eigen::Index>(y.size(), 1)));
    return out;
  }

  /// Advances (t, y) by one accepted step, never passing t_stop.
  void step(double& t, StateVector& y, double t_stop) {
    const double span = t_stop - t;
    if (span <= 0.0) return;
    if (!(h_ > 0.0)) h_ = std::min(options_.max_step, span);
    for (;;) {
      double h = std::min({h_, options_.max_step, span});
      const double min_step = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0);
      if (h < min_step) throw IntegrationError("step size underflow", t);
      Trial trial_result = trial(t, y, h);
      const double err = trial_result.error_norm;
      if (!std::isfinite(err)) {
        h_ = 0.2 * h;
        continue;
      }
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (err <= 1.0) {
        t = (h == span) ? t_stop : t + h;
        y = std::move(trial_result.y);
        fsal_valid_ = true;
        fsal_t_ = t;
        fsal_y_ = y;
        fsal_k_ = k7_;
        // A clipped step says nothing about the natural step size.
        if (h == h_ || factor < 1.0) h_ = h * factor;
        ++steps_;
        if (steps_ > options_.max_steps) throw IntegrationError("step budget exhausted", t);
        return;
      }
      h_ = h * std::max(factor, 0.2);
    }
  }

  void integrate_to(double& t, StateVector& y, double t_stop) {
    while (t < t_stop) step(t, y, t_stop);
  }

  void reset_step_size() {
    h_ = 0.0;
    fsal_valid_ = false;
  }
  long steps_taken() const { return steps_; }

 private:
  Rhs rhs_;
  OdeOptions options_;
  double h_ = 0.0;
  long steps_ = 0;
  StateVector k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, err_;
  bool fsal_valid_ = false;
  double fsal_t_ = 0.0;
  StateVector fsal_y_, fsal_k_;
};

template <class Rhs>
DormandPrince(Rhs, OdeOptions) -> DormandPrince<Rhs>;

}  // namespace qdsps

#endif  // QDSPS_ODE_HPP

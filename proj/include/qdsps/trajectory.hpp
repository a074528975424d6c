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

#ifndef QDSPS_TRAJECTORY_HPP
#define QDSPS_TRAJECTORY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "qdsps/common.hpp"
#include "qdsps/hilbert.hpp"
#include "qdsps/master_equation.hpp"
#include "qdsps/model.hpp"
#include "qdsps/ode.hpp"
#include "qdsps/random.hpp"

namespace qdsps {

struct Trajectory {
  std::vector<double> cavity_clicks;
  std::vector<double> leaky_clicks;
  std::size_t dephasing_jumps = 0;
  /// Normalized state at each sample time of the grid.
  std::vector<StateVector> samples;
};

/// exp(-i H_eff τ) for the drive-free generator via an eigendecomposition of H_eff.
/// `usable()` is false when H_eff is too close to defective for the closed form.
class DriveFreePropagator {
 public:
  explicit DriveFreePropagator(const LindbladGenerator& gen) {
    const Matrix h = gen.effective_hamiltonian(std::numeric_limits<double>::infinity());
    Eigen::ComplexEigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success) return;
    vectors_ = solver.eigenvectors();
    values_ = solver.eigenvalues();
    Eigen::FullPivLU<Matrix> lu(vectors_);
    if (!lu.isInvertible()) return;
    inverse_ = lu.inverse();
    const double cond = vectors_.norm() * inverse_.norm();
    const double residual = (vectors_ * values_.asDiagonal() * inverse_ - h).norm() / std::max(h.norm(), 1e-300);
    usable_ = cond < 1e6 && residual < 1e-12;
  }

  bool usable() const { return usable_; }

  StateVector modal(const StateVector& psi) const { return inverse_ * psi; }

  StateVector evolve_modal(const StateVector& modal, double tau) const {
    StateVector phase(modal.size());
    for (Eigen::Index i = 0; i < modal.size(); ++i) phase(i) = std::exp(Complex(0.0, -1.0) * values_(i) * tau) * modal(i);
    return vectors_ * phase;
  }

 private:
  Matrix vectors_, inverse_;
  Eigen::VectorXcd values_;
  bool usable_ = false;
};

/// Monte Carlo wave-function unraveling: non-Hermitian evolution until the squared
/// norm falls to a uniform threshold, then a jump drawn in proportion to ||c_k ψ||².
/// The driven window is integrated with Dormand–Prince; drive-free stretches use the
/// closed-form propagator when available.
class JumpUnraveling {
 public:
  explicit JumpUnraveling(const ModelOperators& ops, OdeOptions options = {})
      : gen_(ops), propagator_(gen_), options_(options) {
    ground_index_ = gen_.operators().cfg.index(false, 0);
    const auto& pulse = gen_.pulse();
    if (!pulse.active()) return;
    // The no-jump passage of the ground state through the pulse is the same for
    // every trajectory that enters the pulse in it.
    auto rhs = [&](double t, const StateVector& y, StateVector& dydt) { gen_.apply_no_jump(t, y, dydt); };
    DormandPrince stepper(rhs, options_);
    stepper.set_max_step(gen_.step_ceiling(pulse.start_ps(), pulse.end_ps(), options_.max_step));
    ground_passage_ = StateVector::Zero(gen_.dim());
    ground_passage_(ground_index_) = 1.0;
    double t = pulse.start_ps();
    stepper.integrate_to(t, ground_passage_, pulse.end_ps());
    ground_passage_norm2_ = ground_passage_.squaredNorm();
  }

  const LindbladGenerator& generator() const { return gen_; }

  Trajectory sample(const StateVector& psi0, const TimeGrid& grid, Rng& rng) const {
    const auto samples = grid.samples_or_none();
    require(psi0.size() == gen_.dim(), "initial state has the wrong dimension");
    require(psi0.squaredNorm() > 0.0, "initial state has zero norm");
    const auto& pulse = gen_.pulse();
    const bool driven = pulse.active();

    StateVector psi = psi0.normalized();
    auto rhs = [&](double t, const StateVector& y, StateVector& dydt) { gen_.apply_no_jump(t, y, dydt); };
    DormandPrince stepper(rhs, options_);

    Trajectory out;
    out.samples.resize(samples.size());
    double threshold = uniform01(rng);

    auto do_jump = [&](double t) {
      std::array<double, kChannelCount> weight{};
      double total = 0.0;
      for (std::size_t k = 0; k < kChannelCount; ++k) {
        weight[k] = (gen_.jump(k) * psi).squaredNorm();
        total += weight[k];
      }
      if (!(total > 0.0)) throw TrajectoryError("jump requested from a state with no decay channel");
      double pick = uniform01(rng) * total;
      std::size_t k = 0;
      while (k + 1 < kChannelCount && (pick >= weight[k] || weight[k] == 0.0)) {
        pick -= weight[k];
        ++k;
      }
      psi = (gen_.jump(k) * psi).eval();
      psi /= std::sqrt(weight[k]);
      switch (static_cast<Channel>(k)) {
        case Channel::cavity: out.cavity_clicks.push_back(t); break;
        case Channel::leaky: out.leaky_clicks.push_back(t); break;
        case Channel::dephasing: ++out.dephasing_jumps; break;
      }
      threshold = uniform01(rng);
      stepper.reset_step_size();
    };

    std::size_t next_sample = 0;
    bool finished = false;

    // Past the drive the ground state decouples with zero decay: the squared norm
    // is bounded below by its ground weight, so a lower threshold never triggers.
    auto settled = [&](double t) {
      const bool drive_over = !driven || t >= pulse.end_ps();
      return drive_over && next_sample >= samples.size() && std::norm(psi(ground_index_)) > threshold;
    };

    auto in_ground_state = [&]() {
      for (Eigen::Index i = 0; i < psi.size(); ++i) {
        if (i != ground_index_ && psi(i) != Complex(0.0)) return false;
      }
      return psi(ground_index_) == Complex(1.0);
    };

    auto advance_closed_form = [&](double t0, double t1) {
      // |g,0> is an exact zero-rate eigenvector of the drive-free generator.
      if (in_ground_state()) return;
      double t = t0;
      while (t < t1) {
        if (settled(t)) {
          finished = true;
          return;
        }
        const StateVector modal = propagator_.modal(psi);
        const double span = t1 - t;
        const StateVector end_state = propagator_.evolve_modal(modal, span);
        if (end_state.squaredNorm() > threshold) {
          psi = end_state;
          return;
        }
        double lo = 0.0, hi = span;
        StateVector at_hi = end_state;
        // Squared norm is non-increasing; bisect to the crossing.
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(t + hi)); ++it) {
          const double mid = 0.5 * (lo + hi);
          StateVector trial = propagator_.evolve_modal(modal, mid);
          if (trial.squaredNorm() > threshold) {
            lo = mid;
          } else {
            hi = mid;
            at_hi = std::move(trial);
          }
        }
        if (!(at_hi.squaredNorm() > 1e-300)) throw TrajectoryError("norm underflow before jump resolution");
        t += hi;
        psi = std::move(at_hi);
        do_jump(t);
      }
    };

    auto advance_stepped = [&](double t0, double t1) {
      if (ground_passage_norm2_ > threshold && t0 == pulse.start_ps() && t1 == pulse.end_ps() && in_ground_state()) {
        psi = ground_passage_;
        return;
      }
      stepper.set_max_step(gen_.step_ceiling(t0, t1, std::min(grid.max_step, options_.max_step)));
      double t = t0;
      while (t < t1) {
        if (settled(t)) {
          finished = true;
          return;
        }
        const double t_before = t;
        const StateVector psi_before = psi;
        stepper.step(t, psi, t1);
        const double norm2 = psi.squaredNorm();
        if (!std::isfinite(norm2)) throw TrajectoryError("non-finite norm during no-jump evolution");
        if (norm2 > threshold) continue;

        // Locate the crossing inside (t_before, t] with Illinois regula falsi.
        double lo = 0.0, hi = t - t_before;
        double f_lo = psi_before.squaredNorm() - threshold, f_hi = norm2 - threshold;
        StateVector at_hi = psi;
        int side = 0;
        for (int it = 0; it < 100 && hi - lo > 1e-9 * std::max(1.0, std::abs(t)); ++it) {
          double h = (f_lo * hi - f_hi * lo) / (f_lo - f_hi);
          if (!(h > lo && h < hi)) h = 0.5 * (lo + hi);
          auto trial = stepper.trial(t_before, psi_before, h);
          const double f = trial.y.squaredNorm() - threshold;
          if (f > 0.0) {
            lo = h;
            f_lo = f;
            if (side == -1) f_hi *= 0.5;
            side = -1;
          } else {
            hi = h;
            f_hi = f;
            at_hi = std::move(trial.y);
            if (side == 1) f_lo *= 0.5;
            side = 1;
          }
        }
        if (!(at_hi.squaredNorm() > 1e-300)) throw TrajectoryError("norm underflow before jump resolution");
        t = t_before + hi;
        psi = std::move(at_hi);
        do_jump(t);
      }
    };

    auto advance = [&](double t0, double t1) {
      if (finished) return;
      const bool drive_free = !driven || t0 >= pulse.end_ps() || t1 <= pulse.start_ps();
      if (drive_free && propagator_.usable()) {
        advance_closed_form(t0, t1);
      } else {
        advance_stepped(t0, t1);
      }
    };

    detail::march(grid.t_start, grid.t_end, samples, gen_.breakpoints(grid.t_start, grid.t_end), advance,
                  [&](std::size_t i) {
                    out.samples[i] = psi.normalized();
                    next_sample = i + 1;
                  });
    return out;
  }

 private:
  LindbladGenerator gen_;
  DriveFreePropagator propagator_;
  OdeOptions options_;
  Eigen::Index ground_index_ = 0;
  StateVector ground_passage_;
  double ground_passage_norm2_ = -1.0;
};

inline Trajectory sample_jump_trajectory(const StateVector& psi0, const ModelOperators& ops, const TimeGrid& grid,
                                         std::uint64_t base_seed, std::uint64_t trajectory_index, OdeOptions options = {}) {
  Rng rng = make_stream(base_seed, trajectory_index);
  return JumpUnraveling(ops, options).sample(psi0, grid, rng);
}

struct EnsembleAverage {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t n_trajectories = 0;
};

/// Ensemble mean of ⟨observable⟩ at each sample time over n independent trajectories.
/// Trajectory k uses stream (base_seed, k), so the result is independent of `threads`.
inline EnsembleAverage jump_ensemble_average(const StateVector& psi0, const ModelOperators& ops, const TimeGrid& grid,
                                             const Operator& observable, std::size_t n_trajectories,
                                             std::uint64_t base_seed, unsigned threads = 1, OdeOptions options = {}) {
  require(n_trajectories >= 2, "need at least two trajectories");
  require(!grid.output_times.empty(), "ensemble averages need explicit output times");
  const JumpUnraveling unraveling(ops, options);
  const std::size_t n_samples = grid.output_times.size();
  std::vector<double> values(n_trajectories * n_samples);
  parallel_for(n_trajectories, threads, [&](std::size_t k) {
    Rng rng = make_stream(base_seed, k);
    const Trajectory tr = unraveling.sample(psi0, grid, rng);
    for (std::size_t i = 0; i < n_samples; ++i) {
      values[k * n_samples + i] = tr.samples[i].dot(observable.matrix * tr.samples[i]).real();
    }
  });
  EnsembleAverage out{grid.output_times, std::vector<double>(n_samples), std::vector<double>(n_samples), n_trajectories};
  for (std::size_t i = 0; i < n_samples; ++i) {
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t k = 0; k < n_trajectories; ++k) {
      const double v = values[k * n_samples + i];
      sum += v;
      sum2 += v * v;
    }
    const double n = double(n_trajectories);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
    out.mean[i] = mean;
    out.std_error[i] = std::sqrt(var / n);
  }
  return out;
}

}  // namespace qdsps

#endif  // QDSPS_TRAJECTORY_HPP

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

#ifndef QDSPS_MASTER_EQUATION_HPP
#define QDSPS_MASTER_EQUATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "qdsps/common.hpp"
#include "qdsps/hilbert.hpp"
#include "qdsps/model.hpp"
#include "qdsps/ode.hpp"

namespace qdsps {

struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  /// Sample times inside [t_start, t_end], ascending. Empty means t_end only.
  std::vector<double> output_times;

  std::vector<double> samples() const {
    auto out = samples_or_none();
    if (out.empty()) out.push_back(t_end);
    return out;
  }

  std::vector<double> samples_or_none() const {
    require(t_end > t_start, "t_end must exceed t_start");
    require(std::is_sorted(output_times.begin(), output_times.end()), "output times must be ascending");
    if (!output_times.empty()) {
      require(output_times.front() >= t_start && output_times.back() <= t_end, "output times outside [t_start, t_end]");
    }
    return output_times;
  }
};

/// Cached generator pieces shared by the master equation and the jump unraveling.
class LindbladGenerator {
 public:
  explicit LindbladGenerator(const ModelOperators& ops) : ops_(ops), dim_(ops.cfg.dim()) {
    Matrix half_decay = Matrix::Zero(dim_, dim_);
    for (std::size_t k = 0; k < kChannelCount; ++k) {
      const Matrix& c = ops.collapse[k].op.matrix;
      jump_[k] = c;
      jump_dag_[k] = c.adjoint();
      rate_op_[k] = c.adjoint() * c;
      rate_op_t_[k] = rate_op_[k].transpose();
      half_decay += 0.5 * rate_op_[k];
      active_[k] = c.norm() > 0.0;
    }
    heff0_ = ops.h0.matrix / kHbarUeVPs - Complex(0.0, 1.0) * half_decay;
    minus_i_heff0_ = Complex(0.0, -1.0) * heff0_;
    i_heff0_dag_ = Complex(0.0, 1.0) * heff0_.adjoint();
    minus_i_drive_ = Complex(0.0, -1.0) * ops.drive_shape.matrix;
    scratch_ = Matrix::Zero(dim_, dim_);
    rho_buf_ = scratch_;
    out_buf_ = scratch_;
    const auto& p = ops.pulse;
    omega_peak_ = p.active() ? p.peak_rabi_frequency() : 0.0;
    pulse_center_ = p.center_ps;
    inv_sigma_ = 1.0 / p.sigma_ps();
  }

  /// Ω(t) in 1/ps, with the pulse normalization cached.
  double rabi_frequency(double t) const {
    if (omega_peak_ == 0.0) return 0.0;
    const double x = (t - pulse_center_) * inv_sigma_;
    if (std::abs(x) > PulseShape::kTruncationSigmas) return 0.0;
    return omega_peak_ * std::exp(-0.5 * x * x);
  }

  Eigen::Index dim() const { return dim_; }
  const ModelOperators& operators() const { return ops_; }
  const PulseShape& pulse() const { return ops_.pulse; }
  const Matrix& jump(std::size_t k) const { return jump_[k]; }
  const Matrix& rate_operator(std::size_t k) const { return rate_op_[k]; }

  /// Photon flux Tr(c†c ρ) on channel k.
  double flux(std::size_t k, const Eigen::Ref<const Matrix>& rho) const {
    return rate_op_t_[k].cwiseProduct(rho).sum().real();
  }

  /// H_eff/ħ = H(t)/ħ - (i/2) Σ c†c.
  Matrix effective_hamiltonian(double t) const {
    Matrix h = heff0_;
    const double omega = rabi_frequency(t);
    if (omega != 0.0) h += (0.5 * omega) * ops_.drive_shape.matrix;
    return h;
  }

  /// dψ/dt = -i H_eff ψ for the no-jump evolution.
  void apply_no_jump(double t, const StateVector& psi, StateVector& out) const {
    out.noalias() = minus_i_heff0_ * psi;
    const double omega = rabi_frequency(t);
    if (omega != 0.0) out.noalias() += (0.5 * omega) * (minus_i_drive_ * psi);
  }

  /// dρ/dt, with the recycling terms of the channels in `recycle_mask` included.
  /// Not reentrant: uses an internal scratch buffer.
  void apply(double t, const Eigen::Ref<const Matrix>& rho, Eigen::Ref<Matrix> out,
             std::array<bool, kChannelCount> recycle_mask = {true, true, true}) const {
    // Aligned copies keep the small products on the vectorized path.
    rho_buf_ = rho;
    // Both sides are applied explicitly so roundoff in the anti-Hermitian part
    // follows the true (contractive) dynamics.
    out_buf_.noalias() = minus_i_heff0_ * rho_buf_;
    out_buf_.noalias() += rho_buf_ * i_heff0_dag_;
    const double omega = rabi_frequency(t);
    if (omega != 0.0) {
      scratch_.noalias() = minus_i_drive_ * rho_buf_;
      scratch_.noalias() -= rho_buf_ * minus_i_drive_;
      out_buf_ += (0.5 * omega) * scratch_;
    }
    for (std::size_t k = 0; k < kChannelCount; ++k) {
      if (recycle_mask[k] && active_[k]) {
        scratch_.noalias() = jump_[k] * rho_buf_;
        out_buf_.noalias() += scratch_ * jump_dag_[k];
      }
    }
    out = out_buf_;
  }

  /// Column-major superoperator of the drive-free generator, recycling as in `apply`.
  Matrix superoperator(std::array<bool, kChannelCount> recycle_mask = {true, true, true}) const {
    const Matrix id = Matrix::Identity(dim_, dim_);
    const Matrix right = Complex(0.0, 1.0) * heff0_.adjoint().transpose();
    Matrix out = kron(id, minus_i_heff0_) + kron(right, id);
    for (std::size_t k = 0; k < kChannelCount; ++k) {
      if (recycle_mask[k] && active_[k]) out += jump_superoperator(k);
    }
    return out;
  }

  /// vec(c ρ c†) = (conj(c) ⊗ c) vec(ρ).
  Matrix jump_superoperator(std::size_t k) const { return kron(jump_[k].conjugate(), jump_[k]); }

  /// Row vector r with r·vec(ρ) = Tr(c†c ρ).
  Eigen::RowVectorXcd flux_row(std::size_t k) const {
    Eigen::RowVectorXcd row(dim_ * dim_);
    for (Eigen::Index i = 0; i < dim_; ++i) {
      for (Eigen::Index j = 0; j < dim_; ++j) row(j + i * dim_) = rate_op_[k](i, j);
    }
    return row;
  }

  bool drive_free(double t0, double t1) const {
    const auto& p = ops_.pulse;
    return !p.active() || t0 >= p.end_ps() || t1 <= p.start_ps();
  }

  /// Pulse-aware breakpoints inside (t0, t1).
  std::vector<double> breakpoints(double t0, double t1) const {
    std::vector<double> out;
    if (ops_.pulse.active()) {
      for (double b : {ops_.pulse.start_ps(), ops_.pulse.end_ps()}) {
        if (b > t0 && b < t1) out.push_back(b);
      }
    }
    return out;
  }

  /// Step ceiling on [t0, t1): the pulse must be resolved.
  double step_ceiling(double t0, double t1, double grid_max) const {
    const auto& p = ops_.pulse;
    if (p.active() && t0 < p.end_ps() && t1 > p.start_ps()) return std::min(grid_max, p.sigma_ps());
    return grid_max;
  }

 private:
  static Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    return out;
  }

  ModelOperators ops_;
  Eigen::Index dim_;
  Matrix heff0_, minus_i_heff0_, i_heff0_dag_, minus_i_drive_;
  std::array<Matrix, kChannelCount> jump_, jump_dag_, rate_op_, rate_op_t_;
  std::array<bool, kChannelCount> active_{};
  mutable Matrix scratch_, rho_buf_, out_buf_;
  double omega_peak_ = 0.0, pulse_center_ = 0.0, inv_sigma_ = 1.0;
};

struct Evolution {
  std::vector<DensityMatrix> states;
  /// Time-integrated photon flux per channel, from t_start to each sample.
  std::vector<std::array<double, kChannelCount>> integrated_flux;
  double max_trace_drift = 0.0;
};

namespace detail {

/// Exact propagation of a time-independent linear system y' = M y, with the
/// exponentials cached per interval length.
class LinearPropagator {
 public:
  explicit LinearPropagator(Matrix generator) : generator_(std::move(generator)) {}

  void advance(StateVector& y, double tau) {
    auto it = cache_.find(tau);
    if (it == cache_.end()) {
      const long n = std::max(1L, long(std::ceil(tau / kChunkPs)));
      const Matrix step = (generator_ * (tau / double(n))).exp();
      it = cache_.emplace(tau, Entry{step, n}).first;
    }
    for (long i = 0; i < it->second.repeats; ++i) y = it->second.step * y;
  }

 private:
  static constexpr double kChunkPs = 100.0;
  struct Entry {
    Matrix step;
    long repeats;
  };
  Matrix generator_;
  std::map<double, Entry> cache_;
};

/// Runs `advance(t, y, t_next)` across the sorted union of samples and breakpoints,
/// invoking `record(index)` at each sample.
template <class Advance, class Record>
void march(double t_start, double t_end, const std::vector<double>& samples, std::vector<double> breaks, Advance&& advance,
           Record&& record) {
  std::vector<double> stops = samples;
  stops.insert(stops.end(), breaks.begin(), breaks.end());
  stops.push_back(t_end);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  double t = t_start;
  std::size_t next_sample = 0;
  while (next_sample < samples.size() && samples[next_sample] <= t) record(next_sample++);
  for (double stop : stops) {
    if (stop <= t) continue;
    advance(t, stop);
    t = stop;
    while (next_sample < samples.size() && samples[next_sample] <= t) record(next_sample++);
  }
}

}  // namespace detail

/// Integrates the Lindblad master equation, tracking the integrated flux of every
/// collapse channel alongside ρ.
inline Evolution evolve_master_equation(const DensityMatrix& rho0, const ModelOperators& ops, const TimeGrid& grid,
                                        OdeOptions options = {}) {
  const auto samples = grid.samples();
  const LindbladGenerator gen(ops);
  const Eigen::Index d = gen.dim();
  require(rho0.dim() == d, "initial density matrix has the wrong dimension");
  require(std::abs(rho0.trace() - 1.0) <= 1e-9, "initial density matrix must have unit trace");

  const Eigen::Index n_rho = d * d;
  StateVector y = StateVector::Zero(n_rho + Eigen::Index(kChannelCount));
  Eigen::Map<Matrix>(y.data(), d, d) = rho0.matrix;

  auto rhs = [&](double t, const StateVector& state, StateVector& dydt) {
    dydt.resize(state.size());
    Eigen::Map<const Matrix> rho(state.data(), d, d);
    Eigen::Map<Matrix> drho(dydt.data(), d, d);
    gen.apply(t, rho, drho);
    for (std::size_t k = 0; k < kChannelCount; ++k) {
      dydt(n_rho + Eigen::Index(k)) = gen.flux(k, rho);
    }
  };
  DormandPrince stepper(rhs, options);
  std::optional<detail::LinearPropagator> exact;

  Evolution out;
  out.states.resize(samples.size());
  out.integrated_flux.resize(samples.size());
  double t_now = grid.t_start;
  detail::march(
      grid.t_start, grid.t_end, samples, gen.breakpoints(grid.t_start, grid.t_end),
      [&](double t0, double t1) {
        if (gen.drive_free(t0, t1) && !(std::min(grid.max_step, options.max_step) < t1 - t0)) {
          if (!exact) {
            Matrix m = Matrix::Zero(n_rho + Eigen::Index(kChannelCount), n_rho + Eigen::Index(kChannelCount));
            m.topLeftCorner(n_rho, n_rho) = gen.superoperator();
            for (std::size_t k = 0; k < kChannelCount; ++k) m.block(n_rho + Eigen::Index(k), 0, 1, n_rho) = gen.flux_row(k);
            exact.emplace(std::move(m));
          }
          exact->advance(y, t1 - t0);
          stepper.reset_step_size();
          const double drift = std::abs(Eigen::Map<const Matrix>(y.data(), d, d).trace().real() - 1.0);
          out.max_trace_drift = std::max(out.max_trace_drift, drift);
          t_now = t1;
          return;
        }
        stepper.set_max_step(gen.step_ceiling(t0, t1, std::min(grid.max_step, options.max_step)));
        double t = t0;
        while (t < t1) {
          stepper.step(t, y, t1);
          const double drift = std::abs(Eigen::Map<const Matrix>(y.data(), d, d).trace().real() - 1.0);
          out.max_trace_drift = std::max(out.max_trace_drift, drift);
        }
        t_now = t1;
      },
      [&](std::size_t i) {
        out.states[i] = {Eigen::Map<const Matrix>(y.data(), d, d), t_now};
        for (std::size_t k = 0; k < kChannelCount; ++k) out.integrated_flux[i][k] = y(n_rho + Eigen::Index(k)).real();
      });
  return out;
}

/// Probabilities of emitting exactly n photons on one channel over [t_start, t_end],
/// from the photon-number-resolved master equation. The last entry is P(n >= max_photons).
inline std::vector<double> photon_number_distribution(const DensityMatrix& rho0, const ModelOperators& ops, double t_start,
                                                      double t_end, int max_photons = 2,
                                                      Channel channel = Channel::cavity, OdeOptions options = {}) {
  require(max_photons >= 1, "max_photons must be >= 1");
  require(t_end > t_start, "t_end must exceed t_start");
  const LindbladGenerator gen(ops);
  const Eigen::Index d = gen.dim();
  require(rho0.dim() == d, "initial density matrix has the wrong dimension");
  const auto k = static_cast<std::size_t>(channel);
  std::array<bool, kChannelCount> mask{true, true, true};
  mask[k] = false;

  const Eigen::Index blocks = max_photons + 1;
  const Eigen::Index n_rho = d * d;
  StateVector y = StateVector::Zero(blocks * n_rho);
  Eigen::Map<Matrix>(y.data(), d, d) = rho0.matrix;

  auto rhs = [&](double t, const StateVector& state, StateVector& dydt) {
    dydt.resize(state.size());
    for (Eigen::Index n = 0; n < blocks; ++n) {
      Eigen::Map<const Matrix> rho(state.data() + n * n_rho, d, d);
      Eigen::Map<Matrix> drho(dydt.data() + n * n_rho, d, d);
      gen.apply(t, rho, drho, mask);
      // Jumps feed the next block; the last block is absorbing.
      const Eigen::Index source = n == 0 ? -1 : n - 1;
      if (source >= 0) {
        Eigen::Map<const Matrix> prev(state.data() + source * n_rho, d, d);
        drho.noalias() += gen.jump(k) * prev * gen.jump(k).adjoint();
      }
      if (n == blocks - 1) drho.noalias() += gen.jump(k) * rho * gen.jump(k).adjoint();
    }
  };
  DormandPrince stepper(rhs, options);
  std::vector<double> stops = gen.breakpoints(t_start, t_end);
  stops.push_back(t_end);
  double t = t_start;
  for (double stop : stops) {
    if (gen.drive_free(t, stop) && !(options.max_step < stop - t)) {
      const Matrix diag = gen.superoperator(mask);
      const Matrix feed = gen.jump_superoperator(k);
      Matrix m = Matrix::Zero(blocks * n_rho, blocks * n_rho);
      for (Eigen::Index n = 0; n < blocks; ++n) {
        m.block(n * n_rho, n * n_rho, n_rho, n_rho) = diag;
        if (n > 0) m.block(n * n_rho, (n - 1) * n_rho, n_rho, n_rho) = feed;
      }
      m.block((blocks - 1) * n_rho, (blocks - 1) * n_rho, n_rho, n_rho) += feed;
      detail::LinearPropagator(std::move(m)).advance(y, stop - t);
      stepper.reset_step_size();
      t = stop;
      continue;
    }
    stepper.set_max_step(gen.step_ceiling(t, stop, options.max_step));
    stepper.integrate_to(t, y, stop);
  }
  std::vector<double> probs(static_cast<std::size_t>(blocks));
  for (Eigen::Index n = 0; n < blocks; ++n) {
    probs[std::size_t(n)] = Eigen::Map<const Matrix>(y.data() + n * n_rho, d, d).trace().real();
  }
  return probs;
}

}  // namespace qdsps

#endif  // QDSPS_MASTER_EQUATION_HPP

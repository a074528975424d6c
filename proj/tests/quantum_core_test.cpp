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

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "qdsps/hilbert.hpp"
#include "qdsps/master_equation.hpp"
#include "qdsps/model.hpp"
#include "qdsps/trajectory.hpp"

namespace qdsps {
namespace {

SystemModel lossless_two_level(double area) {
  SystemModel m;
  m.g_ueV = 0.0;
  m.kappa_ueV = 233.0;
  m.pulse.area_rad = area;
  return m;
}

// Fixed-step RK4 on the bare two-level Schrödinger equation in the resonant
// rotating frame: i dc/dt = Ω(t)/2 σx c. Independent of the library integrator.
double excited_population_rk4(const PulseShape& pulse, int steps) {
  std::complex<double> cg = 1.0, ce = 0.0;
  const double t0 = pulse.start_ps() - 1.0, t1 = pulse.end_ps() + 1.0;
  const double h = (t1 - t0) / steps;
  const std::complex<double> mi(0.0, -1.0);
  auto f = [&](double t, std::complex<double> g, std::complex<double> e, std::complex<double>& dg, std::complex<double>& de) {
    const double w = 0.5 * pulse.rabi_frequency(t);
    dg = mi * w * e;
    de = mi * w * g;
  };
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    std::complex<double> g1, e1, g2, e2, g3, e3, g4, e4;
    f(t, cg, ce, g1, e1);
    f(t + h / 2, cg + h / 2 * g1, ce + h / 2 * e1, g2, e2);
    f(t + h / 2, cg + h / 2 * g2, ce + h / 2 * e2, g3, e3);
    f(t + h, cg + h * g3, ce + h * e3, g4, e4);
    cg += h / 6 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
    ce += h / 6 * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
  }
  return std::norm(ce);
}

double excited_after_pulse(const SystemModel& m) {
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, m);
  const auto rho0 = DensityMatrix::pure(ops::basis_state(cfg, false, 0));
  const auto ev = evolve_master_equation(rho0, ops, {0.0, m.pulse.end_ps() + 1.0});
  return expectation_real(ops::excited_population(cfg), ev.states.back());
}

TEST(HilbertConfig, DimensionAndValidation) {
  EXPECT_EQ((HilbertConfig{1}.dim()), 4);
  EXPECT_EQ((HilbertConfig{2}.dim()), 6);
  EXPECT_THROW((HilbertConfig{0}.validate()), std::invalid_argument);
  EXPECT_EQ(ops::annihilation(HilbertConfig{3}).matrix.rows(), 8);
}

TEST(BuildModelOperators, ResonantUncoupledHamiltonianVanishes) {
  SystemModel m;
  m.g_ueV = 0.0;
  const auto ops = build_model_operators(HilbertConfig{1}, m);
  EXPECT_EQ(ops.h0.matrix.rows(), 4);
  EXPECT_DOUBLE_EQ(ops.h0.matrix.norm(), 0.0);
}

TEST(BuildModelOperators, CavityCollapseRateInInverseps) {
  SystemModel m;
  m.kappa_ueV = 233.0;
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, m);
  const Matrix& c = ops.collapse[0].op.matrix;
  // 233 / 658.2119 from an independent unit-conversion script.
  const double expected = 0.3539893459841732;
  EXPECT_NEAR(std::norm(c(cfg.index(false, 0), cfg.index(false, 1))), expected, 1e-12);
  EXPECT_NEAR(rate_from_energy(233.0), 0.35400, 2e-5);
}

TEST(BuildModelOperators, CouplingMatrixElementAndHermiticity) {
  SystemModel m;
  m.g_ueV = 50.0;
  m.delta_qd_cavity_ueV = 75.0;
  m.delta_laser_qd_ueV = -12.0;
  const HilbertConfig cfg{1};
  const auto ops = build_model_operators(cfg, m);
  const auto e0 = cfg.index(true, 0), g1 = cfg.index(false, 1);
  EXPECT_DOUBLE_EQ(ops.h0.matrix(e0, g1).real(), 50.0);
  EXPECT_DOUBLE_EQ(ops.h0.matrix(g1, e0).real(), 50.0);
  EXPECT_TRUE(ops.h0.is_hermitian(1e-12));
  EXPECT_FALSE(ops.collapse[0].op.is_hermitian());
  // QD energy relative to the laser is -delta_laser_qd; cavity is -(Δ + delta_laser_qd).
  EXPECT_DOUBLE_EQ(ops.h0.matrix(e0, e0).real(), 12.0);
  EXPECT_DOUBLE_EQ(ops.h0.matrix(g1, g1).real(), -63.0);
}

TEST(BuildModelOperators, RejectsInvalidParameters) {
  SystemModel m;
  m.g_ueV = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(build_model_operators(HilbertConfig{2}, m), std::invalid_argument);
  m = SystemModel{};
  m.gamma_leaky_per_ps = -1.0;
  EXPECT_THROW(build_model_operators(HilbertConfig{2}, m), std::invalid_argument);
  m = SystemModel{};
  m.kappa_ueV = 0.0;
  EXPECT_THROW(build_model_operators(HilbertConfig{2}, m), std::invalid_argument);
  EXPECT_THROW(build_model_operators(HilbertConfig{0}, SystemModel{}), std::invalid_argument);
}

TEST(SystemModel, WeakCouplingFlag) {
  SystemModel m;
  m.g_ueV = 20.0;
  EXPECT_TRUE(m.weak_coupling());
  m.g_ueV = 70.0;
  EXPECT_FALSE(m.weak_coupling());
}

TEST(Units, EnergyRateRoundTrip) {
  for (double e : {1e-3, 0.5, 233.0, 1386350.0}) {
    EXPECT_NEAR(energy_from_rate(rate_from_energy(e)) / e, 1.0, 1e-12);
  }
}

TEST(PulseShape, AreaByQuadrature) {
  for (double fwhm : {0.5, 1.3, 4.0}) {
    PulseShape p;
    p.area_rad = kPi;
    p.fwhm_ps = fwhm;
    // Composite Simpson over the support.
    const int n = 20000;
    const double a = p.start_ps(), b = p.end_ps(), h = (b - a) / n;
    double s = p.rabi_frequency(a) + p.rabi_frequency(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * p.rabi_frequency(a + i * h);
    EXPECT_NEAR(s * h / 3.0 / p.area_rad, 1.0, 1e-6);
  }
}

TEST(Expectation, TrivialObservables) {
  const HilbertConfig cfg{2};
  const auto mixed = DensityMatrix{Matrix::Identity(cfg.dim(), cfg.dim()) / double(cfg.dim())};
  EXPECT_NEAR(expectation_real(ops::identity(cfg), mixed), 1.0, 1e-15);
  const auto e0 = DensityMatrix::pure(ops::basis_state(cfg, true, 0));
  EXPECT_NEAR(expectation_real(ops::excited_population(cfg), e0), 1.0, 1e-15);
  const auto g1 = DensityMatrix::pure(ops::basis_state(cfg, false, 1));
  EXPECT_NEAR(expectation_real(ops::photon_number(cfg), g1), 1.0, 1e-15);
  EXPECT_THROW(expectation(ops::identity(HilbertConfig{1}), g1), std::invalid_argument);
  EXPECT_THROW(expectation_real(ops::sigma_minus(cfg), DensityMatrix{Matrix::Identity(6, 6) * Complex(0.5, 0.0) +
                                                                      ops::sigma_plus(cfg).matrix * Complex(0.0, 0.3)}),
               std::domain_error);
}

TEST(MasterEquation, StationaryGroundState) {
  SystemModel m;
  m.pulse.area_rad = 0.0;
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, m);
  const auto rho0 = DensityMatrix::pure(ops::basis_state(cfg, false, 0));
  const auto ev = evolve_master_equation(rho0, ops, {0.0, 1000.0, 50.0, {0.0, 250.0, 500.0, 1000.0}});
  for (const auto& s : ev.states) EXPECT_LT((s.matrix - rho0.matrix).norm(), 1e-15);
}

TEST(MasterEquation, PiPulseInvertsTwoLevelSystem) {
  SystemModel m = lossless_two_level(kPi);
  EXPECT_NEAR(excited_after_pulse(m), 1.0, 1e-6);
  EXPECT_NEAR(excited_population_rk4(m.pulse, 200000), 1.0, 1e-9);
}

TEST(MasterEquation, PulseAreaTheorem) {
  for (double area : {0.0, kPi / 2, kPi, 2 * kPi, 3 * kPi}) {
    SystemModel m = lossless_two_level(area);
    const double expected = std::pow(std::sin(area / 2.0), 2);
    EXPECT_NEAR(excited_after_pulse(m), expected, 1e-6) << "area " << area;
    EXPECT_NEAR(excited_population_rk4(m.pulse, 100000), expected, 1e-8) << "area " << area;
  }
}

TEST(MasterEquation, LeakyDecayIsExponential) {
  SystemModel m;
  m.pulse.area_rad = 0.0;
  m.gamma_leaky_per_ps = 1.0 / 890.0;
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, m);
  std::vector<double> times;
  for (int i = 0; i <= 20; ++i) times.push_back(200.0 * i);
  const auto ev = evolve_master_equation(DensityMatrix::pure(ops::basis_state(cfg, true, 0)), ops, {0.0, 4000.0, 1e9, times});
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_NEAR(expectation_real(ops::excited_population(cfg), ev.states[i]), std::exp(-times[i] / 890.0), 1e-6);
  }
}

struct ParamSet {
  double g, delta, dephasing, laser;
};

SystemModel purcell_model(const ParamSet& p) {
  SystemModel m;
  m.g_ueV = p.g;
  m.kappa_ueV = 233.0;
  m.gamma_leaky_per_ps = 1.0 / 1300.0;
  m.gamma_dephasing_per_ps = p.dephasing;
  m.delta_qd_cavity_ueV = p.delta;
  m.delta_laser_qd_ueV = p.laser;
  m.pulse.area_rad = kPi;
  return m;
}

TEST(MasterEquation, StateInvariantsAndBookkeeping) {
  for (const ParamSet& p : {ParamSet{12.0, 0.0, 0.0, 0.0}, ParamSet{25.0, 360.0, 0.05, 0.0}, ParamSet{12.0, 75.0, 0.01, 40.0}}) {
    const HilbertConfig cfg{2};
    const auto ops = build_model_operators(cfg, purcell_model(p));
    std::vector<double> times;
    for (int i = 0; i <= 40; ++i) times.push_back(i * 50.0);
    const auto ev = evolve_master_equation(DensityMatrix::pure(ops::basis_state(cfg, false, 0)), ops, {0.0, 2000.0, 1e9, times});
    EXPECT_LT(ev.max_trace_drift, 1e-9);
    const double pulse_done = ops.pulse.end_ps();
    const Matrix excitation = ops::excited_population(cfg).matrix + ops::photon_number(cfg).matrix;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto& rho = ev.states[i];
      EXPECT_NO_THROW(rho.check_valid(1e-9, 1e-10, 1e-8));
      if (times[i] > pulse_done) {
        // After the drive, excitation lost equals photons emitted on both channels.
        const auto after = evolve_master_equation(DensityMatrix::pure(ops::basis_state(cfg, false, 0)), ops,
                                                  {0.0, pulse_done + 1e-9});
        const double start = (excitation * after.states.back().matrix).trace().real();
        const double emitted = (ev.integrated_flux[i][0] - after.integrated_flux.back()[0]) +
                               (ev.integrated_flux[i][1] - after.integrated_flux.back()[1]);
        const double residual = (excitation * rho.matrix).trace().real();
        EXPECT_NEAR(emitted + residual, start, 1e-6);
      }
    }
  }
}

TEST(MasterEquation, DriveFreeSegmentsMatchStepping) {
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, purcell_model({25.0, 150.0, 0.02, 10.0}));
  std::vector<double> times;
  for (int i = 1; i <= 12; ++i) times.push_back(i * 250.0);
  const auto rho0 = DensityMatrix::pure(ops::basis_state(cfg, false, 0));
  // A finite step ceiling shorter than every segment forces Runge-Kutta stepping.
  const auto exact = evolve_master_equation(rho0, ops, {0.0, 3000.0, 1e9, times});
  const auto stepped = evolve_master_equation(rho0, ops, {0.0, 3000.0, 20.0, times});
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_LT((exact.states[i].matrix - stepped.states[i].matrix).cwiseAbs().maxCoeff(), 1e-8);
    for (std::size_t k = 0; k < kChannelCount; ++k) {
      EXPECT_NEAR(exact.integrated_flux[i][k], stepped.integrated_flux[i][k], 1e-8);
    }
  }
  OdeOptions capped;
  capped.max_step = 20.0;
  const auto p_exact = photon_number_distribution(rho0, ops, 0.0, 3000.0, 3);
  const auto p_stepped = photon_number_distribution(rho0, ops, 0.0, 3000.0, 3, Channel::cavity, capped);
  for (std::size_t n = 0; n < p_exact.size(); ++n) EXPECT_NEAR(p_exact[n], p_stepped[n], 1e-8);
}

TEST(MasterEquation, FockTruncationConverged) {
  const auto m = purcell_model({20.0, 0.0, 0.0, 0.0});
  double previous = 0.0;
  for (int n : {2, 3}) {
    const HilbertConfig cfg{n};
    const auto ops = build_model_operators(cfg, m);
    const auto ev = evolve_master_equation(DensityMatrix::pure(ops::basis_state(cfg, false, 0)), ops, {0.0, 3000.0});
    const double emitted = ev.integrated_flux.back()[0];
    if (n == 3) {
      EXPECT_LT(std::abs(emitted - previous), 1e-6);
    }
    previous = emitted;
  }
}

TEST(MasterEquation, RejectsBadInputs) {
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, SystemModel{});
  const auto rho0 = DensityMatrix::pure(ops::basis_state(cfg, false, 0));
  EXPECT_THROW(evolve_master_equation(rho0, ops, {10.0, 5.0}), std::invalid_argument);
  EXPECT_THROW(evolve_master_equation(DensityMatrix{Matrix::Identity(4, 4) / 4.0}, ops, {0.0, 5.0}), std::invalid_argument);
}

TEST(DormandPrince, UnderflowCarriesFailingTime) {
  // y' = y² blows up at t = 1.
  auto rhs = [](double, const StateVector& y, StateVector& dy) { dy = y.cwiseProduct(y); };
  DormandPrince stepper(rhs, OdeOptions{});
  StateVector y = StateVector::Constant(1, 1.0);
  double t = 0.0;
  try {
    stepper.integrate_to(t, y, 2.0);
    FAIL() << "expected an integration error";
  } catch (const IntegrationError& e) {
    EXPECT_GT(e.time_ps(), 0.99);
    EXPECT_LT(e.time_ps(), 1.0 + 1e-6);
  }
}

TEST(Calibration, EmitterRateMatchesLifetimeTargets) {
  const auto cal = calibrate_to_lifetimes(221.0, 890.0, 360.0, 233.0);
  EXPECT_NEAR(1.0 / emitter_decay_rate(cal.g_ueV, 233.0, cal.gamma_leaky_per_ps, 0.0), 221.0, 1e-6);
  EXPECT_NEAR(1.0 / emitter_decay_rate(cal.g_ueV, 233.0, cal.gamma_leaky_per_ps, 360.0), 890.0, 1e-6);
  EXPECT_LT(cal.g_ueV, 233.0 / 4.0);
  // Bad-cavity inversion round trip.
  const double g = coupling_for_purcell(3.0, 233.0, 1.0 / 852.0);
  EXPECT_NEAR(4.0 * g * g / (kHbarUeVPs * 233.0 * (1.0 / 852.0)), 3.0, 1e-12);
}

TEST(JumpTrajectory, NoExcitationNoClicks) {
  SystemModel m = purcell_model({12.0, 0.0, 0.0, 0.0});
  m.pulse.area_rad = 0.0;
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, m);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const auto tr = sample_jump_trajectory(ops::basis_state(cfg, false, 0), ops, {0.0, 5000.0}, 7, k);
    EXPECT_TRUE(tr.cavity_clicks.empty());
    EXPECT_TRUE(tr.leaky_clicks.empty());
  }
}

TEST(JumpTrajectory, LeakyDecayHistogram) {
  SystemModel m;
  m.pulse.area_rad = 0.0;
  m.gamma_leaky_per_ps = 1.0 / 890.0;
  const HilbertConfig cfg{1};
  const JumpUnraveling gen(build_model_operators(cfg, m));
  const TimeGrid grid{0.0, 40 * 890.0};
  const std::size_t n = 100000;
  double sum = 0.0;
  std::vector<int> hist(8, 0);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = make_stream(11, k);
    const auto tr = gen.sample(ops::basis_state(cfg, true, 0), grid, rng);
    ASSERT_EQ(tr.leaky_clicks.size(), 1u);
    ASSERT_TRUE(tr.cavity_clicks.empty());
    sum += tr.leaky_clicks[0];
    const auto bin = std::size_t(tr.leaky_clicks[0] / 445.0);
    if (bin < hist.size()) ++hist[bin];
  }
  // Maximum-likelihood exponential fit: T̂ = sample mean.
  EXPECT_NEAR(sum / n / 890.0, 1.0, 0.05);
  // Histogram follows exp(-t/T) bin by bin within 4σ.
  for (std::size_t b = 0; b < hist.size(); ++b) {
    const double p = std::exp(-445.0 * b / 890.0) - std::exp(-445.0 * (b + 1) / 890.0);
    EXPECT_NEAR(hist[b], n * p, 4.0 * std::sqrt(n * p));
  }
}

TEST(JumpTrajectory, ReproducibleAndOrderIndependent) {
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, purcell_model({12.0, 75.0, 0.02, 0.0}));
  const TimeGrid grid{0.0, 3000.0};
  const auto a = sample_jump_trajectory(ops::basis_state(cfg, false, 0), ops, grid, 99, 17);
  (void)sample_jump_trajectory(ops::basis_state(cfg, false, 0), ops, grid, 99, 3);
  const auto b = sample_jump_trajectory(ops::basis_state(cfg, false, 0), ops, grid, 99, 17);
  EXPECT_EQ(a.cavity_clicks, b.cavity_clicks);
  EXPECT_EQ(a.leaky_clicks, b.leaky_clicks);
  EXPECT_EQ(a.dephasing_jumps, b.dephasing_jumps);

  TimeGrid sampled{0.0, 800.0, 1e9, {100.0, 400.0, 800.0}};
  const auto serial = jump_ensemble_average(ops::basis_state(cfg, false, 0), ops, sampled, ops::excited_population(cfg), 64, 5, 1);
  const auto threaded = jump_ensemble_average(ops::basis_state(cfg, false, 0), ops, sampled, ops::excited_population(cfg), 64, 5, 4);
  EXPECT_EQ(serial.mean, threaded.mean);
  EXPECT_EQ(serial.std_error, threaded.std_error);
}

TEST(JumpTrajectory, EnsembleMatchesMasterEquation) {
  const std::vector<ParamSet> sets = {{12.0, 0.0, 0.0, 0.0}, {12.0, 360.0, 0.0, 0.0}, {20.0, 75.0, 0.05, 30.0}};
  for (const auto& p : sets) {
    const HilbertConfig cfg{2};
    const auto ops = build_model_operators(cfg, purcell_model(p));
    std::vector<double> times;
    for (int i = 1; i <= 8; ++i) times.push_back(i * 100.0);
    const TimeGrid grid{0.0, 800.0, 1e9, times};
    const auto psi0 = ops::basis_state(cfg, false, 0);
    const auto ens = jump_ensemble_average(psi0, ops, grid, ops::excited_population(cfg), 4000, 2024);
    const auto ev = evolve_master_equation(DensityMatrix::pure(psi0), ops, grid);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double exact = expectation_real(ops::excited_population(cfg), ev.states[i]);
      EXPECT_NEAR(ens.mean[i], exact, 3.0 * ens.std_error[i] + 1e-9) << "g=" << p.g << " delta=" << p.delta << " t=" << times[i];
    }
  }
}

TEST(JumpTrajectory, EmissionBookkeeping) {
  // Every unit of initial excitation leaves through exactly one channel.
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, [] {
    auto m = purcell_model({12.0, 0.0, 0.0, 0.0});
    m.pulse.area_rad = 0.0;
    return m;
  }());
  const JumpUnraveling gen(ops);
  for (std::uint64_t k = 0; k < 500; ++k) {
    Rng rng = make_stream(3, k);
    const auto tr = gen.sample(ops::basis_state(cfg, true, 0), {0.0, 30000.0}, rng);
    EXPECT_EQ(tr.cavity_clicks.size() + tr.leaky_clicks.size(), 1u);
  }
}

TEST(PhotonCounting, PiPulseRarelyYieldsTwoPhotons) {
  const auto cal = calibrate_to_lifetimes(221.0, 890.0, 360.0, 233.0);
  SystemModel m;
  m.g_ueV = cal.g_ueV;
  m.gamma_leaky_per_ps = cal.gamma_leaky_per_ps;
  m.pulse.area_rad = kPi;
  const HilbertConfig cfg{2};
  const auto ops = build_model_operators(cfg, m);
  const auto rho0 = DensityMatrix::pure(ops::basis_state(cfg, false, 0));
  const auto probs = photon_number_distribution(rho0, ops, 0.0, 6000.0, 3);
  ASSERT_EQ(probs.size(), 4u);
  EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-9);
  EXPECT_LT(probs[2] + probs[3], 1e-3);
  EXPECT_GT(probs[2], 0.0);
  const auto ev = evolve_master_equation(rho0, ops, {0.0, 6000.0});
  EXPECT_NEAR(probs[1] + 2 * probs[2] + 3 * probs[3], ev.integrated_flux.back()[0], 1e-6);

  // Trajectory two-click fraction agrees with the counting master equation.
  const JumpUnraveling gen(ops);
  const std::size_t n = 20000;
  std::size_t twos = 0, ones = 0;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = make_stream(42, k);
    const auto tr = gen.sample(ops::basis_state(cfg, false, 0), {0.0, 6000.0}, rng);
    ASSERT_LE(tr.cavity_clicks.size(), 3u);
    if (tr.cavity_clicks.size() >= 2) ++twos;
    if (tr.cavity_clicks.size() == 1) ++ones;
  }
  const double p2 = probs[2] + probs[3];
  EXPECT_NEAR(double(twos), n * p2, 3.0 * std::sqrt(n * p2) + 1.0);
  EXPECT_NEAR(double(ones), n * probs[1], 3.0 * std::sqrt(n * probs[1] * (1 - probs[1])));
}

}  // namespace
}  // namespace qdsps

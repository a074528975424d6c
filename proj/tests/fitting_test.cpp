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
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "qdsps/fitting.hpp"

namespace qdsps {
namespace {

const std::vector<Family> kFamilies{Family::lorentzian_purcell, Family::mono_exp, Family::bi_exp,
                                    Family::damped_sinusoid};

// Random in-range parameters and abscissa for each family.
std::pair<std::vector<double>, double> random_point(Family f, std::mt19937_64& rng) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  switch (f) {
    case Family::lorentzian_purcell: return {{u(0.1, 10), u(0.1, 20), u(50, 500)}, u(-1000, 1000)};
    case Family::mono_exp: return {{u(-5, 5), u(50, 2000), u(-1, 1)}, u(0, 3000)};
    case Family::bi_exp: return {{u(0.1, 5), u(50, 400), u(0.1, 5), u(500, 3000), u(-1, 1)}, u(0, 3000)};
    case Family::damped_sinusoid: return {{u(0.1, 5), u(1, 6), u(0, 0.5), u(-1, 1)}, u(0, 15)};
  }
  return {};
}

// Richardson-extrapolated central difference.
double numeric_derivative(Family f, std::vector<double> p, std::size_t j, double x) {
  const double h = 1e-3 * std::max(std::abs(p[j]), 1e-2);
  auto central = [&](double step) {
    auto up = p, dn = p;
    up[j] += step;
    dn[j] -= step;
    return (model_eval(f, up, x) - model_eval(f, dn, x)) / (2 * step);
  };
  return (4 * central(h / 2) - central(h)) / 3;
}

TEST(ModelEval, AnalyticJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (Family f : kFamilies) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto [p, x] = random_point(f, rng);
      const auto grad = model_gradient(f, p, x);
      // Scale for near-zero derivatives: the function value sensitivity per unit relative change.
      double scale = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) scale = std::max(scale, std::abs(grad[j] * p[j]));
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double fd = numeric_derivative(f, p, j, x);
        const double tol = 1e-6 * std::max(std::abs(grad[j]), 1e-6 * scale / std::max(std::abs(p[j]), 1e-2));
        EXPECT_NEAR(grad[j], fd, tol) << family_name(f) << " parameter " << j;
      }
    }
  }
}

TEST(ModelEval, Identities) {
  EXPECT_DOUBLE_EQ(model_eval(Family::damped_sinusoid, {2.0, 3.0, 0.4, 0.25}, 0.0), 0.25);
  EXPECT_NEAR(model_eval(Family::damped_sinusoid, {2.0, 3.0, 0.0, 0.25}, 3.0), 2.25, 1e-15);
  for (double t : {0.0, 10.0, 500.0, 4000.0}) {
    EXPECT_EQ(model_eval(Family::bi_exp, {1.3, 221.0, 0.0, 1000.0, 0.1}, t),
              model_eval(Family::mono_exp, {1.3, 221.0, 0.1}, t));
  }
  EXPECT_THROW(family_from_name("gaussian"), std::invalid_argument);
  EXPECT_THROW(model_eval(Family::mono_exp, {1.0, 2.0}, 0.0), std::invalid_argument);
}

FitData sample(Family f, const std::vector<double>& p, double x0, double x1, std::size_t n) {
  FitData d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = x0 + (x1 - x0) * double(i) / double(n - 1);
    d.x.push_back(x);
    d.y.push_back(model_eval(f, p, x));
  }
  return d;
}

TEST(Fit, NoiselessMonoExponential) {
  const auto data = sample(Family::mono_exp, {1000.0, 890.0, 3.0}, 0.0, 5000.0, 120);
  const auto r = fit(initial_guess(FitModel::defaults(Family::mono_exp), data), data);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.value("lifetime_ps") / 890.0, 1.0, 1e-6);
  EXPECT_NEAR(r.value("amplitude") / 1000.0, 1.0, 1e-6);
}

TEST(Fit, NoiselessLorentzian) {
  const auto data = sample(Family::lorentzian_purcell, {2.0, 3.1, 233.0}, -800.0, 800.0, 15);
  const auto r = fit(initial_guess(FitModel::defaults(Family::lorentzian_purcell).fix("gamma_c_ueV", 233.0), data), data);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.value("purcell_factor"), 3.1, 3.1e-6);
  EXPECT_EQ(r.value("gamma_c_ueV"), 233.0);
  EXPECT_EQ(r.error("gamma_c_ueV"), 0.0);
}

TEST(Fit, NoiselessBiExponential) {
  const auto data = sample(Family::bi_exp, {800.0, 221.0, 200.0, 1000.0, 0.0}, 0.0, 6000.0, 300);
  auto model = FitModel::defaults(Family::bi_exp).fix("offset", 0.0);
  const auto r = fit(initial_guess(model, data), data);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.value("lifetime_fast_ps") / 221.0, 1.0, 1e-6);
  EXPECT_NEAR(r.value("lifetime_slow_ps") / 1000.0, 1.0, 1e-6);
}

TEST(Fit, NoiselessDampedSinusoid) {
  const auto data = sample(Family::damped_sinusoid, {1.0, 3.4, 0.12, 0.05}, 0.0, 3.5 * kPi, 50);
  const auto r = fit(initial_guess(FitModel::defaults(Family::damped_sinusoid), data), data);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.value("theta_pi"), 3.4, 3.4e-6);
  EXPECT_NEAR(r.value("damping_per_rad"), 0.12, 1e-6);
}

TEST(Fit, BiExponentialOrdering) {
  const auto data = sample(Family::bi_exp, {800.0, 221.0, 200.0, 1000.0, 0.0}, 0.0, 6000.0, 300);
  auto model = FitModel::defaults(Family::bi_exp).fix("offset", 0.0);
  model.set("amplitude_fast", 150.0).set("lifetime_fast_ps", 1200.0).set("amplitude_slow", 700.0).set("lifetime_slow_ps", 250.0);
  const auto r = fit(model, data);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(r.value("lifetime_fast_ps"), r.value("lifetime_slow_ps"));
  EXPECT_NEAR(r.value("lifetime_fast_ps") / 221.0, 1.0, 1e-6);
  EXPECT_NEAR(r.value("amplitude_fast") / 800.0, 1.0, 1e-6);

  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 5.0);
  for (int rep = 0; rep < 20; ++rep) {
    auto noisy = data;
    for (auto& y : noisy.y) y += noise(rng);
    const auto rr = fit(initial_guess(FitModel::defaults(Family::bi_exp), noisy), noisy);
    if (rr.converged) {
      EXPECT_LT(rr.value("lifetime_fast_ps"), rr.value("lifetime_slow_ps"));
    }
  }
}

TEST(Fit, CovarianceSymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise(0.0, 0.02);
  auto data = sample(Family::damped_sinusoid, {1.0, 3.2, 0.1, 0.0}, 0.0, 10.0, 40);
  for (auto& y : data.y) y += noise(rng);
  const auto r = fit(initial_guess(FitModel::defaults(Family::damped_sinusoid), data), data);
  ASSERT_TRUE(r.converged);
  EXPECT_LT((r.covariance - r.covariance.transpose()).norm(), 1e-12 * r.covariance.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.covariance);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * eig.eigenvalues().maxCoeff());
  EXPECT_GE(r.reduced_chi2, 0.0);
}

// Empirical spread of the fitted lifetime over replicated noisy data sets.
double lifetime_spread(std::size_t n_points, int replicates, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 10.0);
  std::vector<double> values;
  for (int rep = 0; rep < replicates; ++rep) {
    auto data = sample(Family::mono_exp, {1000.0, 890.0, 0.0}, 0.0, 4000.0, n_points);
    for (auto& y : data.y) y += noise(rng);
    const auto r = fit(initial_guess(FitModel::defaults(Family::mono_exp), data), data);
    values.push_back(r.value("lifetime_ps"));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / double(values.size() - 1));
}

TEST(Fit, ErrorsScaleWithInverseRootN) {
  const double ratio = lifetime_spread(50, 400, 1) / lifetime_spread(200, 400, 2);
  EXPECT_NEAR(ratio, 2.0, 0.4);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 10.0);
  auto reported = [&](std::size_t n) {
    auto data = sample(Family::mono_exp, {1000.0, 890.0, 0.0}, 0.0, 4000.0, n);
    data.sigma.assign(n, 10.0);
    for (auto& y : data.y) y += noise(rng);
    return fit(initial_guess(FitModel::defaults(Family::mono_exp), data), data).error("lifetime_ps");
  };
  EXPECT_NEAR(reported(50) / reported(200), 2.0, 0.4);
}

TEST(Fit, ReparameterizationSanity) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 8.0);
  auto data = sample(Family::bi_exp, {800.0, 221.0, 200.0, 1000.0, 5.0}, 0.0, 5000.0, 200);
  for (auto& y : data.y) y += noise(rng);
  data.sigma.assign(data.x.size(), 8.0);
  const auto model = initial_guess(FitModel::defaults(Family::bi_exp), data);
  const auto base = fit(model, data);
  ASSERT_TRUE(base.converged);
  const double c = 37.5;
  auto scaled_data = data;
  for (auto& y : scaled_data.y) y *= c;
  for (auto& s : scaled_data.sigma) s *= c;
  auto scaled_model = model;
  for (std::size_t i = 0; i < scaled_model.parameters.size(); ++i) {
    if (is_amplitude(Family::bi_exp, i)) scaled_model.parameters[i].init *= c;
  }
  const auto scaled = fit(scaled_model, scaled_data);
  ASSERT_TRUE(scaled.converged);
  for (std::size_t i = 0; i < base.estimates.size(); ++i) {
    const double expected = is_amplitude(Family::bi_exp, i) ? c * base.estimates[i] : base.estimates[i];
    EXPECT_NEAR(scaled.estimates[i], expected, 1e-9 * std::max(std::abs(expected), 1.0)) << base.names[i];
  }
}

TEST(Fit, ZeroDataIsHandled) {
  FitData data;
  for (int i = 0; i < 50; ++i) {
    data.x.push_back(20.0 * i);
    data.y.push_back(0.0);
  }
  auto model = FitModel::defaults(Family::mono_exp).set("amplitude", 1.0).set("lifetime_ps", 300.0);
  const auto r = fit(model, data);
  EXPECT_NEAR(r.value("amplitude"), 0.0, 1e-9);
  EXPECT_FALSE(std::isfinite(r.error("lifetime_ps")) && r.error("lifetime_ps") < 1e6);
}

TEST(Fit, FixedAndBoundedParameters) {
  const auto data = sample(Family::mono_exp, {10.0, 100.0, 2.0}, 0.0, 500.0, 30);
  auto model = FitModel::defaults(Family::mono_exp).fix("offset", 0.0).bound("lifetime_ps", 1.0, 80.0);
  model.set("amplitude", 5.0).set("lifetime_ps", 50.0);
  const auto r = fit(model, data);
  EXPECT_EQ(r.value("offset"), 0.0);
  EXPECT_LE(r.value("lifetime_ps"), 80.0);
}

TEST(Fit, RejectsBadInput) {
  FitData tiny{{0.0, 1.0}, {1.0, 0.5}, {}};
  EXPECT_THROW(fit(FitModel::defaults(Family::mono_exp), tiny), std::invalid_argument);
  FitData bad{{0.0, 1.0, 2.0, 3.0}, {1.0, NAN, 0.2, 0.1}, {}};
  EXPECT_THROW(fit(FitModel::defaults(Family::mono_exp), bad), std::invalid_argument);
  auto model = FitModel::defaults(Family::mono_exp);
  model.parameters[1].name = "tau";
  EXPECT_THROW(model.validate(), std::invalid_argument);
  auto out_of_bounds = FitModel::defaults(Family::mono_exp).bound("lifetime_ps", 10.0, 20.0);
  EXPECT_THROW(out_of_bounds.validate(), std::invalid_argument);
}

// Exponential decay starting at t0, convolved with a Gaussian of width s.
double exgauss(double t, double t0, double tau, double s) {
  const double z = t - t0;
  return 0.5 * std::exp(s * s / (2 * tau * tau) - z / tau) * std::erfc((s / tau - z / s) / std::sqrt(2.0));
}

DecayTrace synthetic_trace(double tau_fast, double feeding_amp, double tau_slow, double jitter_fwhm, double peak_counts,
                           double dark, std::uint64_t seed) {
  DecayTrace tr;
  tr.excitation_ps = 2000.0;
  tr.jitter_fwhm_ps = jitter_fwhm;
  tr.poisson = true;
  const double s = jitter_fwhm / 2.3548200450309493;
  std::mt19937_64 rng(seed);
  for (double t = 0.0; t < 10000.0; t += 16.0) {
    const double mean =
        peak_counts * (exgauss(t, tr.excitation_ps, tau_fast, s) + feeding_amp * exgauss(t, tr.excitation_ps, tau_slow, s)) +
        dark;
    tr.t_ps.push_back(t);
    tr.counts.push_back(double(std::poisson_distribution<long>(mean)(rng)));
  }
  return tr;
}

TEST(FitLifetimes, ResonantWithFeedingBackground) {
  const auto tr = synthetic_trace(221.0, 0.3, 1000.0, 400.0, 5000.0, 20.0, 7);
  const auto r = fit_lifetimes(tr);
  EXPECT_EQ(r.family, Family::bi_exp);
  EXPECT_NEAR(r.lifetime_ps.value / 221.0, 1.0, 0.10);
  EXPECT_TRUE(r.reliable);
  EXPECT_NEAR(r.background, 20.0, 2.0);
}

TEST(FitLifetimes, OffResonantSelectsMono) {
  const auto tr = synthetic_trace(890.0, 0.0, 1000.0, 400.0, 5000.0, 20.0, 8);
  const auto r = fit_lifetimes(tr);
  EXPECT_EQ(r.family, Family::mono_exp);
  EXPECT_NEAR(r.lifetime_ps.value / 890.0, 1.0, 0.10);
  EXPECT_TRUE(r.reliable);
}

TEST(FitLifetimes, PureNoiseIsNotConfident) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto tr = synthetic_trace(221.0, 0.0, 1000.0, 400.0, 0.0, 50.0, seed);
    const auto r = fit_lifetimes(tr);
    EXPECT_FALSE(r.reliable) << "seed " << seed << " lifetime " << r.lifetime_ps.value;
  }
}

TEST(FitLifetimes, RequiresBaselineOrManualBackground) {
  auto tr = synthetic_trace(221.0, 0.0, 1000.0, 400.0, 5000.0, 20.0, 9);
  tr.excitation_ps = 0.0;
  EXPECT_THROW(fit_lifetimes(tr), std::invalid_argument);
  LifetimeFitOptions manual;
  manual.background = 20.0;
  EXPECT_NO_THROW(fit_lifetimes(tr, manual));
}

TEST(FitLifetimes, ForcedModes) {
  const auto tr = synthetic_trace(221.0, 0.3, 1000.0, 400.0, 5000.0, 20.0, 10);
  LifetimeFitOptions mono;
  mono.mode = LifetimeMode::mono;
  EXPECT_EQ(fit_lifetimes(tr, mono).family, Family::mono_exp);
  LifetimeFitOptions bi;
  bi.mode = LifetimeMode::bi;
  EXPECT_EQ(fit_lifetimes(tr, bi).family, Family::bi_exp);
}

}  // namespace
}  // namespace qdsps

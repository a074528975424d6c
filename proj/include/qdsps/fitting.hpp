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

#ifndef QDSPS_FITTING_HPP
#define QDSPS_FITTING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdsps/common.hpp"

namespace qdsps {

enum class Family { lorentzian_purcell, mono_exp, bi_exp, damped_sinusoid };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::lorentzian_purcell: return "lorentzian_purcell";
    case Family::mono_exp: return "mono_exp";
    case Family::bi_exp: return "bi_exp";
    case Family::damped_sinusoid: return "damped_sinusoid";
  }
  return "?";
}

inline Family family_from_name(const std::string& name) {
  for (Family f : {Family::lorentzian_purcell, Family::mono_exp, Family::bi_exp, Family::damped_sinusoid}) {
    if (name == family_name(f)) return f;
  }
  throw std::invalid_argument("unknown fit family '" + name + "'");
}

inline std::vector<std::string> parameter_names(Family f) {
  switch (f) {
    case Family::lorentzian_purcell: return {"amplitude", "purcell_factor", "gamma_c_ueV"};
    case Family::mono_exp: return {"amplitude", "lifetime_ps", "offset"};
    case Family::bi_exp: return {"amplitude_fast", "lifetime_fast_ps", "amplitude_slow", "lifetime_slow_ps", "offset"};
    case Family::damped_sinusoid: return {"amplitude", "theta_pi", "damping_per_rad", "offset"};
  }
  return {};
}

/// Whether the parameter scales the model linearly (used for reparameterization checks).
inline bool is_amplitude(Family f, std::size_t index) {
  switch (f) {
    case Family::lorentzian_purcell: return index == 0;
    case Family::mono_exp: return index == 0 || index == 2;
    case Family::bi_exp: return index == 0 || index == 2 || index == 4;
    case Family::damped_sinusoid: return index == 0 || index == 3;
  }
  return false;
}

namespace detail {

inline void check_arity(Family f, std::size_t n) {
  if (n != parameter_names(f).size()) {
    throw std::invalid_argument(std::string("wrong parameter count for ") + family_name(f));
  }
}

}  // namespace detail

/// Lorentzian:  A·F/(F+1+x²/γ²)
/// Mono:        A·exp(-t/T)+B
/// Bi:          A1·exp(-t/T1)+A2·exp(-t/T2)+B
/// Damped sine: A·(1-cos(πΘ/Θπ)·exp(-d·Θ))/2+B
inline double model_eval(Family f, const std::vector<double>& p, double x) {
  detail::check_arity(f, p.size());
  switch (f) {
    case Family::lorentzian_purcell: {
      const double u = x / p[2];
      return p[0] * p[1] / (p[1] + 1.0 + u * u);
    }
    case Family::mono_exp: return p[0] * std::exp(-x / p[1]) + p[2];
    case Family::bi_exp: return p[0] * std::exp(-x / p[1]) + p[2] * std::exp(-x / p[3]) + p[4];
    case Family::damped_sinusoid:
      return 0.5 * p[0] * (1.0 - std::cos(kPi * x / p[1]) * std::exp(-p[2] * x)) + p[3];
  }
  return 0.0;
}

/// ∂model/∂p at x.
inline std::vector<double> model_gradient(Family f, const std::vector<double>& p, double x) {
  detail::check_arity(f, p.size());
  switch (f) {
    case Family::lorentzian_purcell: {
      const double u2 = (x / p[2]) * (x / p[2]);
      const double d = p[1] + 1.0 + u2;
      return {p[1] / d, p[0] * (1.0 + u2) / (d * d), 2.0 * p[0] * p[1] * u2 / (p[2] * d * d)};
    }
    case Family::mono_exp: {
      const double e = std::exp(-x / p[1]);
      return {e, p[0] * e * x / (p[1] * p[1]), 1.0};
    }
    case Family::bi_exp: {
      const double e1 = std::exp(-x / p[1]);
      const double e2 = std::exp(-x / p[3]);
      return {e1, p[0] * e1 * x / (p[1] * p[1]), e2, p[2] * e2 * x / (p[3] * p[3]), 1.0};
    }
    case Family::damped_sinusoid: {
      const double u = kPi * x / p[1];
      const double e = std::exp(-p[2] * x);
      const double c = std::cos(u);
      return {0.5 * (1.0 - c * e), -0.5 * p[0] * std::sin(u) * e * kPi * x / (p[1] * p[1]), 0.5 * p[0] * c * e * x, 1.0};
    }
  }
  return {};
}

struct Parameter {
  std::string name;
  double init = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool fixed = false;
};

struct FitModel {
  Family family = Family::mono_exp;
  std::vector<Parameter> parameters;

  static FitModel defaults(Family f) {
    const double inf = std::numeric_limits<double>::infinity();
    FitModel m{f, {}};
    for (const auto& n : parameter_names(f)) m.parameters.push_back({n, 0.0, -inf, inf, false});
    switch (f) {
      case Family::lorentzian_purcell:
        m.parameters[0].init = 1.0;
        m.parameters[1] = {"purcell_factor", 1.0, 0.0, inf, false};
        m.parameters[2] = {"gamma_c_ueV", 233.0, 1e-9, inf, true};
        break;
      case Family::mono_exp:
        m.parameters[1] = {"lifetime_ps", 1.0, 1e-9, inf, false};
        break;
      case Family::bi_exp:
        m.parameters[1] = {"lifetime_fast_ps", 1.0, 1e-9, inf, false};
        m.parameters[3] = {"lifetime_slow_ps", 2.0, 1e-9, inf, false};
        break;
      case Family::damped_sinusoid:
        m.parameters[1] = {"theta_pi", kPi, 1e-9, inf, false};
        m.parameters[2] = {"damping_per_rad", 0.0, 0.0, inf, false};
        break;
    }
    return m;
  }

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < parameters.size(); ++i) {
      if (parameters[i].name == name) return i;
    }
    throw std::invalid_argument("no parameter '" + name + "' in " + family_name(family));
  }

  Parameter& operator[](const std::string& name) { return parameters[index(name)]; }
  const Parameter& operator[](const std::string& name) const { return parameters[index(name)]; }

  FitModel& set(const std::string& name, double init) {
    (*this)[name].init = init;
    return *this;
  }
  FitModel& fix(const std::string& name, double value) {
    (*this)[name].init = value;
    (*this)[name].fixed = true;
    return *this;
  }
  FitModel& bound(const std::string& name, double lo, double hi) {
    (*this)[name].lo = lo;
    (*this)[name].hi = hi;
    return *this;
  }

  std::vector<double> initial() const {
    std::vector<double> p;
    for (const auto& q : parameters) p.push_back(q.init);
    return p;
  }

  std::size_t n_free() const {
    return std::size_t(std::count_if(parameters.begin(), parameters.end(), [](const Parameter& q) { return !q.fixed; }));
  }

  void validate() const {
    const auto names = parameter_names(family);
    require(parameters.size() == names.size(), std::string("wrong parameter count for ") + family_name(family));
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& q = parameters[i];
      require(q.name == names[i], "parameter " + std::to_string(i) + " of " + family_name(family) + " must be '" +
                                      names[i] + "'");
      require(std::isfinite(q.init), "initial value of '" + q.name + "' must be finite");
      require(!(q.lo > q.hi), "bounds of '" + q.name + "' are inverted");
      require(q.init >= q.lo && q.init <= q.hi, "initial value of '" + q.name + "' lies outside its bounds");
    }
  }
};

struct FitData {
  std::vector<double> x;
  std::vector<double> y;
  /// Per-point standard deviations; empty means unit weights with the
  /// covariance rescaled by the reduced chi-square.
  std::vector<double> sigma;
};

struct FitOptions {
  int max_iterations = 1000;
  double cost_tolerance = 1e-10;
  double gradient_tolerance = 1e-10;
  double lambda0 = 1e-3;
};

struct FitResult {
  Family family = Family::mono_exp;
  std::vector<std::string> names;
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::vector<bool> fixed;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  std::vector<double> residuals;
  bool converged = false;
  int n_iterations = 0;
  std::size_t n_points = 0;
  bool weighted = false;
  std::string message;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw std::invalid_argument("no parameter '" + name + "' in fit result");
  }
  double value(const std::string& name) const { return estimates[index(name)]; }
  double error(const std::string& name) const { return std_errors[index(name)]; }

  std::size_t n_free() const { return std::size_t(std::count(fixed.begin(), fixed.end(), false)); }

  /// Small-sample corrected Akaike criterion, from chi-square when weighted and
  /// from the residual sum of squares otherwise.
  double aicc() const {
    const double n = double(n_points);
    const double k = double(n_free());
    const double fit_term = weighted ? chi2 : n * std::log(std::max(chi2, std::numeric_limits<double>::min()) / n);
    const double correction = (n - k - 1.0) > 0.0 ? 2.0 * k * (k + 1.0) / (n - k - 1.0)
                                                   : std::numeric_limits<double>::infinity();
    return fit_term + 2.0 * k + correction;
  }
};

namespace detail {

inline void order_bi_exp(FitResult& r) {
  if (r.family != Family::bi_exp || !(r.estimates[1] > r.estimates[3])) return;
  const int perm[5] = {2, 3, 0, 1, 4};
  auto permute = [&](auto& v) {
    auto copy = v;
    for (int i = 0; i < 5; ++i) v[std::size_t(i)] = copy[std::size_t(perm[i])];
  };
  permute(r.estimates);
  permute(r.std_errors);
  std::vector<bool> fixed_copy = r.fixed;
  for (int i = 0; i < 5; ++i) r.fixed[std::size_t(i)] = fixed_copy[std::size_t(perm[i])];
  Eigen::MatrixXd c = r.covariance;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) r.covariance(i, j) = c(perm[i], perm[j]);
  }
}

}  // namespace detail

/// Levenberg–Marquardt with Marquardt diagonal scaling. Bounds are enforced by
/// clamping each trial step; fixed parameters never move.
/// Eval: double(const std::vector<double>& p, double x).
/// Gradient: std::vector<double>(const std::vector<double>& p, double x).
template <class Eval, class Gradient>
FitResult least_squares(const std::vector<Parameter>& parameters, Eval&& eval, Gradient&& gradient, const FitData& data,
                        const FitOptions& options = {}) {
  for (const auto& q : parameters) {
    require(std::isfinite(q.init), "initial value of '" + q.name + "' must be finite");
    require(!(q.lo > q.hi), "bounds of '" + q.name + "' are inverted");
    require(q.init >= q.lo && q.init <= q.hi, "initial value of '" + q.name + "' lies outside its bounds");
  }
  const std::size_t n = data.x.size();
  require(data.y.size() == n, "x and y must have equal length");
  require(data.sigma.empty() || data.sigma.size() == n, "sigma must be empty or match the data length");
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(data.x[i]) && std::isfinite(data.y[i]), "fit data must be finite");
    if (!data.sigma.empty()) require(std::isfinite(data.sigma[i]) && data.sigma[i] > 0.0, "sigma must be positive");
  }
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    if (!parameters[i].fixed) free.push_back(i);
  }
  const std::size_t k = free.size();
  require(n >= std::max<std::size_t>(k, 1), "fewer data points than free parameters");

  std::vector<double> p;
  for (const auto& q : parameters) p.push_back(q.init);
  auto weight = [&](std::size_t i) { return data.sigma.empty() ? 1.0 : 1.0 / data.sigma[i]; };

  auto residuals = [&](const std::vector<double>& q, Eigen::VectorXd& r) {
    r.resize(Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) r(Eigen::Index(i)) = (data.y[i] - eval(q, data.x[i])) * weight(i);
  };
  auto jacobian = [&](const std::vector<double>& q, Eigen::MatrixXd& jac) {
    jac.resize(Eigen::Index(n), Eigen::Index(k));
    for (std::size_t i = 0; i < n; ++i) {
      const auto grad = gradient(q, data.x[i]);
      for (std::size_t j = 0; j < k; ++j) jac(Eigen::Index(i), Eigen::Index(j)) = grad[free[j]] * weight(i);
    }
  };

  FitResult out;
  out.n_points = n;
  out.weighted = !data.sigma.empty();
  for (const auto& q : parameters) {
    out.names.push_back(q.name);
    out.fixed.push_back(q.fixed);
  }

  Eigen::VectorXd r, r_trial;
  Eigen::MatrixXd jac;
  residuals(p, r);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw std::invalid_argument("model is not finite at the initial parameters");
  double lambda = options.lambda0;
  int iter = 0;
  bool converged = k == 0;
  std::string message = k == 0 ? "no free parameters" : "iteration limit reached";

  while (!converged && iter < options.max_iterations) {
    ++iter;
    jacobian(p, jac);
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    if (!g.allFinite()) {
      message = "non-finite gradient";
      break;
    }
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      converged = true;
      message = "gradient below tolerance";
      break;
    }
    const double diag_floor = std::max(a.diagonal().maxCoeff(), 1.0) * 1e-14;
    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index j = 0; j < Eigen::Index(k); ++j) damped(j, j) += lambda * std::max(a(j, j), diag_floor);
      const Eigen::VectorXd delta = damped.ldlt().solve(g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> trial = p;
      for (std::size_t j = 0; j < k; ++j) {
        const auto& q = parameters[free[j]];
        trial[free[j]] = std::clamp(p[free[j]] + delta(Eigen::Index(j)), q.lo, q.hi);
      }
      residuals(trial, r_trial);
      const double trial_cost = r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double change = cost - trial_cost;
        const bool stalled = trial == p;
        p = std::move(trial);
        r = r_trial;
        const double old_cost = cost;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (stalled || change <= options.cost_tolerance * std::max(old_cost, std::numeric_limits<double>::min()) ||
            cost == 0.0) {
          converged = true;
          message = "relative cost change below tolerance";
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No damped step lowers the cost: the current point is a minimum to
      // working precision along every direction the solver can resolve.
      converged = true;
      message = "no step reduces the cost";
      break;
    }
  }

  out.estimates = p;
  out.n_iterations = iter;
  out.converged = converged;
  out.message = message;
  out.chi2 = cost;
  const double dof = double(n > k ? n - k : 1);
  out.reduced_chi2 = cost / dof;
  out.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.residuals[i] = data.y[i] - eval(p, data.x[i]);

  const std::size_t m = parameters.size();
  out.covariance = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
  out.std_errors.assign(m, 0.0);
  if (k > 0) {
    jacobian(p, jac);
    const Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min()) * 1e-12 * double(k);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(Eigen::Index(k), Eigen::Index(k));
    std::vector<bool> unidentifiable(k, false);
    for (Eigen::Index e = 0; e < ev.size(); ++e) {
      const Eigen::VectorXd v = eig.eigenvectors().col(e);
      if (ev(e) > cutoff) {
        cov += v * v.transpose() / ev(e);
      } else {
        for (std::size_t j = 0; j < k; ++j) {
          if (std::abs(v(Eigen::Index(j))) > 1e-8) unidentifiable[j] = true;
        }
      }
    }
    const double scale = out.weighted ? 1.0 : out.reduced_chi2;
    cov *= scale;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t a_i = 0; a_i < k; ++a_i) {
      for (std::size_t b_i = 0; b_i < k; ++b_i) {
        double c = cov(Eigen::Index(a_i), Eigen::Index(b_i));
        if (unidentifiable[a_i] || unidentifiable[b_i]) c = a_i == b_i ? inf : 0.0;
        out.covariance(Eigen::Index(free[a_i]), Eigen::Index(free[b_i])) = c;
      }
      out.std_errors[free[a_i]] = std::sqrt(out.covariance(Eigen::Index(free[a_i]), Eigen::Index(free[a_i])));
    }
  }
  return out;
}

inline FitResult fit(const FitModel& model, const FitData& data, const FitOptions& options = {}) {
  model.validate();
  const Family f = model.family;
  FitResult out = least_squares(
      model.parameters, [f](const std::vector<double>& p, double x) { return model_eval(f, p, x); },
      [f](const std::vector<double>& p, double x) { return model_gradient(f, p, x); }, data, options);
  out.family = f;
  detail::order_bi_exp(out);
  return out;
}

namespace detail {

/// Least-squares line through (x, log y) over points with y > 0.
inline std::optional<std::pair<double, double>> log_linear(const std::vector<double>& x, const std::vector<double>& y,
                                                          std::size_t begin, std::size_t end) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = begin; i < end; ++i) {
    if (!(y[i] > 0.0)) continue;
    const double ly = std::log(y[i]);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
    ++m;
  }
  if (m < 2) return std::nullopt;
  const double det = m * sxx - sx * sx;
  if (!(std::abs(det) > 0.0)) return std::nullopt;
  const double slope = (m * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / m;
  return std::make_pair(slope, intercept);
}

}  // namespace detail

/// Data-driven starting values, keeping any parameters the caller fixed.
inline FitModel initial_guess(FitModel model, const FitData& data) {
  const auto& x = data.x;
  const auto& y = data.y;
  require(!x.empty() && x.size() == y.size(), "initial guess needs data");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  auto put = [&](const std::string& name, double v) {
    auto& q = model[name];
    if (q.fixed || !std::isfinite(v)) return;
    q.init = std::clamp(v, q.lo, q.hi);
  };
  const std::size_t peak = std::size_t(std::max_element(ys.begin(), ys.end()) - ys.begin());
  const double y_max = ys[peak];

  switch (model.family) {
    case Family::lorentzian_purcell: {
      // Half-maximum half-width w satisfies w²/γ² = F + 1.
      const double gamma = model["gamma_c_ueV"].init;
      double width = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (ys[i] >= 0.5 * y_max) width = std::max(width, std::abs(xs[i] - xs[peak]));
      }
      const double f = std::max((width / gamma) * (width / gamma) - 1.0, 0.1);
      put("purcell_factor", f);
      put("amplitude", y_max * (model["purcell_factor"].init + 1.0) / model["purcell_factor"].init);
      break;
    }
    case Family::mono_exp: {
      const std::size_t tail = std::max<std::size_t>(n / 10, 1);
      double offset = 0.0;
      if (!model["offset"].fixed) {
        for (std::size_t i = n - tail; i < n; ++i) offset += ys[i];
        offset /= double(tail);
        offset = std::min(offset, *std::min_element(ys.begin() + std::ptrdiff_t(peak), ys.end()));
      } else {
        offset = model["offset"].init;
      }
      put("offset", offset);
      std::vector<double> shifted(n);
      for (std::size_t i = 0; i < n; ++i) shifted[i] = ys[i] - offset;
      if (auto line = detail::log_linear(xs, shifted, peak, n); line && line->first < 0.0) {
        put("lifetime_ps", -1.0 / line->first);
        put("amplitude", std::exp(line->second));
      } else {
        put("lifetime_ps", std::max((xs.back() - xs.front()) / 3.0, 1e-6));
        put("amplitude", y_max - offset);
      }
      break;
    }
    case Family::bi_exp: {
      const double offset = model["offset"].fixed ? model["offset"].init : 0.0;
      std::vector<double> shifted(n);
      for (std::size_t i = 0; i < n; ++i) shifted[i] = ys[i] - offset;
      const std::size_t mid = peak + (n - peak) / 2;
      double t_slow = std::max((xs.back() - xs.front()) / 2.0, 1e-6), a_slow = 0.5 * y_max;
      if (auto line = detail::log_linear(xs, shifted, mid, n); line && line->first < 0.0) {
        t_slow = -1.0 / line->first;
        a_slow = std::exp(line->second);
      }
      std::vector<double> fast(n);
      for (std::size_t i = 0; i < n; ++i) fast[i] = shifted[i] - a_slow * std::exp(-xs[i] / t_slow);
      double t_fast = t_slow / 4.0, a_fast = std::max(y_max - a_slow, 0.5 * y_max);
      const std::size_t early_end = std::max(peak + 2, peak + (mid - peak) / 2);
      if (auto line = detail::log_linear(xs, fast, peak, std::min(early_end, n)); line && line->first < 0.0) {
        const double candidate = -1.0 / line->first;
        if (candidate < t_slow) {
          t_fast = candidate;
          a_fast = std::exp(line->second);
        }
      }
      put("lifetime_fast_ps", t_fast);
      put("amplitude_fast", a_fast);
      put("lifetime_slow_ps", t_slow);
      put("amplitude_slow", a_slow);
      put("offset", offset);
      break;
    }
    case Family::damped_sinusoid: {
      const double baseline = ys.front();
      put("offset", baseline);
      // First local maximum that reaches at least half the full swing.
      std::size_t first = peak;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (ys[i] >= ys[i - 1] && ys[i] >= ys[i + 1] && ys[i] - baseline >= 0.5 * (y_max - baseline)) {
          first = i;
          break;
        }
      }
      if (xs[first] > 0.0) put("theta_pi", xs[first]);
      put("amplitude", ys[first] - baseline);
      put("damping_per_rad", 0.0);
      break;
    }
  }
  return model;
}

/// Time-resolved photoluminescence histogram.
struct DecayTrace {
  std::vector<double> t_ps;
  std::vector<double> counts;
  /// Arrival time of the excitation pulse.
  double excitation_ps = 0.0;
  /// Detector timing FWHM, used for the default fit-window offset.
  double jitter_fwhm_ps = 0.0;
  /// Counts are Poisson samples (weights from sqrt(counts)).
  bool poisson = false;
};

enum class LifetimeMode { automatic, mono, bi };

struct LifetimeFitOptions {
  LifetimeMode mode = LifetimeMode::automatic;
  /// Manual background; when unset, the mean over the pre-pulse region is used.
  std::optional<double> background;
  /// Points earlier than excitation - guard belong to the baseline region.
  std::optional<double> baseline_guard_ps;
  /// Fit window starts this long after the peak; defaults to 0.75 jitter FWHM.
  std::optional<double> start_after_peak_ps;
  /// AICc advantage the biexponential needs in automatic mode.
  double aicc_margin = 10.0;
  FitOptions fit;
};

struct LifetimeFit {
  FitResult result;
  Family family = Family::mono_exp;
  /// Fast lifetime (bi) or the only lifetime (mono).
  Estimate lifetime_ps;
  std::optional<Estimate> slow_lifetime_ps;
  double background = 0.0;
  double window_start_ps = 0.0;
  double aicc_mono = std::numeric_limits<double>::quiet_NaN();
  double aicc_bi = std::numeric_limits<double>::quiet_NaN();
  /// Converged, significant amplitude, finite and well-determined lifetime.
  bool reliable = false;
};

namespace detail {

inline bool significant(const FitResult& r, const std::string& amplitude, const std::string& lifetime) {
  const double a = r.value(amplitude), sa = r.error(amplitude);
  const double t = r.value(lifetime), st = r.error(lifetime);
  return r.converged && a > 0.0 && std::isfinite(sa) && a > 3.0 * sa && std::isfinite(st) && st < 0.5 * t;
}

}  // namespace detail

/// Background-subtracted mono/bi-exponential lifetime fit.
inline LifetimeFit fit_lifetimes(const DecayTrace& trace, const LifetimeFitOptions& options = {}) {
  const std::size_t n = trace.t_ps.size();
  require(n == trace.counts.size(), "trace times and counts differ in length");
  require(n >= 8, "trace too short for a lifetime fit");
  require(std::is_sorted(trace.t_ps.begin(), trace.t_ps.end()), "trace times must be ascending");

  LifetimeFit out;
  if (options.background) {
    out.background = *options.background;
  } else {
    const double guard = options.baseline_guard_ps.value_or(2.0 * trace.jitter_fwhm_ps);
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n && trace.t_ps[i] < trace.excitation_ps - guard; ++i) {
      sum += trace.counts[i];
      ++m;
    }
    if (m < 3) {
      throw std::invalid_argument("trace has no pre-pulse baseline region; supply the background manually");
    }
    out.background = sum / double(m);
  }

  const std::size_t peak =
      std::size_t(std::max_element(trace.counts.begin(), trace.counts.end()) - trace.counts.begin());
  out.window_start_ps = trace.t_ps[peak] + options.start_after_peak_ps.value_or(0.75 * trace.jitter_fwhm_ps);
  FitData data;
  const double t0 = out.window_start_ps;
  for (std::size_t i = 0; i < n; ++i) {
    if (trace.t_ps[i] < t0) continue;
    data.x.push_back(trace.t_ps[i] - t0);
    data.y.push_back(trace.counts[i] - out.background);
    if (trace.poisson) data.sigma.push_back(std::sqrt(std::max(trace.counts[i], 1.0)));
  }
  require(data.x.size() >= 8, "too few points after the fit-window start");

  // Lifetimes shorter than the sampling step are not resolvable.
  double spacing = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < data.x.size(); ++i) spacing = std::min(spacing, data.x[i] - data.x[i - 1]);
  const double inf = std::numeric_limits<double>::infinity();

  auto base_model = [&](Family f) {
    FitModel m = FitModel::defaults(f);
    m.fix("offset", 0.0);
    if (f == Family::mono_exp) {
      m.bound("amplitude", 0.0, inf).bound("lifetime_ps", spacing, inf);
    } else {
      m.bound("amplitude_fast", 0.0, inf).bound("amplitude_slow", 0.0, inf);
      m.bound("lifetime_fast_ps", spacing, inf).bound("lifetime_slow_ps", spacing, inf);
    }
    return initial_guess(m, data);
  };

  FitResult mono = fit(base_model(Family::mono_exp), data, options.fit);

  // The biexponential surface has collapsed-component minima; start from the
  // heuristic guess and from a few fast/slow splits around the mono lifetime.
  auto fit_bi = [&]() {
    std::vector<FitModel> starts{base_model(Family::bi_exp)};
    const double t_mono = mono.value("lifetime_ps");
    const double a_mono = mono.value("amplitude");
    for (double fraction : {0.15, 0.3, 0.5}) {
      FitModel m = base_model(Family::bi_exp);
      m.set("lifetime_fast_ps", std::max(fraction * t_mono, spacing)).set("amplitude_fast", a_mono);
      m.set("lifetime_slow_ps", std::max(1.5 * t_mono, spacing)).set("amplitude_slow", 0.3 * a_mono);
      starts.push_back(m);
    }
    std::optional<FitResult> best;
    for (const auto& m : starts) {
      FitResult r = fit(m, data, options.fit);
      if (!best || (r.converged && !best->converged) || (r.converged == best->converged && r.chi2 < best->chi2)) {
        best = std::move(r);
      }
    }
    return *best;
  };

  std::optional<FitResult> bi;
  if (options.mode != LifetimeMode::mono) bi = fit_bi();
  out.aicc_mono = mono.aicc();
  if (bi) out.aicc_bi = bi->aicc();

  bool use_bi = options.mode == LifetimeMode::bi;
  if (options.mode == LifetimeMode::automatic) {
    const bool distinct = bi->value("lifetime_slow_ps") > 1.5 * bi->value("lifetime_fast_ps");
    use_bi = bi->converged && out.aicc_bi < out.aicc_mono - options.aicc_margin && distinct &&
             detail::significant(*bi, "amplitude_fast", "lifetime_fast_ps") &&
             detail::significant(*bi, "amplitude_slow", "lifetime_slow_ps");
  }
  if (use_bi) {
    out.family = Family::bi_exp;
    out.result = *bi;
    out.lifetime_ps = {bi->value("lifetime_fast_ps"), bi->error("lifetime_fast_ps")};
    out.slow_lifetime_ps = Estimate{bi->value("lifetime_slow_ps"), bi->error("lifetime_slow_ps")};
    out.reliable = detail::significant(*bi, "amplitude_fast", "lifetime_fast_ps");
  } else {
    out.family = Family::mono_exp;
    out.result = mono;
    out.lifetime_ps = {mono.value("lifetime_ps"), mono.error("lifetime_ps")};
    out.reliable = detail::significant(mono, "amplitude", "lifetime_ps");
  }
  return out;
}

}  // namespace qdsps

#endif  // QDSPS_FITTING_HPP

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

#ifndef QDSPS_PHOTON_STATS_HPP
#define QDSPS_PHOTON_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdsps/click_stream.hpp"
#include "qdsps/common.hpp"
#include "qdsps/csv.hpp"
#include "qdsps/fitting.hpp"
#include "qdsps/random.hpp"

namespace qdsps {

/// 50:50 beam splitter: each click of a single-channel stream goes to A or B.
inline ClickStream split_hbt(const ClickStream& in, std::uint64_t seed) {
  in.validate();
  if (in.two_channel()) throw std::invalid_argument("click stream is already split into channels A and B");
  ClickStream out = in;
  out.channels = "AB";
  Rng rng = make_stream(seed, 0x5b11ULL);
  for (auto& e : out.events) e.channel = uniform01(rng) < 0.5 ? 'A' : 'B';
  return out;
}

struct HistogramOptions {
  double bin_width_ps = 64.0;
  double max_delay_ps = 0.0;
  unsigned threads = 1;

  void validate() const {
    require_positive(bin_width_ps, "bin_width_ps");
    require_positive(max_delay_ps, "max_delay_ps");
  }
};

/// Start-stop coincidences in bins of τ = t_B - t_A centred on k·bin_width.
struct Histogram {
  double bin_width_ps = 0.0;
  double max_delay_ps = 0.0;
  std::int64_t half_bins = 0;
  std::vector<std::int64_t> counts;

  double tau(std::size_t i) const { return double(std::int64_t(i) - half_bins) * bin_width_ps; }
  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

namespace detail {

inline void split_channels(const ClickStream& s, std::vector<std::int64_t>& a, std::vector<std::int64_t>& b) {
  for (const auto& e : s.events) (e.channel == 'A' ? a : b).push_back(e.timestamp_ps);
}

}  // namespace detail

/// All A–B pairs with |τ| <= max_delay, binned by round(τ/bin_width).
inline Histogram correlate(const ClickStream& stream, const HistogramOptions& opt) {
  opt.validate();
  stream.validate();
  if (!stream.two_channel()) throw std::invalid_argument("correlation needs a two-channel (A/B) click stream");
  std::vector<std::int64_t> a, b;
  detail::split_channels(stream, a, b);
  Histogram h;
  h.bin_width_ps = opt.bin_width_ps;
  h.max_delay_ps = opt.max_delay_ps;
  h.half_bins = std::int64_t(std::ceil(opt.max_delay_ps / opt.bin_width_ps));
  require(h.half_bins < (std::int64_t(1) << 26), "too many histogram bins");
  const std::size_t n_bins = std::size_t(2 * h.half_bins + 1);

  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(opt.threads, a.size() / 1024 + 1));
  std::vector<std::vector<std::int64_t>> partial(shards, std::vector<std::int64_t>(n_bins, 0));
  parallel_for(shards, opt.threads, [&](std::size_t s) {
    const std::size_t begin = a.size() * s / shards, end = a.size() * (s + 1) / shards;
    if (begin == end) return;
    auto& hist = partial[s];
    const double lo_delay = -opt.max_delay_ps;
    std::size_t lo = std::size_t(std::lower_bound(b.begin(), b.end(), a[begin] + std::int64_t(std::floor(lo_delay))) -
                                 b.begin());
    for (std::size_t i = begin; i < end; ++i) {
      const std::int64_t ta = a[i];
      while (lo < b.size() && double(b[lo] - ta) < lo_delay) ++lo;
      for (std::size_t j = lo; j < b.size(); ++j) {
        const double tau = double(b[j] - ta);
        if (tau > opt.max_delay_ps) break;
        const auto k = std::int64_t(std::round(tau / opt.bin_width_ps));
        ++hist[std::size_t(k + h.half_bins)];
      }
    }
  });
  h.counts.assign(n_bins, 0);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < n_bins; ++i) h.counts[i] += p[i];
  }
  return h;
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "tau_ps,counts\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) os << format_number(h.tau(i)) << ',' << h.counts[i] << '\n';
}

struct PeakOptions {
  int n_side_peaks = 10;
  /// Integration window per peak; defaults to the repetition period.
  std::optional<double> window_ps;
};

struct PeakArea {
  int index = 0;
  double area = 0.0;
};

struct G2Estimate {
  double g2 = 0.0;
  double error = 0.0;
  double central_area = 0.0;
  double mean_side_area = 0.0;
  double window_ps = 0.0;
  double rep_period_ps = 0.0;
  std::vector<PeakArea> side_peaks;
};

/// Sum of bins with centres in [m·T - w/2, m·T + w/2).
inline double peak_area(const Histogram& h, int m, double rep_period_ps, double window_ps) {
  const double lo = m * rep_period_ps - 0.5 * window_ps, hi = m * rep_period_ps + 0.5 * window_ps;
  double sum = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double t = h.tau(i);
    if (t >= lo && t < hi) sum += double(h.counts[i]);
  }
  return sum;
}

/// g²(0) as the central-peak area over the mean of the ±1..±n side peaks.
inline G2Estimate g2_zero(const Histogram& h, double rep_period_ps, const PeakOptions& opt = {}) {
  require_positive(rep_period_ps, "rep_period_ps");
  require(opt.n_side_peaks >= 1, "n_side_peaks must be >= 1");
  const double w = opt.window_ps.value_or(rep_period_ps);
  require(w > 0.0 && w <= rep_period_ps, "peak window must lie in (0, rep_period]");
  const double reach = double(h.half_bins) * h.bin_width_ps + 0.5 * h.bin_width_ps;
  if (opt.n_side_peaks * rep_period_ps + 0.5 * w > reach) {
    throw std::invalid_argument("histogram range too short for " + std::to_string(opt.n_side_peaks) +
                                " side peaks on each side");
  }
  G2Estimate out;
  out.window_ps = w;
  out.rep_period_ps = rep_period_ps;
  out.central_area = peak_area(h, 0, rep_period_ps, w);
  double sum = 0.0;
  for (int k = -opt.n_side_peaks; k <= opt.n_side_peaks; ++k) {
    if (k == 0) continue;
    const double area = peak_area(h, k, rep_period_ps, w);
    out.side_peaks.push_back({k, area});
    sum += area;
  }
  const double n = double(out.side_peaks.size());
  out.mean_side_area = sum / n;
  if (!(out.mean_side_area > 0.0)) throw std::domain_error("side peaks are empty; g2(0) is undefined");
  out.g2 = out.central_area / out.mean_side_area;
  const double s2 = out.mean_side_area * out.mean_side_area;
  out.error = std::sqrt(std::max(out.central_area, 1.0) / s2 + out.central_area * out.central_area * sum / (n * n * s2 * s2));
  return out;
}

/// A(k) = A∞·(1 + c·exp(-|k|/k0)) fitted to the side peaks.
struct EnvelopeFit {
  FitResult result;
  double a_inf = 0.0;
  double contrast = 0.0;
  double k0 = 0.0;
  /// Central area over the envelope extrapolated to k = 0.
  double g2_corrected = 0.0;
  double g2_corrected_error = 0.0;
};

inline EnvelopeFit side_peak_envelope(const G2Estimate& g2, const FitOptions& options = {}) {
  require(g2.side_peaks.size() >= 4, "envelope fit needs at least 4 side peaks");
  FitData data;
  int k_max = 0;
  for (const auto& p : g2.side_peaks) {
    data.x.push_back(std::abs(double(p.index)));
    data.y.push_back(p.area);
    data.sigma.push_back(std::sqrt(std::max(p.area, 1.0)));
    k_max = std::max(k_max, std::abs(p.index));
  }
  double outer = 0.0, inner = 0.0;
  int n_outer = 0, n_inner = 0;
  for (const auto& p : g2.side_peaks) {
    if (std::abs(p.index) == k_max) outer += p.area, ++n_outer;
    if (std::abs(p.index) == 1) inner += p.area, ++n_inner;
  }
  outer /= std::max(n_outer, 1);
  inner /= std::max(n_inner, 1);
  const double inf = std::numeric_limits<double>::infinity();
  const double a0 = std::max(outer, 1e-12);
  std::vector<Parameter> params{{"a_inf", a0, 0.0, inf, false},
                                {"contrast", std::clamp(inner / a0 - 1.0, 1e-3, 1e3), 0.0, 1e6, false},
                                {"k0", 1.0, 1e-3, 1e6, false}};
  auto eval = [](const std::vector<double>& p, double k) { return p[0] * (1.0 + p[1] * std::exp(-k / p[2])); };
  auto grad = [](const std::vector<double>& p, double k) {
    const double e = std::exp(-k / p[2]);
    return std::vector<double>{1.0 + p[1] * e, p[0] * e, p[0] * p[1] * e * k / (p[2] * p[2])};
  };
  EnvelopeFit out;
  out.result = least_squares(params, eval, grad, data, options);
  out.a_inf = out.result.estimates[0];
  out.contrast = out.result.estimates[1];
  out.k0 = out.result.estimates[2];
  const double denom = out.a_inf * (1.0 + out.contrast);
  if (!(denom > 0.0)) throw std::domain_error("side-peak envelope extrapolates to zero at k = 0");
  out.g2_corrected = g2.central_area / denom;
  // Variance of A∞(1+c) from the fit covariance, plus Poisson noise on the central area.
  const auto& cov = out.result.covariance;
  const double da = 1.0 + out.contrast, dc = out.a_inf;
  double var_denom = da * da * cov(0, 0) + dc * dc * cov(1, 1) + 2.0 * da * dc * cov(0, 1);
  if (!std::isfinite(var_denom)) var_denom = 0.0;
  out.g2_corrected_error = std::sqrt(std::max(g2.central_area, 1.0) / (denom * denom) +
                                     out.g2_corrected * out.g2_corrected * var_denom / (denom * denom));
  return out;
}

inline nlohmann::json g2_report(const G2Estimate& g2, const std::optional<EnvelopeFit>& envelope = std::nullopt) {
  nlohmann::json j;
  j["g2"] = g2.g2;
  j["error"] = g2.error;
  j["central_area"] = g2.central_area;
  j["mean_side_area"] = g2.mean_side_area;
  j["window_ps"] = g2.window_ps;
  j["rep_period_ps"] = g2.rep_period_ps;
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& p : g2.side_peaks) peaks.push_back({{"index", p.index}, {"area", p.area}});
  j["peak_areas"] = peaks;
  if (envelope) {
    const auto& e = *envelope;
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j["g2_blinking_corrected"] = e.g2_corrected;
    j["g2_blinking_corrected_error"] = e.g2_corrected_error;
    j["envelope_fit"] = {{"a_inf", e.a_inf},
                         {"a_inf_error", finite_or_null(e.result.std_errors[0])},
                         {"contrast", e.contrast},
                         {"contrast_error", finite_or_null(e.result.std_errors[1])},
                         {"k0", e.k0},
                         {"k0_error", finite_or_null(e.result.std_errors[2])},
                         {"reduced_chi2", e.result.reduced_chi2},
                         {"converged", e.result.converged}};
  }
  return j;
}

}  // namespace qdsps

#endif  // QDSPS_PHOTON_STATS_HPP

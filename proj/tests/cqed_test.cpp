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
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "qdsps/cqed.hpp"

namespace qdsps {
namespace {

// Reference numbers below were computed by hand-written double-precision
// arithmetic outside the library and frozen here.
constexpr double kVModeForF32 = 141.29555687622886;
constexpr double kEtaExtFourMicron = 0.6796601699150424;

TEST(PurcellMax, InversionOfModeVolume) {
  EXPECT_NEAR(mode_volume_for_purcell(5950.0, 3.2), kVModeForF32, 1e-9);
  EXPECT_NEAR(purcell_max(5950.0, 894.0, 3.5, kVModeForF32), 3.2, 1e-12);
}

TEST(PurcellMax, LinearInQInverseInVolume) {
  const double f = purcell_max(5950.0, 894.0, 3.5, 141.3);
  EXPECT_DOUBLE_EQ(purcell_max(2 * 5950.0, 894.0, 3.5, 141.3), 2 * f);
  EXPECT_DOUBLE_EQ(purcell_max(5950.0, 894.0, 3.5, 2 * 141.3), f / 2);
}

TEST(PurcellMax, CubicMicronUnits) {
  const double cube = std::pow(0.894 / 3.5, 3);
  EXPECT_NEAR(purcell_max(5950.0, 894.0, 3.5, 141.3 * cube, VolumeUnit::cubic_micron),
              purcell_max(5950.0, 894.0, 3.5, 141.3), 1e-12);
}

TEST(PurcellMax, RejectsNonPositive) {
  EXPECT_THROW(purcell_max(0.0, 894.0, 3.5, 1.0), std::invalid_argument);
  EXPECT_THROW(purcell_max(1.0, -1.0, 3.5, 1.0), std::invalid_argument);
  EXPECT_THROW(purcell_max(1.0, 894.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(purcell_max(1.0, 894.0, 3.5, 0.0), std::invalid_argument);
}

TEST(ExtractionEfficiency, FourMicronPillar) {
  EXPECT_NEAR(extraction_efficiency(5950.0, 6670.0, 3.2, 1.0), kEtaExtFourMicron, 1e-12);
  EXPECT_NEAR(extraction_efficiency(5950.0, 6670.0, 3.2), 0.680, 1e-3);
}

TEST(ExtractionEfficiency, Limits) {
  EXPECT_GT(extraction_efficiency(6670.0, 6670.0, 1e4), 0.99);
  EXPECT_DOUBLE_EQ(extraction_efficiency(6670.0, 6670.0, 1.0, 1.0), 0.5);
}

TEST(ExtractionEfficiency, GammaFractionRange) {
  EXPECT_THROW(extraction_efficiency(1.0, 1.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(extraction_efficiency(1.0, 1.0, 1.0, 1.5), std::invalid_argument);
  PillarDesign d;
  d.gamma_fraction = 1.2;
  EXPECT_THROW(extraction_efficiency(d, 3.0), std::invalid_argument);
}

TEST(ExtractionEfficiency, MonotoneInPurcellAndQ) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uf(0.1, 50.0), uq(100.0, 6670.0), ug(0.05, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double f = uf(rng), q = uq(rng), g = ug(rng);
    EXPECT_LT(extraction_efficiency(q, 6670.0, f, g), extraction_efficiency(q, 6670.0, f * 1.01, g));
    EXPECT_LT(extraction_efficiency(q, 6670.0, f, g), extraction_efficiency(q * 1.01, 6670.0, f, g));
  }
}

TEST(ExtractionEfficiency, PlanarWarningFlag) {
  PillarDesign d;
  EXPECT_FALSE(d.q_exceeds_planar());
  d.q_pillar = 7000.0;
  EXPECT_TRUE(d.q_exceeds_planar());
}

TEST(IntensityVsDetuning, ResonanceValue) { EXPECT_NEAR(intensity_vs_detuning(3.1, 233.0, 0.0), 3.1 / 4.1, 1e-15); }

TEST(IntensityVsDetuning, FarDetunedAndEven) {
  EXPECT_NEAR(intensity_vs_detuning(3.1, 233.0, 100 * 233.0), 3.1 / 10004.1, 1e-15);
  EXPECT_LT(intensity_vs_detuning(3.1, 233.0, 200 * 233.0), 1e-4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ud(0.0, 2000.0), uf(0.1, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = ud(rng), f = uf(rng);
    EXPECT_EQ(intensity_vs_detuning(f, 233.0, d), intensity_vs_detuning(f, 233.0, -d));
    EXPECT_LT(intensity_vs_detuning(f, 233.0, d + 1.0), intensity_vs_detuning(f, 233.0, d));
    EXPECT_LE(intensity_vs_detuning(f, 233.0, d), f / (f + 1.0));
  }
}

TEST(PurcellFromLifetimes, MeasuredLifetimes) {
  const auto e = purcell_from_lifetimes(221.0, 890.0);
  EXPECT_NEAR(e.value, 3.0271493212669682, 1e-12);
  EXPECT_NEAR(e.value, 3.03, 0.01);
  EXPECT_NEAR(e.value, 3.0, 0.6);
  EXPECT_DOUBLE_EQ(purcell_from_lifetimes(500.0, 500.0).value, 0.0);
}

TEST(PurcellFromLifetimes, FirstOrderUncertainty) {
  // σ_F² = (T_off σ_on / T_on²)² + (σ_off / T_on)².
  const auto e = purcell_from_lifetimes(221.0, 890.0, 40.0, 66.0);
  EXPECT_NEAR(e.sigma, 0.7877032799629442, 1e-12);
}

TEST(PurcellFromLifetimes, ResamplingAgreesForSmallErrors) {
  const auto e = purcell_from_lifetimes(221.0, 890.0, 4.0, 6.6);
  const auto mc = purcell_from_lifetimes_resampled(221.0, 890.0, 4.0, 6.6, 200000, 3);
  EXPECT_NEAR(mc.sigma / e.sigma, 1.0, 0.02);
  EXPECT_NEAR(mc.value, e.value, 0.01);
}

TEST(PurcellFromLifetimes, ForwardMapRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uf(0.0, 30.0), ut(10.0, 5000.0);
  for (int i = 0; i < 1000; ++i) {
    const double f = uf(rng), t_off = ut(rng);
    EXPECT_NEAR(purcell_from_lifetimes(t_off / (f + 1.0), t_off).value, f, 1e-12 * std::max(1.0, f));
  }
}

TEST(PurcellFromLifetimes, RejectsNonPositive) {
  EXPECT_THROW(purcell_from_lifetimes(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(purcell_from_lifetimes(1.0, -1.0), std::invalid_argument);
}

TEST(QFromLinewidth, Values) {
  EXPECT_NEAR(q_from_linewidth(1386350.0, 233.0), 5950.0, 1.0);
  EXPECT_DOUBLE_EQ(q_from_linewidth(7.0, 7.0), 1.0);
  EXPECT_DOUBLE_EQ(q_from_linewidth(1000.0, 20.0), 2 * q_from_linewidth(1000.0, 40.0));
  EXPECT_THROW(q_from_linewidth(0.0, 1.0), std::invalid_argument);
}

TEST(SinglePhotonEfficiency, MeasuredValues) {
  EXPECT_NEAR(single_photon_efficiency(0.430, 0.072), 0.414, 5e-4);
  EXPECT_NEAR(single_photon_efficiency(0.215, 0.072), 0.207, 5e-4);
  EXPECT_DOUBLE_EQ(single_photon_efficiency(0.3, 0.0), 0.3);
  EXPECT_THROW(single_photon_efficiency(0.3, 1.0), std::domain_error);
}

TEST(SinglePhotonEfficiency, MonotoneAndHomogeneous) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ue(0.0, 0.5), ug(0.0, 0.98);
  for (int i = 0; i < 1000; ++i) {
    const double e = ue(rng), g = ug(rng);
    EXPECT_LE(single_photon_efficiency(e, g + 0.01), single_photon_efficiency(e, g));
    EXPECT_NEAR(single_photon_efficiency(2 * e, g), 2 * single_photon_efficiency(e, g), 1e-15);
  }
}

TEST(CountRate, MeasuredCountRate) {
  const double source = count_rate_to_efficiency(130e3, 82e6, 0.0036, 2);
  EXPECT_NEAR(source, 0.44037940379403795, 1e-12);
  EXPECT_NEAR(source, 0.43, 0.03);
  EXPECT_NEAR(count_rate_to_efficiency(130e3, 82e6, 0.0036, 1), 0.215, 0.01);
  EXPECT_DOUBLE_EQ(count_rate_to_efficiency(0.0, 82e6, 0.0036, 1), 0.0);
  EXPECT_DOUBLE_EQ(count_rate_to_efficiency(82e6 * 0.0036, 82e6, 0.0036, 2), 1.0);
  EXPECT_THROW(count_rate_to_efficiency(82e6 * 0.0036 * 1.01, 82e6, 0.0036, 2), std::domain_error);
  EXPECT_THROW(count_rate_to_efficiency(1.0, 82e6, 0.0036, 3), std::invalid_argument);
}

TEST(EfficiencyChain, SourceIsTwiceLinear) {
  const auto c = EfficiencyChain::from_counts(130e3, 82e6, 0.0036, 0.072);
  EXPECT_DOUBLE_EQ(c.eta_source, 2 * c.eta_lin);
  EXPECT_NEAR(c.eta_sps, c.eta_source * std::sqrt(1 - 0.072), 1e-15);
  for (double v : {c.eta_lin, c.eta_source, c.eta_sps, c.eta_sps_lin}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(DesignSweep, AreaScaling) {
  const ModeVolumeReference ref{4.0, 141.3};
  EXPECT_DOUBLE_EQ(ref.at(4.0), 141.3);
  EXPECT_DOUBLE_EQ(ref.at(8.0), 4 * 141.3);
}

TEST(DesignSweep, RowsMatchFormulas) {
  const QTable table{{2.0, 4800.0}, {4.0, 5950.0}};
  const auto rows = design_sweep({2.0, 4.0}, table, {4.0, 141.3});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[1].q, 5950.0);
  EXPECT_NEAR(rows[1].f_p_max, purcell_max(5950.0, 894.0, 3.5, 141.3), 1e-12);
  EXPECT_NEAR(rows[0].f_p_max, purcell_max(4800.0, 894.0, 3.5, 141.3 / 4), 1e-12);
  EXPECT_NEAR(rows[0].eta_ext, extraction_efficiency(4800.0, 6670.0, rows[0].f_p_max), 1e-15);
  EXPECT_THROW(design_sweep({3.0}, table, {4.0, 141.3}), std::invalid_argument);
  EXPECT_THROW(design_sweep({3.0}, QTable{}, {4.0, 141.3}), std::invalid_argument);
}

TEST(DesignSweep, CsvLayout) {
  std::ostringstream os;
  write_design_csv(os, design_sweep({4.0}, {{4.0, 5950.0}}, {4.0, 141.3}));
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "diameter_um,Q,F_P_max,eta_ext");
  const auto fields = split_fields(row);
  ASSERT_EQ(fields.size(), 4u);
  EXPECT_EQ(parse_double(fields[0]), 4.0);
  EXPECT_EQ(parse_double(fields[1]), 5950.0);
}

TEST(Formulas, BitwiseDeterministic) {
  EXPECT_EQ(extraction_efficiency(5950.0, 6670.0, 3.2), extraction_efficiency(5950.0, 6670.0, 3.2));
  const auto a = purcell_from_lifetimes_resampled(221.0, 890.0, 40.0, 66.0, 1000, 8);
  const auto b = purcell_from_lifetimes_resampled(221.0, 890.0, 40.0, 66.0, 1000, 8);
  EXPECT_EQ(a.sigma, b.sigma);
}

}  // namespace
}  // namespace qdsps

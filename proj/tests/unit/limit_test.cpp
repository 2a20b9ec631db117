// Copyright 2026 The delaygame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "delaygame/continuous_limit.hpp"
#include "delaygame/discrete_engine.hpp"
#include "delaygame/gains.hpp"
#include "unit/fixtures.hpp"

#include <gtest/gtest.h>

namespace delaygame {
namespace {

using testing::golden;
using testing::rel_diff;

TEST(ExtractFields, ScalesLagsByDelta) {
  const GameSpec s = testing::two_state(0.1, 0.04, 0.5);
  const Grid g = build_grid(s, 0.02);
  const RiccatiLadder ladder = backward_sweep(s, g);
  const RiccatiFields f = extract_fields(ladder);
  ASSERT_EQ(f.samples(), g.N + 2);
  for (int k = 0; k < f.samples(); ++k)
    for (int i = 0; i < 2; ++i) {
      EXPECT_EQ(f.P[i][k], ladder.layer(k).Phat[i]);
      for (int j = 0; j <= g.d1; ++j)
        EXPECT_LT(rel_diff(f.Phat[i][k][j] * g.delta, ladder.layer(k).Phat_lag[i][j]), 1e-15);
      for (int j = 0; j <= g.d2; ++j)
        EXPECT_LT(rel_diff(f.Ccheck[i][k][j] * g.delta, ladder.layer(k).Ccheck_lag[i][j]), 1e-15);
    }
}

TEST(ExtractFields, ShatIsTrapezoidIntegral) {
  const GameSpec s = golden(0.2, 0.1, 0.6);
  const Grid g = build_grid(s, 0.1);
  const RiccatiFields f = extract_fields(backward_sweep(s, g));
  for (int k = 0; k < f.samples(); ++k)
    for (int i = 0; i < 2; ++i) {
      const auto& ph = f.Phat[i][k];
      const auto& cc = f.Ccheck[i][k];
      const double ip = g.delta * (0.5 * ph[0](0, 0) + ph[1](0, 0) + 0.5 * ph[2](0, 0));
      const double ic = g.delta * 0.5 * (cc[0](0, 0) + cc[1](0, 0));
      const double it = g.delta * 0.5 * (ph[1](0, 0) + ph[2](0, 0));
      EXPECT_NEAR(f.Shat[i][k](0, 0), f.P[i][k](0, 0) + ip + ic, 1e-14);
      EXPECT_NEAR(f.Scheck[i][k](0, 0), f.P[i][k](0, 0) + it + ic, 1e-14);
    }
}

TEST(ContinuousResiduals, ZeroCostVanish) {
  const GameSpec s = testing::zero_cost(testing::two_state(0.1, 0.04, 0.5));
  const Grid g = build_grid(s, 0.02);
  const ContinuousResiduals r = continuous_residuals(extract_fields(backward_sweep(s, g)), s);
  EXPECT_EQ(r.ode.max, 0.0);
  EXPECT_EQ(r.boundary.max, 0.0);
  EXPECT_EQ(r.transport.max, 0.0);
  EXPECT_EQ(r.semigroup.max, 0.0);
}

TEST(ContinuousResiduals, SemigroupExactWithoutDrift) {
  GameSpec s = golden(0.2, 0.1, 1.0);
  s.A.setZero();
  const Grid g = build_grid(s, 0.01);
  const ContinuousResiduals r = continuous_residuals(extract_fields(backward_sweep(s, g)), s);
  EXPECT_LE(r.semigroup.max, 1e-8);
}

TEST(ContinuousResiduals, ShrinkUnderRefinement) {
  const GameSpec s = golden(0.2, 0.1, 1.0);
  double ode = 0.0, semi = 0.0;
  for (int h = 0; h <= 3; ++h) {
    const double dt = 0.05 / (1 << h);
    const ContinuousResiduals r = continuous_residuals(extract_fields(backward_sweep(s, build_grid(s, dt))), s);
    if (h > 0) {
      EXPECT_LT(r.ode.max, ode) << "halving " << h;
      EXPECT_LT(r.semigroup.max, semi) << "halving " << h;
    }
    ode = r.ode.max;
    semi = r.semigroup.max;
  }
}

TEST(Gains, StationarityIdentity) {
  for (const GameSpec& s : {golden(0.04, 0.01, 0.5), testing::two_state(0.1, 0.04, 0.5)}) {
    const Grid g = build_grid(s, s.n() == 1 ? 0.005 : 0.02);
    const RiccatiFields f = extract_fields(backward_sweep(s, g));
    const FeedbackLaw law = assemble_gains(f, s);
    const ResidualReport r = stationarity_identity_check(law, f, s);
    EXPECT_TRUE(r.pass) << r.max;
    EXPECT_EQ(law.samples(), g.N + 2);
    for (int k = 0; k < law.samples(); ++k) EXPECT_EQ(law.provisional[k], k < g.d1);
  }
}

TEST(Gains, ZeroCostGivesZeroGains) {
  const GameSpec s = testing::zero_cost(testing::two_state(0.1, 0.04, 0.5));
  const Grid g = build_grid(s, 0.02);
  const FeedbackLaw law = assemble_gains(extract_fields(backward_sweep(s, g)), s);
  for (int k = 0; k < law.samples(); ++k) {
    EXPECT_TRUE(law.K1[k].isZero(0.0));
    EXPECT_TRUE(law.K2_h1[k].isZero(0.0));
    EXPECT_TRUE(law.K2_h2[k].isZero(0.0));
    for (const Mat& m : law.K2_kernel[k]) EXPECT_TRUE(m.isZero(0.0));
  }
}

TEST(Gains, SingularWeightThrows) {
  GameSpec s = golden(0.04, 0.01, 0.5);
  const Grid g = build_grid(s, 0.01);
  const RiccatiFields f = extract_fields(backward_sweep(s, g));
  s.R2.setZero();
  s.B2bar.setZero();
  EXPECT_THROW(assemble_gains(f, s), SingularGain);
}

}  // namespace
}  // namespace delaygame

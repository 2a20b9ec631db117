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


#include "delaygame/verify.hpp"
#include "unit/fixtures.hpp"

#include <gtest/gtest.h>

namespace delaygame {
namespace {

using testing::golden;

TEST(Costate, TerminalValue) {
  const GameSpec s = testing::two_state(0.1, 0.04, 0.5);
  const Grid g = build_grid(s, 0.02);
  const RiccatiLadder ladder = backward_sweep(s, g);
  const LinearClosedLoop loop = loop_from_ladder(ladder, s);
  const Trajectory tr = simulate_path(loop, s.x0, 3);
  const CostateSeries cs = costate_reconstruct(ladder, loop, tr);
  const Vec& xT = tr.x[g.N + 1];
  EXPECT_LT((cs.p[0][g.N] - s.H1 * xT).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((cs.p[1][g.N] - s.H2 * xT).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Costate, NeedsWindows) {
  const GameSpec s = golden();
  const Grid g = build_grid(s, 0.01);
  const RiccatiLadder ladder = backward_sweep(s, g);
  const LinearClosedLoop loop = loop_from_ladder(ladder, s);
  const Trajectory tr = simulate_path(loop, s.x0, 3, 0, false);
  EXPECT_THROW(costate_reconstruct(ladder, loop, tr), MissingWindow);
}

TEST(Projection, ZeroCostResidualsVanish) {
  const GameSpec s = testing::zero_cost(testing::two_state(0.1, 0.04, 0.5));
  const Grid g = build_grid(s, 0.02);
  const RiccatiLadder ladder = backward_sweep(s, g);
  const LinearClosedLoop loop = loop_from_ladder(ladder, s);
  EXPECT_EQ(fbsde_residual_test(ladder, s, loop, 50, 1).max_value, 0.0);
  EXPECT_EQ(stationarity_residual_test(ladder, s, loop, 50, 1).max_value, 0.0);
}

TEST(Projection, ZeroedLayerIsDetected) {
  const GameSpec s = golden(0.04, 0.02, 0.5);
  const Grid g = build_grid(s, 0.01);
  const RiccatiLadder good = backward_sweep(s, g);
  const RiccatiLadder bad = backward_sweep(EngineContext(s, g), zeroed_layer(g.N / 2));
  const ProjectionReport a = fbsde_residual_test(good, s, loop_from_ladder(good, s), 2000, 5);
  const ProjectionReport b = fbsde_residual_test(bad, s, loop_from_ladder(bad, s), 2000, 5);
  EXPECT_GT(b.max_value, 10.0 * a.max_value);
}

TEST(Nash, NeutralDeviationHasZeroMargin) {
  const GameSpec s = golden(0.04, 0.02, 0.5);
  const Grid g = build_grid(s, 0.01);
  const LinearClosedLoop loop = loop_from_ladder(backward_sweep(s, g), s);
  const auto v = nash_deviation_test(loop, s, 50, 9,
                                     {perturb_control(1, PerturbKind::constant_shift, 0.0),
                                      perturb_control(2, PerturbKind::gain_scale, 1.0)});
  for (const DeviationVerdict& d : v) {
    EXPECT_NEAR(d.margin, 0.0, 1e-12);
    EXPECT_TRUE(d.pass);
  }
}

TEST(Nash, LargeDeviationsCostMore) {
  const GameSpec s = golden(0.04, 0.02, 0.5);
  const Grid g = build_grid(s, 0.01);
  const LinearClosedLoop loop = loop_from_ladder(backward_sweep(s, g), s);
  for (int player : {1, 2}) {
    const auto v = nash_deviation_test(loop, s, 200, 9, {perturb_control(player, PerturbKind::constant_shift, 1.0)});
    EXPECT_GT(v[0].margin, 0.0);
    EXPECT_TRUE(v[0].pass);
  }
}

TEST(Classical, NoCostNoGain) {
  const GameSpec s = testing::zero_cost(golden());
  const ClassicalGame cg = solve_classical_game(s, 20, 4);
  for (std::size_t k = 0; k < cg.t.size(); ++k) {
    EXPECT_TRUE(cg.K1[k].isZero(0.0));
    EXPECT_TRUE(cg.K2[k].isZero(0.0));
  }
}

// With player 2 inert the classical pair reduces to the stochastic LQR
// equation, whose scalar solution is checked against a fine Euler sweep.
TEST(Classical, SinglePlayerRiccati) {
  GameSpec s = golden();
  s.B2.setZero();
  s.B2bar.setZero();
  const ClassicalGame cg = solve_classical_game(s, 10, 10);
  double P = s.H1(0, 0);
  const double a = s.A(0, 0), ab = s.Abar(0, 0), b = s.B1(0, 0), bb = s.B1bar(0, 0);
  const int n = 200000;
  const double h = s.T / n;
  for (int j = 0; j < n; ++j) {
    const double K = -(b * P + bb * P * ab) / (1.0 + bb * P * bb);
    P += h * (P * (a + b * K) + a * P + ab * P * (ab + bb * K) + 1.0);
  }
  EXPECT_NEAR(cg.P[0][0](0, 0), P, 1e-4);
  EXPECT_TRUE(cg.K2[0].isZero(0.0));
}

TEST(Classical, DelayedGainsApproachClassical) {
  const GameSpec s = golden();
  const double a = no_delay_gap(s, 0.01);
  const double b = no_delay_gap(s, 0.005);
  const double c = no_delay_gap(s, 0.0025);
  EXPECT_LT(b, a);
  EXPECT_LT(c, b);
}

TEST(ZFactors, IdentityWithoutCost) {
  const GameSpec s = testing::zero_cost(golden(0.05, 0.02, 0.3));
  const Grid g = build_grid(s, 0.01);
  EXPECT_EQ(z_factor_distance(backward_sweep(EngineContext(s, g, true))), 0.0);
}

TEST(ZFactors, ShrinkWithDelta) {
  const GameSpec s = golden(0.05, 0.02, 0.3);
  const double a = z_factor_distance(backward_sweep(EngineContext(s, build_grid(s, 0.01), true)));
  const GameSpec f = golden(0.025, 0.01, 0.3);
  const double b = z_factor_distance(backward_sweep(EngineContext(f, build_grid(f, 0.005), true)));
  EXPECT_GT(a, 0.0);
  EXPECT_LE(b / a, 0.7);
}

TEST(CrossRepresentation, SmallAtFineGrid) {
  const GameSpec s = golden(0.04, 0.02, 0.5);
  const Grid g = build_grid(s, 0.005);
  const RiccatiLadder ladder = backward_sweep(s, g);
  const FeedbackLaw law = assemble_gains(extract_fields(ladder), s);
  EXPECT_LT(cross_representation_gap(ladder, law, s, 20, 1), 0.05);
}

}  // namespace
}  // namespace delaygame

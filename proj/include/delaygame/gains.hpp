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

// State-estimate feedback gains:
//
//   u1(t) = K1(t) E_{t-h1}[x(t)],
//   u2(t) = K2_h1(t) E_{t-h1}[x(t)]
//         + int_0^{h1-h2} K2_kernel(t, theta) E_{t-h1+theta}[x(t)] dtheta
//         + K2_h2(t) E_{t-h2}[x(t)].

#pragma once

#include "delaygame/common.hpp"
#include "delaygame/continuous_limit.hpp"
#include "delaygame/model.hpp"

#include <algorithm>
#include <vector>

namespace delaygame {

struct FeedbackLaw {
  Grid grid;
  std::vector<double> t_samples;
  std::vector<bool> provisional;
  std::vector<Mat> Rt1, Rt2, O1, K1, K2_h1, K2_h2;
  std::vector<std::vector<Mat>> K2_kernel;  // theta = j*delta, j = 0..d1-d2

  int samples() const { return static_cast<int>(t_samples.size()); }
};

inline FeedbackLaw assemble_gains(const RiccatiFields& f, const GameSpec& spec) {
  const Grid& g = f.grid;
  const double dt = f.delta;
  const int D = g.gap();
  const Mat B1t = spec.B1.transpose();
  const Mat B2t = spec.B2.transpose();
  const Mat Bb1t = spec.B1bar.transpose();
  const Mat Bb2t = spec.B2bar.transpose();

  FeedbackLaw law;
  law.grid = g;
  law.t_samples = f.t_samples;
  const int K = f.samples();
  law.provisional.resize(K);
  for (auto* v : {&law.Rt1, &law.Rt2, &law.O1, &law.K1, &law.K2_h1, &law.K2_h2}) v->resize(K);
  law.K2_kernel.resize(K);

  for (int k = 0; k < K; ++k) {
    const double t = f.t_samples[k];
    const Mat& P1 = f.P[0][k];
    const Mat& P2 = f.P[1][k];
    const Mat& S1 = f.Shat[0][k];
    const Mat& Sc2 = f.Scheck[1][k];
    law.provisional[k] = k < g.d1;

    const Mat Rt2 = spec.R2 + Bb2t * P2 * spec.B2bar;
    Eigen::PartialPivLU<Mat> lu2(Rt2);
    if (!(lu2.rcond() >= kSingularRcond)) throw SingularGain(t, "R2(t)");

    const Mat cross12 = Bb1t * P1 * spec.B2bar;
    const Mat cross21 = Bb2t * P2 * spec.B1bar;
    const Mat kernel_int = detail::trapezoid(f.Phat[1][k], 0, D, dt);
    const Mat tail2 = B2t * Sc2 + Bb2t * P2 * spec.Abar;

    const Mat Rt1 = spec.R1 + Bb1t * P1 * spec.B1bar - cross12 * lu2.solve(cross21);
    const Mat O1 = B1t * S1 + Bb1t * P1 * spec.Abar - cross12 * lu2.solve(tail2 + B2t * kernel_int);
    Eigen::PartialPivLU<Mat> lu1(Rt1);
    if (!(lu1.rcond() >= kSingularRcond)) throw SingularGain(t, "R1(t)");

    law.Rt1[k] = Rt1;
    law.Rt2[k] = Rt2;
    law.O1[k] = O1;
    law.K1[k] = -lu1.solve(O1);
    law.K2_h1[k] = -lu2.solve(cross21 * law.K1[k]);
    law.K2_h2[k] = -lu2.solve(tail2);
    law.K2_kernel[k].resize(D + 1);
    for (int j = 0; j <= D; ++j) law.K2_kernel[k][j] = -lu2.solve(B2t * f.Phat[1][k][j]);
  }
  return law;
}

// Substitutes the gains into the two stationarity conditions with every
// estimate treated as a free symbol and reports the largest relative mismatch
// of the coefficient matrices per sample.
inline ResidualReport stationarity_identity_check(const FeedbackLaw& law, const RiccatiFields& f,
                                                  const GameSpec& spec, double tolerance = 1e-10) {
  const double dt = f.delta;
  const int D = law.grid.gap();
  const Mat B1t = spec.B1.transpose();
  const Mat B2t = spec.B2.transpose();
  const Mat Bb1t = spec.B1bar.transpose();
  const Mat Bb2t = spec.B2bar.transpose();

  ResidualReport rep;
  rep.name = "stationarity_identity";
  rep.tolerance = tolerance;
  for (int k = 0; k < law.samples(); ++k) {
    const Mat& P1 = f.P[0][k];
    const Mat& P2 = f.P[1][k];
    const Mat Rb1 = spec.R1 + Bb1t * P1 * spec.B1bar;
    const Mat Rb2 = spec.R2 + Bb2t * P2 * spec.B2bar;
    const Mat& K1 = law.K1[k];
    // Player 1 sees every player-2 estimate collapse onto E_{t-h1}.
    const Mat u2_total = law.K2_h1[k] + detail::trapezoid(law.K2_kernel[k], 0, D, dt) + law.K2_h2[k];

    double worst = 0.0;
    auto rel = [&](const Mat& r, std::initializer_list<Mat> parts) {
      double scale = 1.0;
      for (const Mat& p : parts) scale = std::max(scale, detail::max_abs(p));
      worst = std::max(worst, detail::max_abs(r) / scale);
    };
    const Mat a1 = Rb1 * K1;
    const Mat a2 = B1t * f.Shat[0][k] + Bb1t * P1 * spec.Abar;
    const Mat a3 = Bb1t * P1 * spec.B2bar * u2_total;
    rel(a1 + a2 + a3, {a1, a2, a3});

    const Mat b1 = Rb2 * law.K2_h1[k];
    const Mat b2 = Bb2t * P2 * spec.B1bar * K1;
    rel(b1 + b2, {b1, b2});
    for (int j = 0; j <= D; ++j) {
      const Mat c1 = Rb2 * law.K2_kernel[k][j];
      const Mat c2 = B2t * f.Phat[1][k][j];
      rel(c1 + c2, {c1, c2});
    }
    const Mat e1 = Rb2 * law.K2_h2[k];
    const Mat e2 = B2t * f.Scheck[1][k] + Bb2t * P2 * spec.Abar;
    rel(e1 + e2, {e1, e2});
    rep.per_sample.push_back(worst);
  }
  rep.finish();
  return rep;
}

}  // namespace delaygame

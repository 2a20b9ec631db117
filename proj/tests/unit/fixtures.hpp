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

#pragma once

#include "delaygame/model.hpp"

namespace delaygame::testing {

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }

// A = Abar = 0.1, unit inputs and weights, H = 0.5, x0 = 1.
inline GameSpec golden(double h1 = 0.02, double h2 = 0.01, double T = 1.0) {
  GameSpec s;
  s.A = s.Abar = scalar(0.1);
  s.B1 = s.B1bar = s.B2 = s.B2bar = scalar(1.0);
  s.Q1 = s.Q2 = scalar(1.0);
  s.R1 = s.R2 = scalar(1.0);
  s.H1 = s.H2 = scalar(0.5);
  s.h1 = h1;
  s.h2 = h2;
  s.T = T;
  s.x0 = Vec::Ones(1);
  return s;
}

inline GameSpec zero_cost(GameSpec s) {
  s.Q1.setZero();
  s.Q2.setZero();
  s.H1.setZero();
  s.H2.setZero();
  return s;
}

// Two states, one input each, all couplings switched on.
inline GameSpec two_state(double h1, double h2, double T) {
  GameSpec s;
  s.A.resize(2, 2);
  s.A << 0.0, 1.0, -0.5, -0.2;
  s.Abar.resize(2, 2);
  s.Abar << 0.1, 0.02, 0.0, 0.05;
  s.B1.resize(2, 1);
  s.B1 << 0.0, 1.0;
  s.B1bar.resize(2, 1);
  s.B1bar << 0.1, 0.0;
  s.B2.resize(2, 1);
  s.B2 << 1.0, 0.5;
  s.B2bar.resize(2, 1);
  s.B2bar << 0.0, 0.1;
  s.Q1 = Mat::Identity(2, 2);
  s.Q1(1, 1) = 0.5;
  s.Q2 = Mat::Identity(2, 2);
  s.Q2(0, 0) = 0.5;
  s.R1 = scalar(1.0);
  s.R2 = scalar(2.0);
  s.H1 = Mat::Identity(2, 2);
  s.H2 = 0.5 * Mat::Identity(2, 2);
  s.h1 = h1;
  s.h2 = h2;
  s.T = T;
  s.x0.resize(2);
  s.x0 << 1.0, -0.5;
  return s;
}

inline double rel_diff(const Mat& a, const Mat& b) {
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace delaygame::testing

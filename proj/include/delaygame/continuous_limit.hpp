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

// Continuous-time Riccati fields read off a discrete ladder, and residuals of
// the continuous Riccati system evaluated on those samples.

#pragma once

#include "delaygame/common.hpp"
#include "delaygame/discrete_engine.hpp"
#include "delaygame/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <limits>
#include <string>
#include <vector>

namespace delaygame {

// Samples on t_k = k*delta, k = 0..N+1. Phat[i][k][j] is the field at
// (t_k, theta = j*delta), j = 0..d1; Ccheck likewise for j = 0..d2.
struct RiccatiFields {
  Grid grid;
  double delta = 0.0;
  std::vector<double> t_samples;
  std::array<std::vector<Mat>, 2> P;
  std::array<std::vector<std::vector<Mat>>, 2> Phat;
  std::array<std::vector<std::vector<Mat>>, 2> Ccheck;
  std::array<std::vector<Mat>, 2> Shat, Scheck;

  int samples() const { return static_cast<int>(t_samples.size()); }
};

struct ResidualReport {
  std::string name;
  std::vector<double> per_sample;
  double max = 0.0;
  double mean = 0.0;
  double tolerance = 0.0;
  bool pass = true;

  void finish() {
    max = 0.0;
    mean = 0.0;
    for (double v : per_sample) {
      max = std::max(max, v);
      mean += v;
    }
    if (!per_sample.empty()) mean /= static_cast<double>(per_sample.size());
    pass = max <= tolerance;
  }
};

namespace detail {

// Trapezoid rule over samples f[lo..hi] spaced by h.
inline Mat trapezoid(const std::vector<Mat>& f, int lo, int hi, double h) {
  Mat acc = Mat::Zero(f[lo].rows(), f[lo].cols());
  if (hi <= lo) return acc;
  acc += 0.5 * (f[lo] + f[hi]);
  for (int j = lo + 1; j < hi; ++j) acc += f[j];
  return h * acc;
}

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

inline RiccatiFields extract_fields(const RiccatiLadder& ladder) {
  const Grid& g = ladder.grid;
  const double dt = g.delta;
  const int D = g.gap();
  RiccatiFields f;
  f.grid = g;
  f.delta = dt;
  const int K = g.N + 2;
  f.t_samples.resize(K);
  for (int k = 0; k < K; ++k) f.t_samples[k] = g.time(k);
  for (int i = 0; i < 2; ++i) {
    f.P[i].resize(K);
    f.Phat[i].resize(K);
    f.Ccheck[i].resize(K);
    f.Shat[i].resize(K);
    f.Scheck[i].resize(K);
    for (int k = 0; k < K; ++k) {
      const RiccatiLayer& layer = ladder.layer(k);
      f.P[i][k] = layer.Phat[i];
      auto& ph = f.Phat[i][k];
      ph.resize(g.d1 + 1);
      for (int j = 0; j <= g.d1; ++j) ph[j] = layer.Phat_lag[i][j] / dt;
      auto& cc = f.Ccheck[i][k];
      cc.resize(g.d2 + 1);
      for (int j = 0; j <= g.d2; ++j) cc[j] = layer.Ccheck_lag[i][j] / dt;
      const Mat cint = detail::trapezoid(cc, 0, g.d2, dt);
      f.Shat[i][k] = f.P[i][k] + detail::trapezoid(ph, 0, g.d1, dt) + cint;
      f.Scheck[i][k] = f.P[i][k] + detail::trapezoid(ph, D, g.d1, dt) + cint;
    }
  }
  return f;
}

struct ContinuousResiduals {
  ResidualReport ode;        // backward difference of P against its ODE
  ResidualReport boundary;   // Phat(t, 0) and Ccheck(t, 0) against their closed forms
  ResidualReport transport;  // Phat(t, s) along characteristics
  ResidualReport semigroup;  // Ccheck(t, s) against the exponential propagation
  std::vector<double> rcond_joint;   // I - Bbar21 P1 - Bbar22 P2
  std::vector<double> rcond_second;  // I - Bbar22 P2
};

inline ContinuousResiduals continuous_residuals(const RiccatiFields& f, const GameSpec& spec) {
  const ReducedCoefficients c = reduce_coefficients(spec);
  const Grid& g = f.grid;
  const double dt = f.delta;
  const int D = g.gap();
  const auto n = spec.n();
  const Mat I = Mat::Identity(n, n);
  const Mat& A = spec.A;
  const Mat At = A.transpose();
  const Mat& Ab = spec.Abar;
  const Mat Abt = Ab.transpose();
  const int last = g.N + 1;

  ContinuousResiduals out;
  out.ode.name = "ode";
  out.boundary.name = "boundary";
  out.transport.name = "transport";
  out.semigroup.name = "semigroup";

  // Backward difference from t_{k+1} to t_k, coefficients at t_{k+1}; the
  // sample at T is excluded.
  for (int k = 0; k + 1 < last; ++k) {
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
      const Mat& P = f.P[i][k + 1];
      const Mat rhs = At * P + P * A + Abt * P * Ab + spec.Q(i + 1) + f.Phat[i][k + 1][g.d1] +
                      f.Ccheck[i][k + 1][g.d2];
      worst = std::max(worst, detail::max_abs((f.P[i][k] - f.P[i][k + 1]) / dt - rhs));
    }
    out.ode.per_sample.push_back(worst);
  }

  std::vector<Mat> expA(g.d2 + 1);
  for (int j = 0; j <= g.d2; ++j) expA[j] = (A * (j * dt)).exp();

  for (int k = 0; k < last; ++k) {
    const Mat& P1 = f.P[0][k];
    const Mat& P2 = f.P[1][k];
    const Mat W = I - c.Bbar21 * P1 - c.Bbar22 * P2;
    const Mat V = I - c.Bbar22 * P2;
    Eigen::PartialPivLU<Mat> Wlu(W), Vlu(V);
    out.rcond_joint.push_back(Wlu.rcond());
    out.rcond_second.push_back(Vlu.rcond());

    const Mat& S1 = f.Shat[0][k];
    const Mat& S2 = f.Shat[1][k];
    const Mat& Sc2 = f.Scheck[1][k];
    const Mat inner = Wlu.solve(c.Bbar11 * S1 + c.Bbar12 * S2 + Ab);
    const Mat P2V = P2 * Vlu.inverse();
    const Mat HcTail = c.B12 * Sc2 + c.B22 * P2V * (c.Bbar12 * Sc2 + Ab);
    double worst_b = 0.0;
    double worst_t = 0.0;
    for (int i = 0; i < 2; ++i) {
      const Mat& Si = f.Shat[i][k];
      const Mat& Sci = f.Scheck[i][k];
      const Mat& Pi = f.P[i][k];
      const Mat phat0 = (Si * c.B11 + Abt * Pi * c.Bbar11) * S1 +
                        (Si * c.B21 + Abt * Pi * c.Bbar21) * P1 * inner +
                        (Si * c.B22 + Abt * Pi * c.Bbar22) * P2V *
                            (c.Bbar11 * S1 + c.Bbar21 * P1 * inner);
      const Mat ccheck0 = (Sci * c.B12 + Abt * Pi * c.Bbar12) * Sc2 +
                          (Sci * c.B22 + Abt * Pi * c.Bbar22) * P2V * (c.Bbar12 * Sc2 + Ab);
      worst_b = std::max(worst_b, detail::max_abs(f.Phat[i][k][0] - phat0));
      worst_b = std::max(worst_b, detail::max_abs(f.Ccheck[i][k][0] - ccheck0));

      // -d/dt Phat(t, s) at fixed s: samples (t_k, m) and (t_{k+1}, m-1).
      for (int m = 1; m <= g.d1; ++m) {
        if (k + m > g.N) break;
        const Mat& ph = f.Phat[i][k][m];
        Mat rhs = At * ph + ph * A;
        if (m < D) {
          const Mat& ph2 = f.Phat[1][k][m];
          rhs += Si * (c.B12 + c.B22 * P2V * c.Bbar12) * ph2 +
                 Abt * Pi * (c.Bbar12 + c.Bbar22 * P2V * c.Bbar12) * ph2 + ph * HcTail;
        }
        worst_t = std::max(worst_t, detail::max_abs((ph - f.Phat[i][k + 1][m - 1]) / dt - rhs));
      }
    }
    out.boundary.per_sample.push_back(worst_b);
    out.transport.per_sample.push_back(worst_t);

    double worst_s = 0.0;
    for (int j = 1; j <= g.d2 && k + j <= last; ++j) {
      const Mat& E = expA[j];
      for (int i = 0; i < 2; ++i) {
        const Mat prop = E.transpose() * f.Ccheck[i][k + j][0] * E;
        worst_s = std::max(worst_s, detail::max_abs(f.Ccheck[i][k][j] - prop));
      }
    }
    out.semigroup.per_sample.push_back(worst_s);
  }

  for (ResidualReport* r : {&out.ode, &out.boundary, &out.transport, &out.semigroup}) {
    r->tolerance = std::numeric_limits<double>::infinity();
    r->finish();
  }
  return out;
}

}  // namespace delaygame

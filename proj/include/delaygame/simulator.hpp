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

// Monte Carlo simulation of the closed loop with a sliding window of
// conditional state estimates.
//
// The window of x_k holds W_k[o] = E_{k-d1-1+o}[x_k] for o = 0..d1, so
// W_k[d1] = x_k. Negative levels are the trivial sigma-algebra and every
// window entry starts at x0.

#pragma once

#include "delaygame/common.hpp"
#include "delaygame/discrete_engine.hpp"
#include "delaygame/gains.hpp"
#include "delaygame/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace delaygame {

// Coefficients of one closed-loop step acting on the window of x_k:
//   u1 = U1 W[0],  u2 = sum_r U2[r] W[r],
//   x_{k+1} = A_k x_k + sum_r C[r](dw) W[r].
struct StepPolicy {
  Mat U1;
  std::vector<Mat> U2;  // r = 0..d1-d2
  std::vector<AffineMatrix> C;
};

struct LinearClosedLoop {
  Grid grid;
  Mat Ahat, Abar;
  std::vector<StepPolicy> steps;  // k = 0..N
};

struct Trajectory {
  std::vector<Vec> x;                 // k = 0..N+1
  std::vector<Vec> u1, u2;            // k = 0..N
  std::vector<double> dw;             // k = 0..N
  std::vector<std::vector<Vec>> windows;  // k = 0..N+1, offsets 0..d1
};

namespace detail {

inline StepPolicy policy_from_controls(const GameSpec& spec, double dt, Mat U1, std::vector<Mat> U2) {
  StepPolicy p;
  p.C.resize(U2.size());
  for (std::size_t r = 0; r < U2.size(); ++r) {
    p.C[r] = {dt * spec.B2 * U2[r], spec.B2bar * U2[r]};
    if (r == 0) {
      p.C[r].const_part += dt * spec.B1 * U1;
      p.C[r].noise_part += spec.B1bar * U1;
    }
  }
  p.U1 = std::move(U1);
  p.U2 = std::move(U2);
  return p;
}

}  // namespace detail

inline LinearClosedLoop loop_from_ladder(const RiccatiLadder& ladder, const GameSpec& spec) {
  LinearClosedLoop loop;
  loop.grid = ladder.grid;
  loop.Ahat = Mat::Identity(spec.n(), spec.n()) + ladder.grid.delta * spec.A;
  loop.Abar = spec.Abar;
  loop.steps.reserve(ladder.closed_loop.size());
  for (const ClosedLoopStep& cl : ladder.closed_loop) loop.steps.push_back({cl.U1, cl.U2, cl.C});
  return loop;
}

// Step k acts with the gains sampled at t_{k+1}, the time of the layer whose
// matrices drive the same step of the sweep.
inline LinearClosedLoop loop_from_gains(const FeedbackLaw& law, const GameSpec& spec) {
  const Grid& g = law.grid;
  const double dt = g.delta;
  const int D = g.gap();
  LinearClosedLoop loop;
  loop.grid = g;
  loop.Ahat = Mat::Identity(spec.n(), spec.n()) + dt * spec.A;
  loop.Abar = spec.Abar;
  loop.steps.reserve(g.N + 1);
  for (int k = 0; k <= g.N; ++k) {
    const int s = k + 1;
    const auto& ker = law.K2_kernel[s];
    std::vector<Mat> U2(D + 1);
    for (int r = 0; r <= D; ++r) U2[r] = dt * ker[r];
    U2[0] = 0.5 * U2[0] + law.K2_h1[s];
    U2[D] = 0.5 * U2[D] + law.K2_h2[s];
    loop.steps.push_back(detail::policy_from_controls(spec, dt, law.K1[s], std::move(U2)));
  }
  return loop;
}

// Counter-based seed split: path p of run `seed` always draws the same stream.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path_id) {
  return splitmix64(splitmix64(seed) ^ (path_id * 0xd1342543de82ef95ULL + 1));
}

inline std::vector<double> draw_increments(const Grid& g, std::uint64_t seed, std::uint64_t path_id) {
  std::mt19937_64 rng(path_seed(seed, path_id));
  std::normal_distribution<double> normal(0.0, std::sqrt(g.delta));
  std::vector<double> dw(g.N + 1);
  for (double& v : dw) v = normal(rng);
  return dw;
}

// Advances the window by one step. `next_x` is x_{k+1}.
inline std::vector<Vec> advance_window(const std::vector<Vec>& W, const StepPolicy& p,
                                       const Mat& Ahat, const Vec& next_x) {
  const int d1 = static_cast<int>(W.size()) - 1;
  const int D = static_cast<int>(p.C.size()) - 1;
  std::vector<Vec> out(d1 + 1);
  for (int o = 0; o < d1; ++o) {
    Vec v = Ahat * W[o + 1];
    for (int m = 0; m <= D; ++m) v += p.C[m].const_part * W[std::min(o + 1, m)];
    out[o] = std::move(v);
  }
  out[d1] = next_x;
  return out;
}

inline Trajectory simulate_increments(const LinearClosedLoop& loop, const Vec& x0,
                                      const std::vector<double>& dw, bool keep_windows = true) {
  const Grid& g = loop.grid;
  Trajectory tr;
  tr.dw = dw;
  tr.x.reserve(g.N + 2);
  tr.u1.reserve(g.N + 1);
  tr.u2.reserve(g.N + 1);
  std::vector<Vec> W(g.d1 + 1, x0);
  tr.x.push_back(x0);
  if (keep_windows) tr.windows.push_back(W);
  for (int k = 0; k <= g.N; ++k) {
    const StepPolicy& p = loop.steps[k];
    const int D = static_cast<int>(p.U2.size()) - 1;
    Vec u2 = p.U2[0] * W[0];
    for (int r = 1; r <= D; ++r) u2 += p.U2[r] * W[r];
    tr.u1.push_back(p.U1 * W[0]);
    tr.u2.push_back(std::move(u2));

    const Vec& x = W[g.d1];
    Vec next = loop.Ahat * x + dw[k] * (loop.Abar * x);
    for (int m = 0; m <= D; ++m) next += p.C[m].at(dw[k]) * W[m];
    W = advance_window(W, p, loop.Ahat, next);
    tr.x.push_back(std::move(next));
    if (keep_windows) tr.windows.push_back(W);
  }
  return tr;
}

inline Trajectory simulate_path(const LinearClosedLoop& loop, const Vec& x0, std::uint64_t seed,
                                std::uint64_t path_id = 0, bool keep_windows = true) {
  return simulate_increments(loop, x0, draw_increments(loop.grid, seed, path_id), keep_windows);
}

inline Trajectory simulate_path_ladder(const RiccatiLadder& ladder, const GameSpec& spec,
                                       std::uint64_t seed, std::uint64_t path_id = 0) {
  return simulate_path(loop_from_ladder(ladder, spec), spec.x0, seed, path_id);
}

inline Trajectory simulate_path_gains(const FeedbackLaw& law, const GameSpec& spec,
                                      std::uint64_t seed, std::uint64_t path_id = 0) {
  return simulate_path(loop_from_gains(law, spec), spec.x0, seed, path_id);
}

// Euler-Maruyama with controls supplied as processes.
inline Trajectory replay_controls(const GameSpec& spec, const Grid& g, const std::vector<double>& dw,
                                  std::vector<Vec> u1, std::vector<Vec> u2) {
  Trajectory tr;
  tr.dw = dw;
  tr.x.reserve(g.N + 2);
  tr.x.push_back(spec.x0);
  for (int k = 0; k <= g.N; ++k) {
    const Vec x = tr.x.back();
    Vec drift = spec.A * x + spec.B1 * u1[k] + spec.B2 * u2[k];
    Vec diffusion = spec.Abar * x + spec.B1bar * u1[k] + spec.B2bar * u2[k];
    tr.x.push_back(x + g.delta * drift + dw[k] * diffusion);
  }
  tr.u1 = std::move(u1);
  tr.u2 = std::move(u2);
  return tr;
}

// Left-endpoint rule: 1/2 [ sum_k delta (x'Qx + u'Ru) + x_{N+1}' H x_{N+1} ].
inline double path_cost(const GameSpec& spec, const Grid& g, const Trajectory& tr, int player) {
  const Mat& Q = spec.Q(player);
  const Mat& R = spec.R(player);
  const auto& u = player == 1 ? tr.u1 : tr.u2;
  double running = 0.0;
  for (int k = 0; k <= g.N; ++k) {
    running += tr.x[k].dot(Q * tr.x[k]) + u[k].dot(R * u[k]);
  }
  const Vec& xT = tr.x[g.N + 1];
  return 0.5 * (g.delta * running + xT.dot(spec.H(player) * xT));
}

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;  // NaN when fewer than two samples
};

inline MeanEstimate mean_and_se(const std::vector<double>& v) {
  MeanEstimate e;
  const double n = static_cast<double>(v.size());
  if (v.empty()) return e;
  for (double x : v) e.mean += x;
  e.mean /= n;
  if (v.size() < 2) {
    e.se = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - e.mean) * (x - e.mean);
  e.se = std::sqrt(ss / (n - 1.0) / n);
  return e;
}

struct CostEstimate {
  MeanEstimate J1, J2;
  int n_paths = 0;
  std::uint64_t seed = 0;
};

inline CostEstimate estimate_costs(const LinearClosedLoop& loop, const GameSpec& spec, int n_paths,
                                   std::uint64_t seed) {
  std::vector<double> j1(n_paths), j2(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    const Trajectory tr = simulate_path(loop, spec.x0, seed, p, false);
    j1[p] = path_cost(spec, loop.grid, tr, 1);
    j2[p] = path_cost(spec, loop.grid, tr, 2);
  }
  return {mean_and_se(j1), mean_and_se(j2), n_paths, seed};
}

// A unilateral change of one player's control process. The deviating control
// is built from that player's equilibrium control on the same path,
//   v(t) = scale * u(t) + shift + bump * sin^2(pi t / T),
// or, when `gain` is set, from that gain applied to the player's coarsest
// admissible estimate. The other player keeps its equilibrium process.
struct ControlPerturbation {
  int player = 1;
  std::string label;
  double scale = 1.0;
  double shift = 0.0;
  double bump = 0.0;
  std::vector<Mat> gain;  // per step k = 0..N; empty when unused
};

enum class PerturbKind { constant_shift, gain_scale, time_bump };

inline ControlPerturbation perturb_control(int player, PerturbKind kind, double magnitude) {
  ControlPerturbation p;
  p.player = player;
  switch (kind) {
    case PerturbKind::constant_shift:
      p.shift = magnitude;
      p.label = "shift " + detail::fmt(magnitude);
      break;
    case PerturbKind::gain_scale:
      p.scale = magnitude;
      p.label = "scale " + detail::fmt(magnitude);
      break;
    case PerturbKind::time_bump:
      p.bump = magnitude;
      p.label = "bump " + detail::fmt(magnitude);
      break;
  }
  return p;
}

inline std::vector<Vec> perturbed_controls(const Trajectory& base, const ControlPerturbation& p,
                                           const Grid& g, int D) {
  const auto& u = p.player == 1 ? base.u1 : base.u2;
  std::vector<Vec> out(u.size());
  const double T = g.horizon();
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double t = g.time(static_cast<int>(k));
    const double s = std::sin(std::numbers::pi * t / T);
    if (!p.gain.empty()) {
      const Vec& est = base.windows[k][p.player == 1 ? 0 : D];
      out[k] = p.gain[k] * est;
    } else {
      out[k] = p.scale * u[k];
    }
    out[k].array() += p.shift + p.bump * s * s;
  }
  return out;
}

}  // namespace delaygame

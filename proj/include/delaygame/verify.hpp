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

// Residual, projection and deviation tests for a solved game.
//
// Conditional-expectation identities E_l[Y] = 0 are checked through the
// sample means of Y * Z over paths, with Z = 1 and the window components that
// are measurable at level l.

#pragma once

#include "delaygame/common.hpp"
#include "delaygame/continuous_limit.hpp"
#include "delaygame/discrete_engine.hpp"
#include "delaygame/gains.hpp"
#include "delaygame/model.hpp"
#include "delaygame/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace delaygame {

// Costates along one path. p[i][k] = p_{i,k} for k = 0..N, q[i][k] = q_{i,k}.
// The affine split of p_{i,k} in dw_k is kept: p = p0 + dw_k * p1.
struct CostateSeries {
  std::array<std::vector<Vec>, 2> p, p0, p1, q;
};

namespace detail {

// p_{i,k-1} from layer k and the window of x_k.
inline Vec costate_from_window(const RiccatiLayer& layer, const std::vector<Vec>& W, int i, int D) {
  const int d1 = static_cast<int>(W.size()) - 1;
  Vec p = layer.Phat[i] * W[d1];
  for (int j = 0; j <= d1; ++j) p += layer.Phat_lag[i][j] * W[j];
  const int d2 = static_cast<int>(layer.Ccheck_lag[i].size()) - 1;
  for (int j = 0; j <= d2; ++j) p += layer.Ccheck_lag[i][j] * W[D + j];
  return p;
}

}  // namespace detail

inline CostateSeries costate_reconstruct(const RiccatiLadder& ladder, const LinearClosedLoop& loop,
                                         const Trajectory& tr) {
  if (tr.windows.empty()) throw MissingWindow();
  const Grid& g = ladder.grid;
  const int D = g.gap();
  CostateSeries cs;
  for (int i = 0; i < 2; ++i) {
    cs.p[i].resize(g.N + 1);
    cs.p0[i].resize(g.N + 1);
    cs.p1[i].resize(g.N + 1);
    cs.q[i].resize(g.N + 1);
  }
  for (int k = 0; k <= g.N; ++k) {
    const auto& W = tr.windows[k];
    const StepPolicy& st = loop.steps[k];
    Vec X0 = loop.Ahat * W[g.d1];
    Vec X1 = loop.Abar * W[g.d1];
    for (int m = 0; m <= D; ++m) {
      X0 += st.C[m].const_part * W[m];
      X1 += st.C[m].noise_part * W[m];
    }
    const RiccatiLayer& next = ladder.layer(k + 1);
    for (int i = 0; i < 2; ++i) {
      const Mat Lx = next.Phat[i] + next.Phat_lag[i][g.d1] + next.Ccheck_lag[i][g.d2];
      cs.p[i][k] = detail::costate_from_window(next, tr.windows[k + 1], i, D);
      cs.p1[i][k] = Lx * X1;
      cs.p0[i][k] = cs.p[i][k] - tr.dw[k] * cs.p1[i][k];
      cs.q[i][k] = next.Phat[i] * X1;
    }
  }
  return cs;
}

// Running mean of Y * Z for several test variables at once.
struct ProjectionAccumulator {
  std::vector<double> sum, sumsq;
  long count = 0;

  void add(const std::vector<double>& v) {
    if (sum.empty()) {
      sum.assign(v.size(), 0.0);
      sumsq.assign(v.size(), 0.0);
    }
    for (std::size_t j = 0; j < v.size(); ++j) {
      sum[j] += v[j];
      sumsq[j] += v[j] * v[j];
    }
    ++count;
  }
  // Largest |mean| and the standard error of that entry.
  std::pair<double, double> worst() const {
    double best = 0.0;
    double se = 0.0;
    const double n = static_cast<double>(count);
    for (std::size_t j = 0; j < sum.size(); ++j) {
      const double m = sum[j] / n;
      const double var = std::max(0.0, sumsq[j] / n - m * m);
      const double s = count > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
      if (std::abs(m) >= best) {
        best = std::abs(m);
        se = s;
      }
    }
    return {best, se};
  }
};

namespace detail {

inline void append_products(std::vector<double>& out, const Vec& y, const Vec& z) {
  for (Eigen::Index a = 0; a < y.size(); ++a)
    for (Eigen::Index b = 0; b < z.size(); ++b) out.push_back(y[a] * z[b]);
}

inline void append_products(std::vector<double>& out, const Vec& y) {
  for (Eigen::Index a = 0; a < y.size(); ++a) out.push_back(y[a]);
}

}  // namespace detail

// Per-step projection statistics. value[k] is the largest |mean(Y Z)| over
// players and test variables, se[k] its standard error.
struct ProjectionReport {
  std::string name;
  std::vector<int> steps;
  std::vector<double> value, se;
  double max_value = 0.0;

  double band_excess(double c_delta) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < value.size(); ++j)
      worst = std::max(worst, value[j] - (c_delta + 3.0 * se[j]));
    return worst;
  }
};

// Residual of p_{i,k-1} = E_{k-1}[A_k' p_{i,k}] + delta Q_i x_k per unit time,
// projected on 1 and the window of x_k, for non-provisional k.
inline ProjectionReport fbsde_residual_test(const RiccatiLadder& ladder, const GameSpec& spec,
                                            const LinearClosedLoop& loop, int n_paths,
                                            std::uint64_t seed) {
  const Grid& g = ladder.grid;
  const double dt = g.delta;
  const int D = g.gap();
  const Mat AhT = loop.Ahat.transpose();
  const Mat AbT = spec.Abar.transpose();
  std::vector<ProjectionAccumulator> acc(g.N + 1);
  for (int path = 0; path < n_paths; ++path) {
    const Trajectory tr = simulate_path(loop, spec.x0, seed, path);
    const CostateSeries cs = costate_reconstruct(ladder, loop, tr);
    for (int k = std::max(g.d1, 1); k <= g.N; ++k) {
      const auto& W = tr.windows[k];
      std::vector<double> v;
      for (int i = 0; i < 2; ++i) {
        const Vec prev = detail::costate_from_window(ladder.layer(k), W, i, D);
        const Vec r = (prev - AhT * cs.p0[i][k] - dt * AbT * cs.p1[i][k] -
                       dt * spec.Q(i + 1) * W[g.d1]) / dt;
        detail::append_products(v, r);
        for (const Vec& z : W) detail::append_products(v, r, z);
      }
      acc[k].add(v);
    }
  }
  ProjectionReport rep;
  rep.name = "fbsde";
  for (int k = std::max(g.d1, 1); k <= g.N; ++k) {
    const auto [m, s] = acc[k].worst();
    rep.steps.push_back(k);
    rep.value.push_back(m);
    rep.se.push_back(s);
    rep.max_value = std::max(rep.max_value, m);
  }
  return rep;
}

// Projections of R_i u_i + B_i' p_i + Bbar_i' q_i on player i's information
// (1 and window entries at level <= k - d_i - 1), for non-provisional k.
inline ProjectionReport stationarity_residual_test(const RiccatiLadder& ladder, const GameSpec& spec,
                                                   const LinearClosedLoop& loop, int n_paths,
                                                   std::uint64_t seed) {
  const Grid& g = ladder.grid;
  const int D = g.gap();
  std::vector<ProjectionAccumulator> acc(g.N + 1);
  for (int path = 0; path < n_paths; ++path) {
    const Trajectory tr = simulate_path(loop, spec.x0, seed, path);
    const CostateSeries cs = costate_reconstruct(ladder, loop, tr);
    for (int k = g.d1; k <= g.N; ++k) {
      const auto& W = tr.windows[k];
      std::vector<double> v;
      for (int i = 0; i < 2; ++i) {
        const Vec& u = i == 0 ? tr.u1[k] : tr.u2[k];
        const Vec s = spec.R(i + 1) * u + spec.B(i + 1).transpose() * cs.p0[i][k] +
                      spec.Bbar(i + 1).transpose() * cs.q[i][k];
        detail::append_products(v, s);
        const int top = i == 0 ? 0 : D;
        for (int o = 0; o <= top; ++o) detail::append_products(v, s, W[o]);
      }
      acc[k].add(v);
    }
  }
  ProjectionReport rep;
  rep.name = "stationarity";
  for (int k = g.d1; k <= g.N; ++k) {
    const auto [m, s] = acc[k].worst();
    rep.steps.push_back(k);
    rep.value.push_back(m);
    rep.se.push_back(s);
    rep.max_value = std::max(rep.max_value, m);
  }
  return rep;
}

struct DeviationVerdict {
  int player = 1;
  std::string description;
  MeanEstimate J_base, J_dev;
  double margin = 0.0;
  double combined_se = 0.0;
  double z_score = 0.0;
  bool pass = false;
};

// Common-random-number comparison of each deviation against the equilibrium.
inline std::vector<DeviationVerdict> nash_deviation_test(const LinearClosedLoop& loop,
                                                         const GameSpec& spec, int n_paths,
                                                         std::uint64_t seed,
                                                         const std::vector<ControlPerturbation>& devs) {
  const Grid& g = loop.grid;
  const int D = g.gap();
  std::vector<std::vector<double>> base(devs.size()), dev(devs.size()), diff(devs.size());
  for (int path = 0; path < n_paths; ++path) {
    const Trajectory tr = simulate_path(loop, spec.x0, seed, path);
    const double j1 = path_cost(spec, g, tr, 1);
    const double j2 = path_cost(spec, g, tr, 2);
    for (std::size_t d = 0; d < devs.size(); ++d) {
      const ControlPerturbation& p = devs[d];
      std::vector<Vec> u1 = tr.u1;
      std::vector<Vec> u2 = tr.u2;
      (p.player == 1 ? u1 : u2) = perturbed_controls(tr, p, g, D);
      const Trajectory alt = replay_controls(spec, g, tr.dw, std::move(u1), std::move(u2));
      const double jb = p.player == 1 ? j1 : j2;
      const double jd = path_cost(spec, g, alt, p.player);
      base[d].push_back(jb);
      dev[d].push_back(jd);
      diff[d].push_back(jd - jb);
    }
  }
  std::vector<DeviationVerdict> out;
  for (std::size_t d = 0; d < devs.size(); ++d) {
    DeviationVerdict v;
    v.player = devs[d].player;
    v.description = devs[d].label;
    v.J_base = mean_and_se(base[d]);
    v.J_dev = mean_and_se(dev[d]);
    const MeanEstimate md = mean_and_se(diff[d]);
    v.margin = md.mean;
    v.combined_se = md.se;
    v.z_score = md.se > 0.0 ? md.mean / md.se : 0.0;
    v.pass = v.margin >= -3.0 * md.se;
    out.push_back(v);
  }
  return out;
}

inline std::vector<ControlPerturbation> standard_deviations(int player) {
  std::vector<ControlPerturbation> out = {
      perturb_control(player, PerturbKind::constant_shift, 0.1),
      perturb_control(player, PerturbKind::constant_shift, -0.1),
      perturb_control(player, PerturbKind::gain_scale, 0.9),
      perturb_control(player, PerturbKind::gain_scale, 1.1),
      perturb_control(player, PerturbKind::time_bump, 0.1),
  };
  return out;
}

// Classical open-loop Nash game without delays, integrated backwards by RK4:
//   -dP_i/dt = P_i (A + B K) + A' P_i + Abar' P_i (Abar + Bbar K) + Q_i,
// with u = K x solving the coupled stationarity pair.
struct ClassicalGame {
  std::vector<double> t;
  std::array<std::vector<Mat>, 2> P;
  std::vector<Mat> K1, K2;
};

namespace detail {

inline std::pair<Mat, Mat> classical_gain(const GameSpec& s, const Mat& P1, const Mat& P2) {
  const auto m1 = s.m1();
  const auto m2 = s.m2();
  Mat lhs(m1 + m2, m1 + m2);
  lhs << s.R1 + s.B1bar.transpose() * P1 * s.B1bar, s.B1bar.transpose() * P1 * s.B2bar,
      s.B2bar.transpose() * P2 * s.B1bar, s.R2 + s.B2bar.transpose() * P2 * s.B2bar;
  Mat rhs(m1 + m2, s.n());
  rhs << s.B1.transpose() * P1 + s.B1bar.transpose() * P1 * s.Abar,
      s.B2.transpose() * P2 + s.B2bar.transpose() * P2 * s.Abar;
  const Mat K = -lhs.partialPivLu().solve(rhs);
  return {K.topRows(m1), K.bottomRows(m2)};
}

inline std::array<Mat, 2> classical_rhs(const GameSpec& s, const std::array<Mat, 2>& P) {
  const auto [K1, K2] = classical_gain(s, P[0], P[1]);
  const Mat F = s.A + s.B1 * K1 + s.B2 * K2;
  const Mat Fb = s.Abar + s.B1bar * K1 + s.B2bar * K2;
  std::array<Mat, 2> out;
  for (int i = 0; i < 2; ++i)
    out[i] = P[i] * F + s.A.transpose() * P[i] + s.Abar.transpose() * P[i] * Fb + s.Q(i + 1);
  return out;
}

}  // namespace detail

// Samples the classical solution at t_k = k*T/steps, each interval split into
// `substeps` RK4 steps.
inline ClassicalGame solve_classical_game(const GameSpec& s, int steps, int substeps) {
  ClassicalGame out;
  const double T = s.T;
  const double h = T / (static_cast<double>(steps) * substeps);
  out.t.resize(steps + 1);
  for (int i = 0; i < 2; ++i) out.P[i].resize(steps + 1);
  out.K1.resize(steps + 1);
  out.K2.resize(steps + 1);
  std::array<Mat, 2> P = {s.H1, s.H2};
  auto record = [&](int k) {
    out.t[k] = T * k / steps;
    out.P[0][k] = P[0];
    out.P[1][k] = P[1];
    const auto [K1, K2] = detail::classical_gain(s, P[0], P[1]);
    out.K1[k] = K1;
    out.K2[k] = K2;
  };
  record(steps);
  auto axpy = [](const std::array<Mat, 2>& a, double c, const std::array<Mat, 2>& b) {
    return std::array<Mat, 2>{a[0] + c * b[0], a[1] + c * b[1]};
  };
  for (int k = steps - 1; k >= 0; --k) {
    for (int j = 0; j < substeps; ++j) {
      // Backward in time: dP/d(-t) = rhs.
      const auto k1 = detail::classical_rhs(s, P);
      const auto k2 = detail::classical_rhs(s, axpy(P, 0.5 * h, k1));
      const auto k3 = detail::classical_rhs(s, axpy(P, 0.5 * h, k2));
      const auto k4 = detail::classical_rhs(s, axpy(P, h, k3));
      for (int i = 0; i < 2; ++i) P[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    record(k);
  }
  return out;
}

// Largest gap between the delayed gains at h1 = 2*delta, h2 = delta and the
// classical gains, over all samples. Player 2's delayed gain is the sum of
// its three parts.
inline double no_delay_gap(const GameSpec& base, double delta) {
  GameSpec s = base;
  s.h1 = 2.0 * delta;
  s.h2 = delta;
  const Grid g = build_grid(s, delta);
  const FeedbackLaw law = assemble_gains(extract_fields(backward_sweep(s, g)), s);
  const ClassicalGame cg = solve_classical_game(s, g.N + 1, 8);
  double gap = 0.0;
  for (int k = 0; k <= g.N + 1; ++k) {
    const Mat K2 = law.K2_h1[k] + detail::trapezoid(law.K2_kernel[k], 0, g.gap(), g.delta) +
                   law.K2_h2[k];
    gap = std::max(gap, detail::max_abs(law.K1[k] - cg.K1[k]));
    gap = std::max(gap, detail::max_abs(K2 - cg.K2[k]));
  }
  return gap;
}

// Largest distance of a level-coupling factor from the identity over the
// non-provisional steps of a ladder swept with diagnostics kept.
inline double z_factor_distance(const RiccatiLadder& ladder) {
  double worst = 0.0;
  for (const ClosedLoopStep& cl : ladder.closed_loop) {
    if (cl.provisional) continue;
    for (std::size_t m = 1; m < cl.z_factors.size(); ++m) {
      const Mat& Z = cl.z_factors[m];
      worst = std::max(worst, detail::max_abs(Z - Mat::Identity(Z.rows(), Z.cols())));
    }
  }
  return worst;
}

// Pathwise distance between the ladder and gain representations under
// common increments: max over paths and steps of |x_ladder - x_gains|.
inline double cross_representation_gap(const RiccatiLadder& ladder, const FeedbackLaw& law,
                                       const GameSpec& spec, int n_paths, std::uint64_t seed) {
  const LinearClosedLoop a = loop_from_ladder(ladder, spec);
  const LinearClosedLoop b = loop_from_gains(law, spec);
  double worst = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    const auto dw = draw_increments(ladder.grid, seed, p);
    const Trajectory ta = simulate_increments(a, spec.x0, dw, false);
    const Trajectory tb = simulate_increments(b, spec.x0, dw, false);
    for (std::size_t k = 0; k < ta.x.size(); ++k)
      worst = std::max(worst, (ta.x[k] - tb.x[k]).cwiseAbs().maxCoeff());
  }
  return worst;
}

// Fault injection: zeroes the Riccati matrices of layer k as it is produced.
inline LayerHook zeroed_layer(int k) {
  return [k](RiccatiLayer& layer) {
    if (layer.k != k) return;
    for (int i = 0; i < 2; ++i) {
      layer.Phat[i].setZero();
      for (Mat& m : layer.Phat_lag[i]) m.setZero();
      for (Mat& m : layer.Ccheck_lag[i]) m.setZero();
    }
    const int d1 = static_cast<int>(layer.Phat_lag[0].size()) - 1;
    const int d2 = static_cast<int>(layer.Ccheck_lag[0].size()) - 1;
    detail::fill_aggregates(layer, d1, d2);
  };
}

}  // namespace delaygame

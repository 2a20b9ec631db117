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

// Backward Riccati sweep for the discretized delayed game.
//
// Time steps t_k = k*delta, k = 0..N+1. The filtration F_k is generated by
// dw_0..dw_k, so x_{k+1} is F_k-measurable. Levels below zero are the trivial
// sigma-algebra. Write D = d1 - d2 and, for a closed-loop step producing
// x_s from x_{s-1}, l_m = s - d1 - 2 + m for m = 0..D. Then
//
//   x_s = A_{s-1} x_{s-1} + sum_m C_m(dw_{s-1}) E_{l_m}[x_{s-1}],
//
// with C_0 = M, C_m = M^m (0 < m < D) and C_D = H. The costate is
//
//   p_{i,k-1} = P_{i,k} x_k + sum_{j=0}^{d1} Plag_{i,k}[j] E_{k-d1-1+j}[x_k]
//                          + sum_{j=0}^{d2} Clag_{i,k}[j] E_{k-d2-1+j}[x_k].
//
// Player indices are zero-based in every array: [0] is player 1.

#pragma once

#include "delaygame/common.hpp"
#include "delaygame/model.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <functional>
#include <vector>

namespace delaygame {

// X(dw) = const_part + dw * noise_part.
struct AffineMatrix {
  Mat const_part;
  Mat noise_part;

  static AffineMatrix zero(Eigen::Index rows, Eigen::Index cols) {
    return {Mat::Zero(rows, cols), Mat::Zero(rows, cols)};
  }
  Mat at(double dw) const { return const_part + dw * noise_part; }
  Eigen::Index rows() const { return const_part.rows(); }
  Eigen::Index cols() const { return const_part.cols(); }
  bool is_zero() const { return const_part.isZero(0.0) && noise_part.isZero(0.0); }
};

// E[X(dw) Y(dw)] using E[dw] = 0 and E[dw^2] = delta only.
inline Mat expectation_of_product(const AffineMatrix& X, const AffineMatrix& Y, double delta) {
  return X.const_part * Y.const_part + delta * X.noise_part * Y.noise_part;
}

struct RiccatiLayer {
  int k = 0;
  bool provisional = false;
  std::array<Mat, 2> Phat;
  std::array<std::vector<Mat>, 2> Phat_lag;    // j = 0..d1
  std::array<std::vector<Mat>, 2> Ccheck_lag;  // j = 0..d2
  std::array<Mat, 2> Shat, Scheck;
  // Sm[i][m] = P + sum_{j >= max(m-1, 0)} Plag[j] + sum_j Clag[j], m = 0..D.
  // Shat = Sm[i][1] and Scheck = Sm[i][D].
  std::array<std::vector<Mat>, 2> Sm;
  Mat GammaHat, GammaCheck, G;
  std::vector<Mat> GammaM;  // used for 0 < m < D
  double rcond_min = 1.0;
};

struct Blocks {
  Mat GammaHat, GammaCheck, G;
  std::vector<Mat> GammaM;
  double rcond_min = 1.0;
};

struct ClosedLoopStep {
  int k = 0;
  bool provisional = false;
  AffineMatrix A_k;
  std::vector<AffineMatrix> C;  // m = 0..D
  // Controls as functions of the estimates of x_k: u1 = U1 E_{l_0}[x_k],
  // u2 = sum_r U2[r] E_{l_r}[x_k].
  Mat U1;
  std::vector<Mat> U2;
  // L[m][r]: maps E_{l_r}[x_k] to the solved pair at level m.
  std::vector<std::vector<Mat>> level_maps;
  // Level-coupling factors, one per intermediate level 0 < m < D.
  std::vector<Mat> z_factors;

  const AffineMatrix& M() const { return C.front(); }
  const AffineMatrix& H() const { return C.back(); }
  AffineMatrix Mm(int m) const {
    if (m <= 0 || m >= static_cast<int>(C.size()) - 1) return AffineMatrix::zero(A_k.rows(), A_k.cols());
    return C[m];
  }
};

struct RiccatiLadder {
  Grid grid;
  std::vector<RiccatiLayer> layers;         // k = 0..N+1
  std::vector<ClosedLoopStep> closed_loop;  // k = 0..N, producing x_{k+1}

  const RiccatiLayer& layer(int k) const { return layers.at(k); }
  const ClosedLoopStep& step(int k) const { return closed_loop.at(k); }
};

namespace detail {

// Solves with a partially pivoted LU, rejecting near-singular matrices.
struct CheckedLU {
  Eigen::PartialPivLU<Mat> lu;
  double rcond = 0.0;

  CheckedLU(const Mat& m, int k, const char* which) : lu(m) {
    rcond = lu.rcond();
    if (!(rcond >= kSingularRcond)) throw SingularGamma(k, which, rcond);
  }
  Mat solve(const Mat& rhs) const { return lu.solve(rhs); }
  // rows * m^{-1}
  Mat solve_left(const Mat& rows) const {
    const Mat rt = rows.transpose();
    const Mat x = lu.transpose().solve(rt);
    return x.transpose();
  }
};

inline Mat stack(const Mat& top, const Mat& bottom) {
  Mat out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

inline Mat block2(const Mat& a, const Mat& b, const Mat& c, const Mat& d) {
  Mat out(a.rows() + c.rows(), a.cols() + b.cols());
  out << a, b, c, d;
  return out;
}

inline void fill_aggregates(RiccatiLayer& layer, int d1, int d2) {
  const int D = d1 - d2;
  for (int i = 0; i < 2; ++i) {
    Mat csum = Mat::Zero(layer.Phat[i].rows(), layer.Phat[i].cols());
    for (int j = 0; j <= d2; ++j) csum += layer.Ccheck_lag[i][j];
    layer.Sm[i].assign(D + 1, Mat());
    Mat tail = layer.Phat[i] + csum;
    // Accumulate from the deepest lag down so Sm[m] includes j >= m-1.
    for (int j = d1; j >= D - 1 && j >= 0; --j) tail += layer.Phat_lag[i][j];
    layer.Sm[i][D] = tail;
    for (int m = D - 1; m >= 0; --m) {
      if (m >= 1) tail += layer.Phat_lag[i][m - 1];
      layer.Sm[i][m] = tail;
    }
    layer.Shat[i] = layer.Sm[i][std::min(1, D)];
    layer.Scheck[i] = layer.Sm[i][D];
  }
}

}  // namespace detail

inline RiccatiLayer terminal_layer(const GameSpec& spec, const Grid& grid) {
  const auto n = spec.n();
  RiccatiLayer layer;
  layer.k = grid.N + 1;
  layer.Phat = {spec.H1, spec.H2};
  for (int i = 0; i < 2; ++i) {
    layer.Phat_lag[i].assign(grid.d1 + 1, Mat::Zero(n, n));
    layer.Ccheck_lag[i].assign(grid.d2 + 1, Mat::Zero(n, n));
  }
  detail::fill_aggregates(layer, grid.d1, grid.d2);
  return layer;
}

inline Blocks assemble_blocks(const RiccatiLayer& layer, const ReducedCoefficients& c, const Grid& grid) {
  const double dt = grid.delta;
  const int D = grid.gap();
  const auto n = layer.Phat[0].rows();
  const Mat I = Mat::Identity(n, n);
  const Mat& P1 = layer.Phat[0];
  const Mat& P2 = layer.Phat[1];
  const Mat& S1 = layer.Shat[0];
  const Mat& S2 = layer.Shat[1];
  const Mat& Sc2 = layer.Scheck[1];

  Blocks b;
  b.GammaHat = detail::block2(I - dt * c.B11 * S1 - dt * c.B12 * S2, -(c.B21 * P1 + c.B22 * P2),
                              -dt * (c.Bbar11 * S1 + c.Bbar12 * S2),
                              I - c.Bbar21 * P1 - c.Bbar22 * P2);
  auto level_block = [&](const Mat& S) {
    return detail::block2(I - dt * c.B12 * S, -c.B22 * P2, -dt * c.Bbar12 * S, I - c.Bbar22 * P2);
  };
  b.GammaCheck = level_block(Sc2);
  b.GammaM.assign(D, Mat());
  for (int m = 1; m < D; ++m) b.GammaM[m] = level_block(layer.Sm[1][m]);
  b.G = detail::block2(dt * c.B11 * S1, c.B21 * P1, dt * c.Bbar11 * S1, c.Bbar21 * P1);

  b.rcond_min = detail::CheckedLU(b.GammaHat, layer.k, "GammaHat").rcond;
  b.rcond_min = std::min(b.rcond_min, detail::CheckedLU(b.GammaCheck, layer.k, "GammaCheck").rcond);
  for (int m = 1; m < D; ++m)
    b.rcond_min = std::min(b.rcond_min, detail::CheckedLU(b.GammaM[m], layer.k, "GammaM").rcond);
  return b;
}


// Data shared by every step of one sweep.
struct EngineContext {
  GameSpec spec;
  ReducedCoefficients coeffs;
  Grid grid;
  Mat Ahat;
  Eigen::LLT<Mat> R1, R2;
  // Keep the level maps and level-coupling factors of every step. Both cost
  // O((d1-d2)^3) per step.
  bool keep_diagnostics = false;

  EngineContext(const GameSpec& s, const Grid& g, bool diagnostics = false)
      : spec(s), coeffs(reduce_coefficients(s)), grid(g), R1(s.R1), R2(s.R2),
        keep_diagnostics(diagnostics) {
    Ahat = Mat::Identity(s.n(), s.n()) + g.delta * s.A;
  }
};

// Solves the chain of estimate systems for the step producing x_s, s = k+1,
// using the blocks and lags of `next` (layer s).
inline ClosedLoopStep solve_estimate_chain(const RiccatiLayer& next, const EngineContext& ctx,
                                           int k) {
  const GameSpec& spec = ctx.spec;
  const ReducedCoefficients& c = ctx.coeffs;
  const double dt = ctx.grid.delta;
  const int D = ctx.grid.gap();
  const auto n = spec.n();
  const Mat calA = detail::stack(ctx.Ahat, dt * spec.Abar);
  const Mat Zn = Mat::Zero(n, n);

  detail::CheckedLU lu_hat(next.GammaHat, k, "GammaHat");
  detail::CheckedLU lu_check(next.GammaCheck, k, "GammaCheck");
  std::vector<detail::CheckedLU> lu_mid;
  lu_mid.reserve(D);
  for (int m = 1; m < D; ++m) lu_mid.emplace_back(next.GammaM[m], k, "GammaM");
  auto solve_level = [&](int m, const Mat& rhs) -> Mat {
    if (m == 0) return lu_hat.solve(rhs);
    if (m == D) return lu_check.solve(rhs);
    return lu_mid[m - 1].solve(rhs);
  };

  const auto& lag2 = next.Phat_lag[1];
  std::vector<Mat> K(D);
  for (int m = 1; m < D; ++m)
    K[m] = detail::block2(dt * c.B12 * lag2[m - 1], Zn, dt * c.Bbar12 * lag2[m - 1], Zn);

  const Mat L00 = solve_level(0, calA);

  // Control rows acting on the solved pairs (a_m, b_m).
  const Mat V1 = -ctx.R1.solve(
      (Mat(spec.m1(), 2 * n) << spec.B1.transpose() * next.Shat[0],
       spec.B1bar.transpose() * next.Phat[0] / dt).finished());
  std::vector<Mat> V2(D + 1);
  for (int m = 1; m < D; ++m)
    V2[m] = -ctx.R2.solve((Mat(spec.m2(), 2 * n) << spec.B2.transpose() * lag2[m - 1],
                           Mat::Zero(spec.m2(), n)).finished());
  V2[D] = -ctx.R2.solve((Mat(spec.m2(), 2 * n) << spec.B2.transpose() * next.Scheck[1],
                         spec.B2bar.transpose() * next.Phat[1] / dt).finished());

  ClosedLoopStep cl;
  cl.k = k;
  cl.provisional = k < ctx.grid.d1;
  cl.A_k = {ctx.Ahat, spec.Abar};
  cl.U1 = V1 * L00;
  cl.U2.assign(D + 1, Mat::Zero(spec.m2(), n));

  if (ctx.keep_diagnostics) {
    std::vector<std::vector<Mat>> L(D + 1, std::vector<Mat>(D + 1, Mat::Zero(2 * n, n)));
    L[0][0] = L00;
    for (int m = 1; m <= D; ++m) {
      L[m][m] = solve_level(m, calA);
      for (int r = 0; r < m; ++r) {
        Mat rhs = Mat::Zero(2 * n, n);
        if (r == 0) rhs += next.G * L[0][0];
        for (int q = std::max(r, 1); q < m && q < D; ++q) rhs += K[q] * L[q][r];
        L[m][r] = solve_level(m, rhs);
      }
    }
    for (int r = 0; r <= D; ++r)
      for (int m = std::max(r, 1); m <= D; ++m) cl.U2[r] += V2[m] * L[m][r];
    cl.level_maps = std::move(L);

    // J[r] carries level m into level r through the intermediate kernels.
    cl.z_factors.assign(D, Mat());
    for (int m = 1; m < D; ++m) {
      std::vector<Mat> J(D);
      Mat Z = Mat::Identity(2 * n, 2 * n);
      for (int r = m + 1; r < D; ++r) {
        Mat rhs = K[m];
        for (int q = m + 1; q < r; ++q) rhs += K[q] * J[q];
        J[r] = solve_level(r, rhs);
        Z += J[r];
      }
      cl.z_factors[m] = std::move(Z);
    }
  } else {
    // Adjoint pass: nu_m = (V2[m] + sum_{m' > m} nu_{m'} K_m) Gamma_m^{-1}.
    Mat tail = Mat::Zero(spec.m2(), 2 * n);
    Mat nu_sum = Mat::Zero(spec.m2(), 2 * n);
    for (int m = D; m >= 1; --m) {
      Mat theta = V2[m];
      if (m < D) theta += tail * K[m];
      const Mat nu = m == D ? lu_check.solve_left(theta) : lu_mid[m - 1].solve_left(theta);
      cl.U2[m] = nu * calA;
      tail += nu;
      nu_sum += nu;
    }
    cl.U2[0] = nu_sum * next.G * L00;
  }

  cl.C.resize(D + 1);
  for (int r = 0; r <= D; ++r) {
    AffineMatrix Cr{dt * spec.B2 * cl.U2[r], spec.B2bar * cl.U2[r]};
    if (r == 0) {
      Cr.const_part += dt * spec.B1 * cl.U1;
      Cr.noise_part += spec.B1bar * cl.U1;
    }
    cl.C[r] = std::move(Cr);
  }
  return cl;
}

// Layer k from layer k+1 and the closed-loop step k.
inline RiccatiLayer riccati_step(const RiccatiLayer& next, const ClosedLoopStep& cl,
                                 const EngineContext& ctx, int k) {
  const GameSpec& spec = ctx.spec;
  const Grid& g = ctx.grid;
  const double dt = g.delta;
  const int D = g.gap();
  const auto n = spec.n();
  const Mat& Ah = ctx.Ahat;
  const Mat AhT = Ah.transpose();
  const Mat AbT = spec.Abar.transpose();

  RiccatiLayer layer;
  layer.k = k;
  layer.provisional = k < g.d1;
  for (int i = 0; i < 2; ++i) {
    const Mat& P = next.Phat[i];
    const auto& lag = next.Phat_lag[i];
    const auto& cc = next.Ccheck_lag[i];
    const auto& S = next.Sm[i];

    layer.Phat[i] = AhT * (P + lag[g.d1] + cc[g.d2]) * Ah + dt * AbT * P * spec.Abar +
                    dt * spec.Q(i + 1);

    auto& out = layer.Phat_lag[i];
    out.assign(g.d1 + 1, Mat::Zero(n, n));
    out[0] = AhT * S[std::min(1, D)] * cl.C[0].const_part + dt * AbT * P * cl.C[0].noise_part;
    for (int m = 1; m < D; ++m) {
      Mat carry = Ah;
      for (int j = m; j <= D; ++j) carry += cl.C[j].const_part;
      out[m] = AhT * S[m + 1] * cl.C[m].const_part + dt * AbT * P * cl.C[m].noise_part +
               AhT * lag[m - 1] * carry;
    }
    for (int m = std::max(D, 1); m <= g.d1; ++m) out[m] = AhT * lag[m - 1] * Ah;

    auto& cout_ = layer.Ccheck_lag[i];
    cout_.assign(g.d2 + 1, Mat::Zero(n, n));
    cout_[0] = AhT * S[D] * cl.C[D].const_part + dt * AbT * P * cl.C[D].noise_part;
    for (int m = 1; m <= g.d2; ++m) cout_[m] = AhT * cc[m - 1] * Ah;

    for (int j = 0; j <= g.d1; ++j)
      if (k + j > g.N) out[j].setZero();
    for (int j = 0; j <= g.d2; ++j)
      if (k + j > g.N) cout_[j].setZero();
  }
  detail::fill_aggregates(layer, g.d1, g.d2);
  return layer;
}

namespace detail {

inline void attach_blocks(RiccatiLayer& layer, const EngineContext& ctx) {
  Blocks b = assemble_blocks(layer, ctx.coeffs, ctx.grid);
  layer.GammaHat = std::move(b.GammaHat);
  layer.GammaCheck = std::move(b.GammaCheck);
  layer.GammaM = std::move(b.GammaM);
  layer.G = std::move(b.G);
  layer.rcond_min = b.rcond_min;
}

}  // namespace detail

// Optional hook applied to each finished layer; used to inject faults.
using LayerHook = std::function<void(RiccatiLayer&)>;

inline RiccatiLadder backward_sweep(const EngineContext& ctx, const LayerHook& hook = {}) {
  const Grid& g = ctx.grid;
  RiccatiLadder ladder;
  ladder.grid = g;
  ladder.layers.resize(g.N + 2);
  ladder.closed_loop.resize(g.N + 1);

  RiccatiLayer last = terminal_layer(ctx.spec, g);
  detail::attach_blocks(last, ctx);
  ladder.layers[g.N + 1] = std::move(last);
  for (int k = g.N; k >= 0; --k) {
    const RiccatiLayer& next = ladder.layers[k + 1];
    ladder.closed_loop[k] = solve_estimate_chain(next, ctx, k);
    RiccatiLayer layer = riccati_step(next, ladder.closed_loop[k], ctx, k);
    if (hook) hook(layer);
    detail::attach_blocks(layer, ctx);
    ladder.layers[k] = std::move(layer);
  }
  return ladder;
}

inline RiccatiLadder backward_sweep(const GameSpec& spec, const Grid& grid) {
  return backward_sweep(EngineContext(spec, grid));
}

}  // namespace delaygame

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

// Game data, its validation, the reduction of the control terms to the eight
// n x n products that drive the coupled forward-backward system, and
// construction of time grids on which both delays are whole step counts.

#pragma once

#include "delaygame/common.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace delaygame {

// Two-player linear-quadratic game with scalar Brownian noise:
//   dx = (A x + B1 u1 + B2 u2) dt + (Abar x + B1bar u1 + B2bar u2) dw,
//   J_i = 1/2 E[ int (x'Q_i x + u_i'R_i u_i) dt + x(T)'H_i x(T) ],
// where player i acts on information delayed by h_i.
struct GameSpec {
  Mat A, Abar;
  Mat B1, B1bar, B2, B2bar;
  Mat Q1, Q2, H1, H2;
  Mat R1, R2;
  double h1 = 0.0;
  double h2 = 0.0;
  double T = 0.0;
  Vec x0;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m1() const { return B1.cols(); }
  Eigen::Index m2() const { return B2.cols(); }
  const Mat& Q(int player) const { return player == 1 ? Q1 : Q2; }
  const Mat& H(int player) const { return player == 1 ? H1 : H2; }
  const Mat& R(int player) const { return player == 1 ? R1 : R2; }
  const Mat& B(int player) const { return player == 1 ? B1 : B2; }
  const Mat& Bbar(int player) const { return player == 1 ? B1bar : B2bar; }
};

struct ValidationReport {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
  std::string str() const {
    std::ostringstream os;
    for (const auto& f : failures) os << f << "\n";
    return os.str();
  }
};

// Smallest eigenvalue of the symmetric part of a square matrix.
inline double min_eigenvalue(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace detail {

inline bool is_symmetric(const Mat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

// Semi-definiteness accepts a smallest eigenvalue down to -1e-10.
inline constexpr double kSemiDefiniteTol = -1e-10;

inline ValidationReport validate(const GameSpec& spec) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.failures.push_back(std::move(msg)); };

  const auto n = spec.A.rows();
  auto check_dims = [&](const Mat& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      fail(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
           std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
      return false;
    }
    return true;
  };

  bool dims_ok = true;
  if (n == 0 || spec.A.cols() != n) {
    fail("A must be a non-empty square matrix");
    return report;
  }
  dims_ok &= check_dims(spec.Abar, n, n, "Abar");
  const auto m1 = spec.B1.cols();
  const auto m2 = spec.B2.cols();
  if (m1 == 0) fail("B1 must have at least one column");
  if (m2 == 0) fail("B2 must have at least one column");
  dims_ok &= check_dims(spec.B1, n, m1, "B1");
  dims_ok &= check_dims(spec.B1bar, n, m1, "B1bar");
  dims_ok &= check_dims(spec.B2, n, m2, "B2");
  dims_ok &= check_dims(spec.B2bar, n, m2, "B2bar");
  dims_ok &= check_dims(spec.Q1, n, n, "Q1");
  dims_ok &= check_dims(spec.Q2, n, n, "Q2");
  dims_ok &= check_dims(spec.H1, n, n, "H1");
  dims_ok &= check_dims(spec.H2, n, n, "H2");
  dims_ok &= check_dims(spec.R1, m1, m1, "R1");
  dims_ok &= check_dims(spec.R2, m2, m2, "R2");
  if (spec.x0.size() != n) {
    fail("x0 has length " + std::to_string(spec.x0.size()) + ", expected " + std::to_string(n));
    dims_ok = false;
  }

  if (!(spec.h2 > 0.0)) fail("delays must satisfy 0 < h2");
  if (!(spec.h2 < spec.h1)) fail("delays must satisfy h2 < h1");
  if (!(spec.h1 < spec.T)) fail("delays must satisfy h1 < T");

  if (!dims_ok) return report;

  auto semidefinite = [&](const Mat& m, const char* name) {
    if (!detail::is_symmetric(m)) fail(std::string(name) + " not symmetric");
    const double ev = min_eigenvalue(m);
    if (ev < kSemiDefiniteTol)
      fail(std::string(name) + " not positive semi-definite (smallest eigenvalue " +
           detail::fmt(ev) + ")");
  };
  auto definite = [&](const Mat& m, const char* name) {
    if (!detail::is_symmetric(m)) fail(std::string(name) + " not symmetric");
    const double ev = min_eigenvalue(m);
    if (!(ev > 0.0))
      fail(std::string(name) + " not positive definite (smallest eigenvalue " + detail::fmt(ev) +
           ")");
  };
  semidefinite(spec.Q1, "Q1");
  semidefinite(spec.Q2, "Q2");
  semidefinite(spec.H1, "H1");
  semidefinite(spec.H2, "H2");
  definite(spec.R1, "R1");
  definite(spec.R2, "R2");

  auto finite = [&](const Mat& m, const char* name) {
    if (!m.allFinite()) fail(std::string(name) + " has non-finite entries");
  };
  finite(spec.A, "A");
  finite(spec.Abar, "Abar");
  finite(spec.B1, "B1");
  finite(spec.B1bar, "B1bar");
  finite(spec.B2, "B2");
  finite(spec.B2bar, "B2bar");
  if (!spec.x0.allFinite()) fail("x0 has non-finite entries");
  return report;
}

// The B-products of the reduced forward equation. With S_i = R_i^{-1}:
//   B11 = -B1 S1 B1',     B12 = -B2 S2 B2',
//   B21 = -B1 S1 B1bar',  B22 = -B2 S2 B2bar',
//   Bbar11 = -B1bar S1 B1',    Bbar12 = -B2bar S2 B2',
//   Bbar21 = -B1bar S1 B1bar', Bbar22 = -B2bar S2 B2bar'.
struct ReducedCoefficients {
  Mat B11, B12, B21, B22;
  Mat Bbar11, Bbar12, Bbar21, Bbar22;
};

inline ReducedCoefficients reduce_coefficients(const GameSpec& spec) {
  Eigen::LLT<Mat> llt1(spec.R1);
  if (llt1.info() != Eigen::Success) throw SingularWeight("R1");
  Eigen::LLT<Mat> llt2(spec.R2);
  if (llt2.info() != Eigen::Success) throw SingularWeight("R2");

  const Mat S1B1t = llt1.solve(spec.B1.transpose());
  const Mat S1B1bart = llt1.solve(spec.B1bar.transpose());
  const Mat S2B2t = llt2.solve(spec.B2.transpose());
  const Mat S2B2bart = llt2.solve(spec.B2bar.transpose());

  ReducedCoefficients c;
  c.B11 = -spec.B1 * S1B1t;
  c.B12 = -spec.B2 * S2B2t;
  c.B21 = -spec.B1 * S1B1bart;
  c.B22 = -spec.B2 * S2B2bart;
  c.Bbar11 = -spec.B1bar * S1B1t;
  c.Bbar12 = -spec.B2bar * S2B2t;
  c.Bbar21 = -spec.B1bar * S1B1bart;
  c.Bbar22 = -spec.B2bar * S2B2bart;
  return c;
}

// Uniform grid 0 = t_0 < ... < t_{N+1} = T with h_i = d_i * delta.
struct Grid {
  int N = 0;
  double delta = 0.0;
  int d1 = 0;
  int d2 = 0;

  double horizon() const { return delta * (N + 1); }
  double time(int k) const { return delta * k; }
  // d1 - d2, the number of player-1 levels strictly between the two delays plus one.
  int gap() const { return d1 - d2; }
};

namespace detail {

// Smallest M <= max_steps with r*M an integer for every ratio r.
inline long commensurate_steps(const std::vector<double>& ratios, long max_steps) {
  for (long m = 1; m <= max_steps; ++m) {
    bool ok = true;
    for (double r : ratios) {
      const double v = r * static_cast<double>(m);
      if (std::abs(v - std::round(v)) > 1e-9) {
        ok = false;
        break;
      }
    }
    if (ok) return m;
  }
  return 0;
}

}  // namespace detail

inline Grid make_grid(double T, double h1, double h2, double delta_target) {
  if (!(delta_target > 0.0)) throw Error("delta_target must be positive");
  if (!(0.0 < h2 && h2 < h1 && h1 < T)) throw Error("delays must satisfy 0 < h2 < h1 < T");
  constexpr long kMaxSteps = 1000000;  // delta >= 1e-6 T
  const long base = detail::commensurate_steps({h1 / T, h2 / T}, kMaxSteps);
  if (base == 0)
    throw IncommensurateDelays("no step >= 1e-6*T divides h1=" + detail::fmt(h1) +
                               ", h2=" + detail::fmt(h2) + " and T=" + detail::fmt(T));
  long steps = base;
  while (T / static_cast<double>(steps) > delta_target * (1.0 + 1e-12)) steps += base;
  if (steps > kMaxSteps) throw IncommensurateDelays("requested delta below 1e-6*T");

  Grid g;
  g.N = static_cast<int>(steps - 1);
  g.delta = T / static_cast<double>(steps);
  g.d1 = static_cast<int>(std::lround(h1 / g.delta));
  g.d2 = static_cast<int>(std::lround(h2 / g.delta));
  if (std::abs(g.d1 * g.delta - h1) > 1e-12 * h1 || std::abs(g.d2 * g.delta - h2) > 1e-12 * h2)
    throw IncommensurateDelays("delays are not whole multiples of delta=" + detail::fmt(g.delta));
  return g;
}

inline Grid build_grid(const GameSpec& spec, double delta_target) {
  return make_grid(spec.T, spec.h1, spec.h2, delta_target);
}

}  // namespace delaygame

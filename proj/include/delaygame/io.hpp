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

// Problem files and flat CSV / text exports.

#pragma once

#include "delaygame/common.hpp"
#include "delaygame/continuous_limit.hpp"
#include "delaygame/discrete_engine.hpp"
#include "delaygame/gains.hpp"
#include "delaygame/model.hpp"
#include "delaygame/simulator.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace delaygame {

class ProblemFileError : public Error {
 public:
  using Error::Error;
};

namespace detail {

// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline Mat matrix_from_json(const nlohmann::json& j, const std::string& key) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ProblemFileError(key + ": expected a nested array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  if (cols == 0) throw ProblemFileError(key + ": rows must be non-empty arrays");
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ProblemFileError(key + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ProblemFileError(key + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

}  // namespace detail

inline GameSpec problem_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProblemFileError("problem file must hold a JSON object");
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw ProblemFileError(std::string("missing key ") + key);
    return j.at(key);
  };
  auto scalar = [&](const char* key) {
    const auto& v = need(key);
    if (!v.is_number()) throw ProblemFileError(std::string(key) + ": expected a number");
    return v.get<double>();
  };
  GameSpec s;
  s.A = detail::matrix_from_json(need("A"), "A");
  s.Abar = detail::matrix_from_json(need("Abar"), "Abar");
  s.B1 = detail::matrix_from_json(need("B1"), "B1");
  s.B1bar = detail::matrix_from_json(need("B1bar"), "B1bar");
  s.B2 = detail::matrix_from_json(need("B2"), "B2");
  s.B2bar = detail::matrix_from_json(need("B2bar"), "B2bar");
  s.Q1 = detail::matrix_from_json(need("Q1"), "Q1");
  s.Q2 = detail::matrix_from_json(need("Q2"), "Q2");
  s.R1 = detail::matrix_from_json(need("R1"), "R1");
  s.R2 = detail::matrix_from_json(need("R2"), "R2");
  s.H1 = detail::matrix_from_json(need("H1"), "H1");
  s.H2 = detail::matrix_from_json(need("H2"), "H2");
  s.h1 = scalar("h1");
  s.h2 = scalar("h2");
  s.T = scalar("T");
  const auto& x0 = need("x0");
  if (!x0.is_array()) throw ProblemFileError("x0: expected an array");
  s.x0.resize(static_cast<Eigen::Index>(x0.size()));
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (!x0[i].is_number()) throw ProblemFileError("x0: non-numeric entry");
    s.x0[static_cast<Eigen::Index>(i)] = x0[i].get<double>();
  }
  return s;
}

inline nlohmann::json problem_to_json(const GameSpec& s) {
  nlohmann::json j;
  j["A"] = detail::matrix_to_json(s.A);
  j["Abar"] = detail::matrix_to_json(s.Abar);
  j["B1"] = detail::matrix_to_json(s.B1);
  j["B1bar"] = detail::matrix_to_json(s.B1bar);
  j["B2"] = detail::matrix_to_json(s.B2);
  j["B2bar"] = detail::matrix_to_json(s.B2bar);
  j["Q1"] = detail::matrix_to_json(s.Q1);
  j["Q2"] = detail::matrix_to_json(s.Q2);
  j["R1"] = detail::matrix_to_json(s.R1);
  j["R2"] = detail::matrix_to_json(s.R2);
  j["H1"] = detail::matrix_to_json(s.H1);
  j["H2"] = detail::matrix_to_json(s.H2);
  j["h1"] = s.h1;
  j["h2"] = s.h2;
  j["T"] = s.T;
  j["x0"] = std::vector<double>(s.x0.data(), s.x0.data() + s.x0.size());
  return j;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProblemFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline GameSpec parse_problem(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProblemFileError(std::string("malformed problem file: ") + e.what());
  }
  return problem_from_json(j);
}

inline GameSpec load_problem(const std::filesystem::path& path) { return parse_problem(read_text(path)); }

namespace detail {

inline void matrix_rows(std::ostream& os, const std::string& prefix, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      os << prefix << ',' << r << ',' << c << ',' << num(m(r, c)) << '\n';
}

}  // namespace detail

inline void write_ladder_csv(std::ostream& os, const RiccatiLadder& ladder) {
  const Grid& g = ladder.grid;
  os << "k,player,kind,lag_index,row,col,value\n";
  for (int k = 0; k <= g.N + 1; ++k) {
    const RiccatiLayer& layer = ladder.layer(k);
    for (int i = 0; i < 2; ++i) {
      const std::string head = std::to_string(k) + ',' + std::to_string(i + 1) + ',';
      detail::matrix_rows(os, head + "Phat,", layer.Phat[i]);
      for (int j = 0; j <= g.d1; ++j)
        detail::matrix_rows(os, head + "Phat_lag," + std::to_string(j), layer.Phat_lag[i][j]);
      for (int j = 0; j <= g.d2; ++j)
        detail::matrix_rows(os, head + "Ccheck_lag," + std::to_string(j), layer.Ccheck_lag[i][j]);
      detail::matrix_rows(os, head + "Shat,", layer.Shat[i]);
      detail::matrix_rows(os, head + "Scheck,", layer.Scheck[i]);
    }
    if (k > g.N) continue;
    const ClosedLoopStep& cl = ladder.step(k);
    const std::string head = std::to_string(k) + ",,";
    detail::matrix_rows(os, head + "M_const,", cl.M().const_part);
    detail::matrix_rows(os, head + "M_noise,", cl.M().noise_part);
    detail::matrix_rows(os, head + "H_const,", cl.H().const_part);
    detail::matrix_rows(os, head + "H_noise,", cl.H().noise_part);
  }
}

inline void write_fields_csv(std::ostream& os, const RiccatiFields& f) {
  os << "t,theta,player,kind,row,col,value\n";
  for (int k = 0; k < f.samples(); ++k) {
    const std::string t = detail::num(f.t_samples[k]);
    for (int i = 0; i < 2; ++i) {
      const std::string p = std::to_string(i + 1);
      detail::matrix_rows(os, t + ",," + p + ",P", f.P[i][k]);
      for (std::size_t j = 0; j < f.Phat[i][k].size(); ++j)
        detail::matrix_rows(os, t + ',' + detail::num(j * f.delta) + ',' + p + ",Phat", f.Phat[i][k][j]);
      for (std::size_t j = 0; j < f.Ccheck[i][k].size(); ++j)
        detail::matrix_rows(os, t + ',' + detail::num(j * f.delta) + ',' + p + ",Ccheck",
                            f.Ccheck[i][k][j]);
      detail::matrix_rows(os, t + ",," + p + ",Shat", f.Shat[i][k]);
      detail::matrix_rows(os, t + ",," + p + ",Scheck", f.Scheck[i][k]);
    }
  }
}

inline void write_gains_csv(std::ostream& os, const FeedbackLaw& law) {
  os << "t,theta,component,row,col,value\n";
  for (int k = 0; k < law.samples(); ++k) {
    const std::string t = detail::num(law.t_samples[k]);
    detail::matrix_rows(os, t + ",,K1", law.K1[k]);
    detail::matrix_rows(os, t + ",,K2_h1", law.K2_h1[k]);
    for (std::size_t j = 0; j < law.K2_kernel[k].size(); ++j)
      detail::matrix_rows(os, t + ',' + detail::num(j * law.grid.delta) + ",K2_kernel", law.K2_kernel[k][j]);
    detail::matrix_rows(os, t + ",,K2_h2", law.K2_h2[k]);
    detail::matrix_rows(os, t + ",,Rt1", law.Rt1[k]);
    detail::matrix_rows(os, t + ",,Rt2", law.Rt2[k]);
    detail::matrix_rows(os, t + ",,O1", law.O1[k]);
  }
}

inline void write_trajectory_header(std::ostream& os, Eigen::Index n, Eigen::Index m1, Eigen::Index m2) {
  os << "path_id,k,t";
  for (Eigen::Index a = 0; a < n; ++a) os << ",x" << a;
  for (Eigen::Index a = 0; a < m1; ++a) os << ",u1_" << a;
  for (Eigen::Index a = 0; a < m2; ++a) os << ",u2_" << a;
  os << ",dW\n";
}

// The final row carries x(T) only.
inline void write_trajectory_rows(std::ostream& os, const Grid& g, long path_id, const Trajectory& tr,
                                  Eigen::Index m1, Eigen::Index m2) {
  for (std::size_t k = 0; k < tr.x.size(); ++k) {
    os << path_id << ',' << k << ',' << detail::num(g.time(static_cast<int>(k)));
    for (Eigen::Index a = 0; a < tr.x[k].size(); ++a) os << ',' << detail::num(tr.x[k][a]);
    const bool step = k < tr.u1.size();
    for (Eigen::Index a = 0; a < m1; ++a) os << ',' << (step ? detail::num(tr.u1[k][a]) : "");
    for (Eigen::Index a = 0; a < m2; ++a) os << ',' << (step ? detail::num(tr.u2[k][a]) : "");
    os << ',' << (step ? detail::num(tr.dw[k]) : "") << '\n';
  }
}

inline void write_cost_report(std::ostream& os, const CostEstimate& c) {
  auto se = [](double v) { return std::isnan(v) ? std::string("n/a") : detail::num(v); };
  os << "J1_mean = " << detail::num(c.J1.mean) << '\n'
     << "J1_se = " << se(c.J1.se) << '\n'
     << "J2_mean = " << detail::num(c.J2.mean) << '\n'
     << "J2_se = " << se(c.J2.se) << '\n'
     << "n_paths = " << c.n_paths << '\n'
     << "seed = " << c.seed << '\n';
}

inline nlohmann::json grid_metadata(const Grid& g, const std::string& problem_sha256) {
  nlohmann::json j;
  j["N"] = g.N;
  j["delta"] = g.delta;
  j["d1"] = g.d1;
  j["d2"] = g.d2;
  j["T"] = g.horizon();
  j["problem_sha256"] = problem_sha256;
  return j;
}

}  // namespace delaygame

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
#include "delaygame/io.hpp"
#include "delaygame/model.hpp"
#include "delaygame/simulator.hpp"
#include "delaygame/verify.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace delaygame;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitSingular = 3;
constexpr int kExitVerify = 4;

struct RunConfig {
  std::string command;
  std::string problem_file;
  double delta_target = 0.005;
  int n_paths = 2000;
  std::uint64_t seed = 20260101;
  std::string out_dir = "out";
  int halvings = 3;
  int export_paths = 100;
  std::string form = "ladder";
  std::optional<int> mutate_layer;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct Problem {
  GameSpec spec;
  std::string sha256;
};

struct Pipeline {
  Grid grid;
  RiccatiLadder ladder;
  RiccatiFields fields;
  FeedbackLaw law;
};

Pipeline run_pipeline(const GameSpec& spec, double delta_target, const LayerHook& hook = {},
                      bool diagnostics = false) {
  Pipeline p;
  p.grid = build_grid(spec, delta_target);
  p.ladder = backward_sweep(EngineContext(spec, p.grid, diagnostics), hook);
  p.fields = extract_fields(p.ladder);
  p.law = assemble_gains(p.fields, spec);
  return p;
}

LayerHook mutation(const RunConfig& cfg) {
  if (!cfg.mutate_layer) return {};
  return zeroed_layer(*cfg.mutate_layer);
}

fs::path ensure_out(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

LinearClosedLoop make_loop(const Pipeline& p, const GameSpec& spec, const std::string& form) {
  return form == "gains" ? loop_from_gains(p.law, spec) : loop_from_ladder(p.ladder, spec);
}

int cmd_solve(const RunConfig& cfg, const Problem& prob) {
  const Pipeline p = run_pipeline(prob.spec, cfg.delta_target, mutation(cfg));
  const fs::path out = ensure_out(cfg);
  std::ostringstream ladder, fields, gains;
  write_ladder_csv(ladder, p.ladder);
  write_fields_csv(fields, p.fields);
  write_gains_csv(gains, p.law);
  write_file(out / "ladder.csv", ladder.str());
  write_file(out / "fields.csv", fields.str());
  write_file(out / "gains.csv", gains.str());

  double gamma_rcond = 1.0;
  int gamma_k = 0;
  for (const RiccatiLayer& layer : p.ladder.layers) {
    if (layer.rcond_min < gamma_rcond) {
      gamma_rcond = layer.rcond_min;
      gamma_k = layer.k;
    }
  }
  double r1 = 1.0, r2 = 1.0;
  for (int k = 0; k < p.law.samples(); ++k) {
    r1 = std::min(r1, Eigen::PartialPivLU<Mat>(p.law.Rt1[k]).rcond());
    r2 = std::min(r2, Eigen::PartialPivLU<Mat>(p.law.Rt2[k]).rcond());
  }
  nlohmann::json meta = grid_metadata(p.grid, prob.sha256);
  meta["min_rcond_gamma"] = gamma_rcond;
  meta["min_rcond_R1"] = r1;
  meta["min_rcond_R2"] = r2;
  write_file(out / "metadata.json", meta.dump(2) + "\n");

  std::cout << "grid N=" << p.grid.N << " delta=" << detail::num(p.grid.delta) << " d1=" << p.grid.d1
            << " d2=" << p.grid.d2 << "\n"
            << "min rcond Gamma blocks = " << detail::num(gamma_rcond) << " (step " << gamma_k << ")\n"
            << "min rcond R1(t) = " << detail::num(r1) << "\n"
            << "min rcond R2(t) = " << detail::num(r2) << "\n"
            << "wrote " << (out / "ladder.csv").string() << ", fields.csv, gains.csv, metadata.json\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const Problem& prob) {
  const GameSpec& spec = prob.spec;
  const Pipeline p = run_pipeline(spec, cfg.delta_target, mutation(cfg));
  const LinearClosedLoop loop = make_loop(p, spec, cfg.form);
  const fs::path out = ensure_out(cfg);

  std::ofstream traj(out / "trajectories.csv", std::ios::binary);
  write_trajectory_header(traj, spec.n(), spec.m1(), spec.m2());
  const int exported = std::min(cfg.export_paths, cfg.n_paths);
  for (int path = 0; path < exported; ++path) {
    const Trajectory tr = simulate_path(loop, spec.x0, cfg.seed, path, false);
    write_trajectory_rows(traj, p.grid, path, tr, spec.m1(), spec.m2());
  }

  const CostEstimate cost = estimate_costs(loop, spec, cfg.n_paths, cfg.seed);
  std::ostringstream report;
  write_cost_report(report, cost);
  write_file(out / "cost.txt", report.str());
  std::cout << report.str();
  return 0;
}

struct Record {
  std::string name;
  double statistic = 0.0;
  double bound = 0.0;
  bool pass = true;
};

// Largest band excess value - (C delta + 3 se) over steps.
double excess(const ProjectionReport& r, double c_delta) {
  return r.value.empty() ? 0.0 : r.band_excess(c_delta);
}

// C from the finer run: twice the largest bias above the noise floor, per unit step.
double calibrate(const ProjectionReport& fine, double delta) {
  double c = 0.0;
  for (std::size_t j = 0; j < fine.value.size(); ++j)
    c = std::max(c, fine.value[j] - 3.0 * fine.se[j]);
  return 2.0 * c / delta;
}

bool below_noise(const ProjectionReport& r) { return excess(r, 0.0) <= 0.0; }

Record rate_record(const std::string& name, const ProjectionReport& coarse, const ProjectionReport& fine) {
  Record rec{name, 0.0, 0.8, true};
  if (coarse.max_value > 0.0) rec.statistic = fine.max_value / coarse.max_value;
  rec.pass = below_noise(coarse) || (rec.statistic >= 0.4 && rec.statistic <= 0.8);
  return rec;
}

std::vector<Record> verification_suite(const RunConfig& cfg, const GameSpec& spec) {
  std::vector<Record> recs;
  const double inf = std::numeric_limits<double>::infinity();
  const Pipeline p = run_pipeline(spec, cfg.delta_target, mutation(cfg), true);
  const Pipeline fine = run_pipeline(spec, p.grid.delta / 2.0, {}, true);
  const Grid& g = p.grid;

  double terminal = 0.0, truncation = 0.0;
  const RiccatiLayer& last = p.ladder.layer(g.N + 1);
  for (int i = 0; i < 2; ++i) terminal = std::max(terminal, detail::max_abs(last.Phat[i] - spec.H(i + 1)));
  for (const RiccatiLayer& layer : p.ladder.layers)
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j <= g.d1; ++j)
        if (layer.k + j > g.N) truncation = std::max(truncation, detail::max_abs(layer.Phat_lag[i][j]));
      for (int j = 0; j <= g.d2; ++j)
        if (layer.k + j > g.N) truncation = std::max(truncation, detail::max_abs(layer.Ccheck_lag[i][j]));
    }
  recs.push_back({"terminal_exact", terminal, 0.0, terminal == 0.0});
  recs.push_back({"truncation_exact", truncation, 0.0, truncation == 0.0});

  const ResidualReport ident = stationarity_identity_check(p.law, p.fields, spec);
  recs.push_back({"gain_identity", ident.max, ident.tolerance, ident.pass});

  const ContinuousResiduals cr = continuous_residuals(p.fields, spec);
  for (const ResidualReport* r : {&cr.ode, &cr.boundary, &cr.transport, &cr.semigroup})
    recs.push_back({r->name + "_residual", r->max, inf, true});

  const std::uint64_t seed = cfg.seed;
  const int n = cfg.n_paths;
  const LinearClosedLoop loop = loop_from_ladder(p.ladder, spec);
  const LinearClosedLoop fine_loop = loop_from_ladder(fine.ladder, spec);
  {
    const ProjectionReport coarse = fbsde_residual_test(p.ladder, spec, loop, n, seed);
    const ProjectionReport f = fbsde_residual_test(fine.ladder, spec, fine_loop, n, seed);
    const double c = calibrate(f, fine.grid.delta);
    const double e = excess(coarse, c * g.delta);
    recs.push_back({"fbsde_band", e, 0.0, e <= 0.0});
    recs.push_back(rate_record("fbsde_rate", coarse, f));
  }
  {
    const LinearClosedLoop gl = loop_from_gains(p.law, spec);
    const LinearClosedLoop fgl = loop_from_gains(fine.law, spec);
    const ProjectionReport coarse = stationarity_residual_test(p.ladder, spec, gl, n, seed);
    const ProjectionReport f = stationarity_residual_test(fine.ladder, spec, fgl, n, seed);
    const double c = calibrate(f, fine.grid.delta);
    const double e = excess(coarse, c * g.delta);
    recs.push_back({"stationarity_band", e, 0.0, e <= 0.0});
  }
  {
    std::vector<ControlPerturbation> devs = standard_deviations(1);
    for (const auto& d : standard_deviations(2)) devs.push_back(d);
    for (const DeviationVerdict& v : nash_deviation_test(loop, spec, n, seed, devs)) {
      std::string label = v.description;
      std::replace(label.begin(), label.end(), ' ', '_');
      recs.push_back({"nash_p" + std::to_string(v.player) + "_" + label, v.margin, -3.0 * v.combined_se,
                      v.pass});
    }
  }
  if (g.gap() >= 3) {
    const double a = z_factor_distance(p.ladder);
    const double b = z_factor_distance(fine.ladder);
    const double ratio = a > 0.0 ? b / a : 0.0;
    recs.push_back({"z_factor_rate", ratio, 0.7, ratio <= 0.7});
  }
  return recs;
}

int cmd_verify(const RunConfig& cfg, const Problem& prob) {
  const std::vector<Record> recs = verification_suite(cfg, prob.spec);
  std::ostringstream report;
  bool ok = true;
  for (const Record& r : recs) {
    report << "test=" << r.name << " statistic=" << detail::num(r.statistic)
           << " bound=" << detail::num(r.bound) << " pass=" << (r.pass ? "true" : "false") << "\n";
    ok = ok && r.pass;
  }
  write_file(ensure_out(cfg) / "verify.txt", report.str());
  std::cout << report.str();
  return ok ? 0 : kExitVerify;
}

int cmd_convergence(const RunConfig& cfg, const Problem& prob) {
  const GameSpec& spec = prob.spec;
  std::ostringstream table;
  table << "delta,N,d1,d2,ode,boundary,transport,semigroup,z_distance,no_delay_gap\n";
  double delta = cfg.delta_target;
  for (int j = 0; j <= cfg.halvings; ++j) {
    const Pipeline p = run_pipeline(spec, delta, {}, true);
    const ContinuousResiduals cr = continuous_residuals(p.fields, spec);
    table << detail::num(p.grid.delta) << ',' << p.grid.N << ',' << p.grid.d1 << ',' << p.grid.d2 << ','
          << detail::num(cr.ode.max) << ',' << detail::num(cr.boundary.max) << ','
          << detail::num(cr.transport.max) << ',' << detail::num(cr.semigroup.max) << ','
          << detail::num(z_factor_distance(p.ladder)) << ',' << detail::num(no_delay_gap(spec, p.grid.delta))
          << '\n';
    delta = p.grid.delta / 2.0;
  }
  write_file(ensure_out(cfg) / "convergence.csv", table.str());
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-quadratic two-player game with asymmetric information delays"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--problem", cfg.problem_file, "Problem file (JSON)")->required();
    sub->add_option("--delta", cfg.delta_target, "Target step size")->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--mutate-layer", cfg.mutate_layer, "Debug: zero the Riccati layer at this step");
  };
  auto add_paths = [&](CLI::App* sub) {
    sub->add_option("--paths", cfg.n_paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Base seed");
  };

  CLI::App* solve = app.add_subcommand("solve", "Backward sweep; writes ladder, fields and gains");
  add_common(solve);
  CLI::App* simulate = app.add_subcommand("simulate", "Simulate the equilibrium; writes trajectories and costs");
  add_common(simulate);
  add_paths(simulate);
  simulate->add_option("--export-paths", cfg.export_paths, "Paths written to trajectories.csv")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--form", cfg.form, "Closed-loop representation")
      ->check(CLI::IsMember({"ladder", "gains"}));
  CLI::App* verify = app.add_subcommand("verify", "Run the verification suite");
  add_common(verify);
  add_paths(verify);
  CLI::App* convergence = app.add_subcommand("convergence", "Residuals over repeated step halvings");
  add_common(convergence);
  convergence->add_option("--halvings", cfg.halvings, "Number of halvings")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  if (!fs::is_regular_file(cfg.problem_file)) {
    std::cerr << "error: problem file not found: " << cfg.problem_file << "\n";
    return kExitUsage;
  }

  try {
    Problem prob;
    const std::string text = read_text(cfg.problem_file);
    prob.sha256 = sha256_hex(text);
    prob.spec = parse_problem(text);
    const ValidationReport vr = validate(prob.spec);
    if (!vr.ok()) {
      std::cerr << "invalid problem:\n" << vr.str();
      return kExitInvalid;
    }
    if (cfg.command == "solve") return cmd_solve(cfg, prob);
    if (cfg.command == "simulate") return cmd_simulate(cfg, prob);
    if (cfg.command == "verify") return cmd_verify(cfg, prob);
    return cmd_convergence(cfg, prob);
  } catch (const ProblemFileError& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const IncommensurateDelays& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const SingularWeight& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const SingularGamma& e) {
    std::cerr << "solve failed: " << e.what() << "\n";
    return kExitSingular;
  } catch (const SingularGain& e) {
    std::cerr << "solve failed: " << e.what() << "\n";
    return kExitSingular;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

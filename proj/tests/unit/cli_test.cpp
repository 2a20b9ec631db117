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


#include "delaygame/io.hpp"
#include "unit/fixtures.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace delaygame {
namespace {

namespace fs = std::filesystem;

const std::string kCli = DELAYGAME_CLI;
const fs::path kProblems = DELAYGAME_PROBLEMS_DIR;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("delaygame_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string problem(const std::string& name) { return "--problem " + (kProblems / name).string(); }

TEST(ProblemFile, RoundTrip) {
  const GameSpec s = testing::two_state(0.1, 0.04, 0.5);
  const GameSpec t = parse_problem(problem_to_json(s).dump());
  EXPECT_EQ(t.A, s.A);
  EXPECT_EQ(t.B2bar, s.B2bar);
  EXPECT_EQ(t.H2, s.H2);
  EXPECT_EQ(t.x0, s.x0);
  EXPECT_EQ(t.h1, s.h1);
  EXPECT_EQ(t.h2, s.h2);
  EXPECT_EQ(t.T, s.T);
}

TEST(ProblemFile, RejectsMalformed) {
  EXPECT_THROW(parse_problem("{"), ProblemFileError);
  EXPECT_THROW(parse_problem("{\"A\": [[1]]}"), ProblemFileError);
  EXPECT_THROW(load_problem(kProblems / "no_such_file.json"), Error);
}

TEST(ProblemFile, SamplesLoad) {
  EXPECT_NO_THROW(load_problem(kProblems / "golden.json"));
  EXPECT_NO_THROW(load_problem(kProblems / "two_state.json"));
  EXPECT_NO_THROW(load_problem(kProblems / "zero_cost.json"));
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("codes");
  EXPECT_EQ(run("solve --problem " + (kProblems / "no_such_file.json").string() + " --out " + out.string()), 1);
  EXPECT_EQ(run("solve " + problem("invalid_r1_zero.json") + " --out " + out.string()), 2);
  EXPECT_EQ(run("solve --out " + out.string()), 1);
}

TEST(Cli, SolveWritesArtifacts) {
  const fs::path out = scratch("solve");
  ASSERT_EQ(run("solve " + problem("golden.json") + " --delta 0.01 --out " + out.string()), 0);
  for (const char* f : {"ladder.csv", "fields.csv", "gains.csv", "metadata.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_GT(fs::file_size(out / f), 0u) << f;
  }
  const auto meta = nlohmann::json::parse(slurp(out / "metadata.json"));
  EXPECT_EQ(meta.at("N").get<int>(), 99);
}

TEST(Cli, SimulateIsReproducible) {
  const fs::path a = scratch("sim_a");
  const fs::path b = scratch("sim_b");
  const std::string args = "simulate " + problem("golden.json") + " --delta 0.01 --paths 200 --seed 5 --out ";
  ASSERT_EQ(run(args + a.string()), 0);
  ASSERT_EQ(run(args + b.string()), 0);
  EXPECT_EQ(slurp(a / "cost.txt"), slurp(b / "cost.txt"));
  EXPECT_EQ(slurp(a / "trajectories.csv"), slurp(b / "trajectories.csv"));
}

TEST(Cli, VerifyFlagsMutatedLayer) {
  const fs::path good = scratch("verify_good");
  const fs::path bad = scratch("verify_bad");
  EXPECT_EQ(run("verify " + problem("golden.json") + " --paths 300 --out " + good.string()), 0);
  EXPECT_EQ(run("verify " + problem("golden.json") + " --paths 300 --mutate-layer 100 --out " + bad.string()), 4);
  EXPECT_NE(slurp(bad / "verify.txt").find("test=fbsde_band"), std::string::npos);
  EXPECT_NE(slurp(bad / "verify.txt").find("pass=false"), std::string::npos);
}

}  // namespace
}  // namespace delaygame

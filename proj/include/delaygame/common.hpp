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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace delaygame {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A control weight R_i failed its Cholesky factorization.
class SingularWeight : public Error {
 public:
  explicit SingularWeight(const std::string& which)
      : Error(which + " is not positive definite (factorization failed)"), which_(which) {}
  const std::string& which() const { return which_; }

 private:
  std::string which_;
};

// No grid step of at least 1e-6*T makes h1, h2 and T integer multiples of it.
class IncommensurateDelays : public Error {
 public:
  using Error::Error;
};

// One of the 2n x 2n estimate-chain blocks is numerically singular at step k.
class SingularGamma : public Error {
 public:
  SingularGamma(int k, std::string which, double rcond)
      : Error("singular " + which + " block at step " + std::to_string(k) +
              " (rcond=" + std::to_string(rcond) + ")"),
        k_(k),
        which_(std::move(which)),
        rcond_(rcond) {}
  int step() const { return k_; }
  const std::string& which() const { return which_; }
  double rcond() const { return rcond_; }

 private:
  int k_;
  std::string which_;
  double rcond_;
};

// R_1(t) or R_2(t) of the feedback law is numerically singular.
class SingularGain : public Error {
 public:
  SingularGain(double t, std::string which)
      : Error("singular " + which + " at t=" + std::to_string(t)), t_(t), which_(std::move(which)) {}
  double time() const { return t_; }
  const std::string& which() const { return which_; }

 private:
  double t_;
  std::string which_;
};

class MissingWindow : public Error {
 public:
  MissingWindow() : Error("trajectory has no recorded estimate windows") {}
};

// Reciprocal condition threshold below which a block counts as singular.
inline constexpr double kSingularRcond = 1e-12;

inline Mat zeros(Eigen::Index rows, Eigen::Index cols) { return Mat::Zero(rows, cols); }

}  // namespace delaygame

// Copyright 2026 The diffsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIFFSIM_LBFGS_HPP_
#define DIFFSIM_LBFGS_HPP_

#include <functional>
#include <vector>

#include <Eigen/Dense>

// Limited-memory BFGS with two-loop recursion and an Armijo-Wolfe line
// search. Optional box bounds are handled by projecting iterates after the
// line search (projected L-BFGS); curvature pairs are skipped when the
// projection breaks them.

namespace diffsim {

struct OptimizerConfig {
  int memory = 10;
  int max_iters = 100;
  double grad_tol = 1e-6;
  double c1 = 1e-4;  // Armijo sufficient decrease
  double c2 = 0.9;   // Wolfe curvature
  std::vector<double> lower;  // box bounds; empty = unbounded
  std::vector<double> upper;

  void validate() const;
};

// objective(theta, grad) -> f, filling grad.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LineSearchLog {
  double f0;       // objective at the iterate
  double slope0;   // directional derivative g0' d
  double alpha;    // accepted step length
  double f1;       // objective at the accepted point
};

struct OptimResult {
  Eigen::VectorXd theta;
  double loss = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> loss_curve;               // loss at every accepted iterate
  std::vector<Eigen::VectorXd> theta_curve;     // matching iterates
  std::vector<LineSearchLog> steps;
  std::string message;
};

OptimResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& theta0,
                           const OptimizerConfig& cfg);

}  // namespace diffsim

#endif  // DIFFSIM_LBFGS_HPP_

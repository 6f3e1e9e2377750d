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

#ifndef DIFFSIM_ESTIMATE_HPP_
#define DIFFSIM_ESTIMATE_HPP_

#include <string>
#include <vector>

#include "diffsim/lbfgs.hpp"
#include "diffsim/sensitivity.hpp"

// Gradient-based parameter estimation by trajectory fitting (IVP) and
// kinematic arm design over DH parameters.

namespace diffsim {

struct ReferenceTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;  // flat [q, qd] per sample

  void validate() const;
};

// CSV serialization: header "t,x0,x1,...", one row per sample.
ReferenceTrajectory load_reference_csv(const std::string& path);
void save_reference_csv(const std::string& path, const ReferenceTrajectory& ref);

// Sum of squared distances between the simulated trajectory started at
// ref.states[0] and the reference states at ref.times[1..].
double trajectory_loss(const Model& m, const ParameterBinding& binding,
                       const std::vector<double>& theta, const ReferenceTrajectory& ref,
                       const IntegratorConfig& cfg);

struct EstimateResult {
  OptimResult opt;
  std::vector<GradientReport> reports;  // one per objective evaluation
};

// L-BFGS descent on trajectory_loss with gradients from the selected engine.
EstimateResult estimate_parameters(const Model& m, const ParameterBinding& binding,
                                   const std::vector<double>& theta0,
                                   const ReferenceTrajectory& ref, GradientMethod method,
                                   const OptimizerConfig& opt, const IntegratorConfig& cfg,
                                   double fd_h = 1e-5);

struct DesignResult {
  DHParams dh;
  OptimResult opt;
  double final_rms = 0.0;  // end-effector RMS error over the trajectory
};

// Fits the 3N DH design scalars (d, a, alpha per joint) so that forward
// kinematics of q_traj matches the task-space trajectory p_traj. Purely
// kinematic; no integration involved.
DesignResult design_arm(const DHParams& dh0, const std::vector<std::vector<double>>& q_traj,
                        const std::vector<Vec3<double>>& p_traj, const OptimizerConfig& opt);

// Loss and end-effector RMS error of a design against a trajectory pair.
double design_loss(const DHParams& dh, const std::vector<std::vector<double>>& q_traj,
                   const std::vector<Vec3<double>>& p_traj);

}  // namespace diffsim

#endif  // DIFFSIM_ESTIMATE_HPP_

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

#ifndef DIFFSIM_HARNESS_HPP_
#define DIFFSIM_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffsim/control.hpp"
#include "diffsim/estimate.hpp"
#include "diffsim/sensitivity.hpp"

// Experiment front end shared by the CLI and the test suites. Every command
// takes a JSON config (seed mandatory) and an output directory, and writes
// CSV results plus a summary.json. All outputs are deterministic under a
// fixed seed except wall-clock columns.

namespace diffsim::harness {

using nlohmann::json;

json load_config(const std::string& path);

// n-link compound pendulum: point masses on a serial chain of revolute
// joints about +y, links along +x, lengths bound as parameters.
Model make_pendulum_chain(int links, double length = 1.0, double mass = 1.0);
ParameterBinding pendulum_length_binding(int links);

// ---------------------------------------------------------------------------
// benchmark: the four gradient engines on the n-link pendulum

struct BenchmarkRow {
  std::string method;
  int links = 0;
  double dt = 0.0;
  int repetition = 0;
  std::uint64_t rhs_evals = 0;
  std::uint64_t tape_vars = 0;
  int augmented_size = 0;
  double wall_time_s = 0.0;
  double grad_checksum = 0.0;
};

std::vector<BenchmarkRow> run_benchmark(const json& config);
void cmd_benchmark(const json& config, const std::string& out_dir);

// ---------------------------------------------------------------------------
// estimate: IVP parameter estimation from a reference trajectory

struct EstimateOutput {
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  std::vector<double> final_theta;
};

EstimateOutput run_estimate(const json& config, const std::string& out_dir);

// ---------------------------------------------------------------------------
// design: DH arm design recovery

struct DesignOutput {
  bool converged = false;
  int iterations = 0;
  double final_rms = 0.0;
};

DesignOutput run_design(const json& config, const std::string& out_dir);

// ---------------------------------------------------------------------------
// mpc: adaptive MPC against the hidden-parameter environment

struct MpcOutput {
  AdaptiveMpcResult result;
  std::vector<double> theta_true;
  std::vector<double> theta0;
};

MpcOutput run_mpc(const json& config, const std::string& out_dir);

// Shared config parsing helpers.
IntegratorConfig parse_integrator(const json& j);
OptimizerConfig parse_optimizer(const json& j);
ParameterBinding parse_binding(const json& j);

}  // namespace diffsim::harness

#endif  // DIFFSIM_HARNESS_HPP_

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

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "diffsim/harness.hpp"

// Exit codes: 0 success, 1 I/O or config error, 2 optimization failure,
// 3 simulation divergence.

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
}

diffsim::harness::json load(const CommonArgs& args) {
  auto config = diffsim::harness::load_config(args.config_path);
  if (args.seed >= 0) config["seed"] = static_cast<std::uint64_t>(args.seed);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable rigid-body simulation experiments"};
  app.require_subcommand(1);

  CommonArgs bench_args, est_args, design_args, mpc_args;
  CLI::App* bench = app.add_subcommand("benchmark", "gradient-engine benchmark on n-link pendulums");
  add_common(bench, bench_args);
  CLI::App* est = app.add_subcommand("estimate", "IVP parameter estimation");
  add_common(est, est_args);
  CLI::App* design = app.add_subcommand("design", "DH arm design optimization");
  add_common(design, design_args);
  CLI::App* mpc = app.add_subcommand("mpc", "adaptive MPC against the reference environment");
  add_common(mpc, mpc_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      diffsim::harness::cmd_benchmark(load(bench_args), bench_args.out_dir);
      return 0;
    }
    if (est->parsed()) {
      const auto out = diffsim::harness::run_estimate(load(est_args), est_args.out_dir);
      if (!out.converged) {
        std::cerr << "estimate: optimizer did not reach the gradient tolerance\n";
        return 2;
      }
      return 0;
    }
    if (design->parsed()) {
      const auto out = diffsim::harness::run_design(load(design_args), design_args.out_dir);
      if (!out.converged) {
        std::cerr << "design: optimizer did not reach the gradient tolerance\n";
        return 2;
      }
      return 0;
    }
    if (mpc->parsed()) {
      diffsim::harness::run_mpc(load(mpc_args), mpc_args.out_dir);
      return 0;
    }
  } catch (const diffsim::IntegrationError& e) {
    std::cerr << "simulation divergence: " << e.what() << '\n';
    return 3;
  } catch (const diffsim::OptimError& e) {
    std::cerr << "optimization failure: " << e.what() << '\n';
    return 2;
  } catch (const diffsim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

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

#include "diffsim/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include "diffsim/csv.hpp"

namespace diffsim::harness {

namespace fs = std::filesystem;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  if (!config.contains("seed")) throw ConfigError("config '" + path + "': missing mandatory seed");
  return config;
}

IntegratorConfig parse_integrator(const json& j) {
  IntegratorConfig cfg;
  const std::string method = j.value("method", "rk4");
  if (method == "euler")
    cfg.method = IntegratorMethod::kEuler;
  else if (method == "rk4")
    cfg.method = IntegratorMethod::kRK4;
  else if (method == "dopri45" || method == "rk45")
    cfg.method = IntegratorMethod::kDopri45;
  else if (method == "fehlberg45")
    cfg.method = IntegratorMethod::kFehlberg45;
  else
    throw ConfigError("unknown integrator method '" + method + "'");
  cfg.dt = j.value("dt", cfg.dt);
  cfg.abs_tol = j.value("abs_tol", cfg.abs_tol);
  cfg.rel_tol = j.value("rel_tol", cfg.rel_tol);
  cfg.min_step = j.value("min_step", cfg.min_step);
  cfg.max_step = j.value("max_step", cfg.max_step);
  cfg.max_evals = j.value("max_evals", cfg.max_evals);
  cfg.validate();
  return cfg;
}

OptimizerConfig parse_optimizer(const json& j) {
  OptimizerConfig cfg;
  cfg.memory = j.value("memory", cfg.memory);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.grad_tol = j.value("grad_tol", cfg.grad_tol);
  cfg.c1 = j.value("c1", cfg.c1);
  cfg.c2 = j.value("c2", cfg.c2);
  if (j.contains("lower")) cfg.lower = j.at("lower").get<std::vector<double>>();
  if (j.contains("upper")) cfg.upper = j.at("upper").get<std::vector<double>>();
  cfg.validate();
  return cfg;
}

ParameterBinding parse_binding(const json& j) {
  ParameterBinding binding;
  for (const auto& e : j) {
    const std::string field = e.at("field").get<std::string>();
    BindingEntry entry;
    if (field == "link_length")
      entry.field = ModelField::kLinkLength;
    else if (field == "mass")
      entry.field = ModelField::kBodyMass;
    else if (field == "com_x")
      entry.field = ModelField::kComX;
    else if (field == "com_y")
      entry.field = ModelField::kComY;
    else if (field == "com_z")
      entry.field = ModelField::kComZ;
    else if (field == "inertia_xx")
      entry.field = ModelField::kInertiaXX;
    else if (field == "inertia_yy")
      entry.field = ModelField::kInertiaYY;
    else if (field == "inertia_zz")
      entry.field = ModelField::kInertiaZZ;
    else
      throw ConfigError("unknown binding field '" + field + "'");
    entry.target = e.at("target").get<int>();
    entry.theta_index = e.at("theta").get<int>();
    binding.entries.push_back(entry);
  }
  return binding;
}

Model make_pendulum_chain(int links, double length, double mass) {
  if (links < 1) throw ConfigError("pendulum chain needs at least one link");
  Model m;
  for (int i = 0; i < links; ++i) {
    Body<double> b;
    b.name = "link" + std::to_string(i);
    b.inertia = SpatialInertia<double>::point_mass(mass, {length, 0.0, 0.0});
    m.bodies.push_back(std::move(b));
    Joint<double> j;
    j.kind = JointKind::kRevolute;
    j.axis = {0.0, 1.0, 0.0};
    j.parent_to_joint.trans = i == 0 ? Vec3<double>::zero() : Vec3<double>{length, 0.0, 0.0};
    m.joints.push_back(std::move(j));
    m.parent.push_back(i - 1);
  }
  m.finalize();
  return m;
}

ParameterBinding pendulum_length_binding(int links) {
  ParameterBinding binding;
  for (int k = 0; k < links; ++k) {
    binding.entries.push_back({ModelField::kComX, k, k});
    if (k + 1 < links) binding.entries.push_back({ModelField::kLinkLength, k + 1, k});
  }
  return binding;
}

// ---------------------------------------------------------------------------
// benchmark

std::vector<BenchmarkRow> run_benchmark(const json& config) {
  const auto seed = config.at("seed").get<std::uint64_t>();
  const auto links = config.at("links").get<std::vector<int>>();
  const auto dts = config.at("dt").get<std::vector<double>>();
  const auto methods = config.at("methods").get<std::vector<std::string>>();
  const int repetitions = config.value("repetitions", 1);
  const double t1 = config.value("t1", 1.0);
  const double fd_h = config.value("fd_h", 1e-5);
  IntegratorConfig base_cfg =
      config.contains("integrator") ? parse_integrator(config.at("integrator")) : IntegratorConfig{};

  std::vector<BenchmarkRow> rows;
  for (int n : links) {
    if (n < 1) throw ConfigError("benchmark: links must be >= 1");
    const Model model = make_pendulum_chain(n);
    const ParameterBinding binding = pendulum_length_binding(n);
    const std::vector<double> theta(static_cast<std::size_t>(n), 1.0);

    // Initial state seeded per link count so that every method, step size and
    // repetition sees the same problem instance.
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(n));
    std::vector<double> x0(static_cast<std::size_t>(2 * n), 0.0);
    for (int i = 0; i < n; ++i)
      x0[static_cast<std::size_t>(i)] = -0.5 + std::generate_canonical<double, 53>(rng);

    for (double dt : dts) {
      for (const std::string& method_name : methods) {
        const GradientMethod method = gradient_method_from_string(method_name);
        for (int rep = 0; rep < repetitions; ++rep) {
          GradientRequest req;
          req.model = model;
          req.binding = binding;
          req.theta = theta;
          req.x0 = x0;
          req.t0 = 0.0;
          req.t1 = t1;
          req.cfg = base_cfg;
          req.cfg.dt = dt;
          req.target = GradientTarget::loss(
              {t1}, {std::vector<double>(static_cast<std::size_t>(2 * n), 0.0)});
          const auto start = std::chrono::steady_clock::now();
          const GradientReport report = compute_gradient(method, req, fd_h);
          const auto stop = std::chrono::steady_clock::now();
          BenchmarkRow row;
          row.method = to_string(method);
          row.links = n;
          row.dt = dt;
          row.repetition = rep;
          row.rhs_evals = report.counters.rhs_evaluations;
          row.tape_vars = report.counters.tape_variables;
          row.augmented_size = report.augmented_state_size;
          row.wall_time_s = std::chrono::duration<double>(stop - start).count();
          row.grad_checksum = report.gradient.sum();
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

void cmd_benchmark(const json& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<BenchmarkRow> rows = run_benchmark(config);
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.method, std::to_string(r.links), format_double(r.dt),
                     std::to_string(r.repetition), std::to_string(r.rhs_evals),
                     std::to_string(r.tape_vars), std::to_string(r.augmented_size),
                     format_double(r.wall_time_s), format_double(r.grad_checksum)});
  write_csv(out_dir + "/benchmark.csv",
            {"method", "links", "dt", "repetition", "rhs_evals", "tape_vars", "augmented_size",
             "wall_time_s", "grad_checksum"},
            cells);
  json summary;
  summary["rows"] = rows.size();
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// estimate

EstimateOutput run_estimate(const json& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Model model = load_model_file(config.at("model").get<std::string>());
  const ParameterBinding binding = parse_binding(config.at("binding"));
  const auto theta0 = config.at("theta0").get<std::vector<double>>();
  const IntegratorConfig cfg = parse_integrator(config.value("integrator", json::object()));
  const OptimizerConfig opt = parse_optimizer(config.value("optimizer", json::object()));
  const GradientMethod method =
      gradient_method_from_string(config.value("method", std::string("coupled")));

  const std::string ref_path = config.at("reference").get<std::string>();
  if (!fs::exists(ref_path)) {
    if (config.contains("generate_reference")) {
      const json& gen = config.at("generate_reference");
      const auto theta_true = gen.at("theta_true").get<std::vector<double>>();
      const auto x0 = gen.at("x0").get<std::vector<double>>();
      const int samples = gen.at("samples").get<int>();
      const double sample_dt = gen.at("sample_dt").get<double>();
      const Model bound = apply_parameters(model, binding, theta_true);
      RhsFn<double> rhs = [&bound](double t, const std::vector<double>& x) {
        return ode_rhs<double>(bound, nullptr, t, x);
      };
      ReferenceTrajectory ref;
      for (int i = 0; i <= samples; ++i) ref.times.push_back(sample_dt * i);
      ref.states = integrate_dense(rhs, x0, ref.times, cfg).states;
      save_reference_csv(ref_path, ref);
    } else {
      throw ConfigError("reference file '" + ref_path + "' not found");
    }
  }
  const ReferenceTrajectory ref = load_reference_csv(ref_path);

  const EstimateResult result =
      estimate_parameters(model, binding, theta0, ref, method, opt, cfg,
                          config.value("fd_h", 1e-5));

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < result.opt.loss_curve.size(); ++i)
    rows.push_back({std::to_string(i), format_double(result.opt.loss_curve[i])});
  write_csv(out_dir + "/loss_curve.csv", {"iteration", "loss"}, rows);

  EstimateOutput out;
  out.converged = result.opt.converged;
  out.iterations = result.opt.iterations;
  out.final_loss = result.opt.loss;
  out.final_theta.assign(result.opt.theta.data(),
                         result.opt.theta.data() + result.opt.theta.size());
  json summary;
  summary["converged"] = out.converged;
  summary["iterations"] = out.iterations;
  summary["final_loss"] = out.final_loss;
  summary["final_theta"] = out.final_theta;
  summary["message"] = result.opt.message;
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// design

DesignOutput run_design(const json& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto seed = config.at("seed").get<std::uint64_t>();
  const auto dh_true_rows = config.at("dh_true").get<std::vector<std::vector<double>>>();
  const int configurations = config.value("configurations", 50);
  const double perturbation = config.value("perturbation", 0.3);
  const OptimizerConfig opt = parse_optimizer(config.value("optimizer", json::object()));

  DHParams dh_true;
  for (const auto& row : dh_true_rows) {
    if (row.size() != 3) throw ConfigError("design: dh_true rows must be [d, a, alpha]");
    dh_true.rows.push_back({row[0], row[1], row[2]});
  }
  const int n = dh_true.joint_count();

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };

  std::vector<std::vector<double>> q_traj;
  std::vector<Vec3<double>> p_traj;
  const Model arm_true = model_from_dh(dh_true);
  for (int t = 0; t < configurations; ++t) {
    std::vector<double> q(static_cast<std::size_t>(n));
    for (auto& qi : q) qi = uniform(-M_PI, M_PI);
    p_traj.push_back(forward_kinematics(arm_true, q).back().position);
    q_traj.push_back(std::move(q));
  }

  DHParams dh0 = dh_true;
  for (auto& row : dh0.rows) {
    row.d *= 1.0 + uniform(-perturbation, perturbation);
    row.a *= 1.0 + uniform(-perturbation, perturbation);
    row.alpha *= 1.0 + uniform(-perturbation, perturbation);
  }

  const DesignResult result = design_arm(dh0, q_traj, p_traj, opt);

  std::vector<std::string> header{"iteration"};
  for (int j = 0; j < n; ++j) {
    header.push_back("d" + std::to_string(j));
    header.push_back("a" + std::to_string(j));
    header.push_back("alpha" + std::to_string(j));
  }
  header.push_back("loss");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < result.opt.theta_curve.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (int c = 0; c < result.opt.theta_curve[i].size(); ++c)
      row.push_back(format_double(result.opt.theta_curve[i](c)));
    row.push_back(format_double(result.opt.loss_curve[i]));
    rows.push_back(std::move(row));
  }
  write_csv(out_dir + "/dh_evolution.csv", header, rows);

  DesignOutput out;
  out.converged = result.opt.converged;
  out.iterations = result.opt.iterations;
  out.final_rms = result.final_rms;
  json summary;
  summary["converged"] = out.converged;
  summary["iterations"] = out.iterations;
  summary["final_rms"] = out.final_rms;
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// mpc

namespace {

CostSpec make_cost_spec(const Model& m, const json& jc, int nu) {
  const CartpoleTopology topo = cartpole_topology(m);
  const auto np = topo.poles.size();
  const int no = topo.observation_size();
  CostSpec spec;
  spec.goal = Eigen::Map<const Eigen::VectorXd>(observation_goal(m).data(), no);
  spec.q_diag.resize(no);
  const double wp = jc.value("pose_weight", 1.0);
  const double wv = jc.value("velocity_weight", 0.1);
  const double wa = jc.value("accel_weight", 0.1);
  spec.q_diag(0) = wp;
  spec.q_diag(1) = wv;
  for (std::size_t j = 0; j < np; ++j) {
    spec.q_diag(2 + 2 * static_cast<int>(j)) = wp;
    spec.q_diag(3 + 2 * static_cast<int>(j)) = wp;
    spec.q_diag(2 + 2 * static_cast<int>(np) + static_cast<int>(j)) = wv;
    spec.q_diag(2 + 3 * static_cast<int>(np) + static_cast<int>(j)) = wa;
  }
  if (jc.contains("q_diag")) {
    const auto q = jc.at("q_diag").get<std::vector<double>>();
    spec.q_diag = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
  }
  spec.r_diag = Eigen::VectorXd::Constant(nu, jc.value("r", 1e-3));
  spec.s_diag = jc.value("s_scale", 10.0) * spec.q_diag;
  if (jc.contains("s_diag")) {
    const auto s = jc.at("s_diag").get<std::vector<double>>();
    spec.s_diag = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  }
  return spec;
}

}  // namespace

MpcOutput run_mpc(const json& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Model base = load_model_file(config.at("model").get<std::string>());
  const ParameterBinding binding = parse_binding(config.at("binding"));
  const auto theta0 = config.at("theta0").get<std::vector<double>>();
  const auto theta_true = config.at("env").at("theta_true").get<std::vector<double>>();
  const double control_dt = config.value("control_dt", 0.01);

  const CartpoleTopology topo = cartpole_topology(base);
  std::vector<int> actuated{topo.cart_q};
  const int nu = 1;

  ControlBounds bounds;
  if (config.contains("bounds")) {
    const auto b = config.at("bounds").get<std::vector<double>>();
    if (b.size() != 2) throw ConfigError("mpc: bounds must be [lower, upper]");
    bounds.lower = Eigen::VectorXd::Constant(nu, b[0]);
    bounds.upper = Eigen::VectorXd::Constant(nu, b[1]);
  }

  const Model env_model = apply_parameters(base, binding, theta_true);
  IntegratorConfig env_cfg = parse_integrator(config.at("env").value("integrator", json::object()));
  ReferenceEnvironment env(env_model, actuated, env_cfg, control_dt, bounds);

  IntegratorConfig step_cfg =
      parse_integrator(config.value("controller_integrator",
                                    json{{"method", "rk4"}, {"dt", control_dt}}));

  const CostSpec spec = make_cost_spec(base, config.value("cost", json::object()), nu);

  AdaptiveMpcConfig cfg;
  cfg.episodes = config.value("episodes", 3);
  cfg.steps = config.value("steps", 140);
  cfg.horizon = config.value("horizon", 20);
  cfg.warmup_fit_every = config.value("warmup_fit_every", 50);
  cfg.ilqr_iters = config.value("ilqr_iters", 10);
  cfg.ilqr_first_iters = config.value("ilqr_first_iters", 40);
  cfg.fit_opt = parse_optimizer(config.value("fit_optimizer", json::object()));
  cfg.seed = config.at("seed").get<std::uint64_t>();
  cfg.perturbation = config.value("perturbation", 0.05);
  cfg.buffer_capacity = config.value("buffer_capacity", 100);
  cfg.heldout_transitions = config.value("heldout_transitions", 40);
  cfg.success_cos = config.value("success_cos", 0.95);
  cfg.success_window = config.value("success_window", 10);

  MpcOutput out;
  out.theta_true = theta_true;
  out.theta0 = theta0;
  out.result = adaptive_mpc(env, base, binding, theta0, spec, bounds, step_cfg, cfg);

  // Per-step trace.
  {
    std::vector<std::string> header{"t", "episode", "u"};
    const int no = topo.observation_size();
    for (int j = 0; j < no; ++j) header.push_back("obs" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : out.result.records) {
      std::vector<std::string> row{format_double(r.t), std::to_string(r.episode),
                                   format_double(r.u(0))};
      for (double v : r.obs) row.push_back(format_double(v));
      rows.push_back(std::move(row));
    }
    write_csv(out_dir + "/steps.csv", header, rows);
  }
  // Parameter history.
  {
    std::vector<std::string> header{"fit_index"};
    for (std::size_t k = 0; k < theta0.size(); ++k) header.push_back("theta" + std::to_string(k));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < out.result.theta_history.size(); ++i) {
      std::vector<std::string> row{std::to_string(i)};
      for (double v : out.result.theta_history[i]) row.push_back(format_double(v));
      rows.push_back(std::move(row));
    }
    write_csv(out_dir + "/theta_history.csv", header, rows);
  }
  json summary;
  summary["episode_costs"] = out.result.episode_costs;
  summary["heldout_errors"] = out.result.heldout_errors;
  summary["fit_iterations"] = out.result.fit_iterations;
  summary["success"] = out.result.success_episode > 0;
  summary["success_episode"] = out.result.success_episode;
  summary["final_theta"] = out.result.theta_history.empty() ? theta0
                                                            : out.result.theta_history.back();
  summary["theta_true"] = theta_true;
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << '\n';
  return out;
}

}  // namespace diffsim::harness

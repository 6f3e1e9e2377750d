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

#include "diffsim/estimate.hpp"

#include <cmath>

#include "diffsim/csv.hpp"

namespace diffsim {

void ReferenceTrajectory::validate() const {
  if (times.empty() || times.size() != states.size())
    throw ConfigError("reference trajectory: empty or inconsistent sample lists");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]))
      throw ConfigError("reference trajectory: times must be strictly increasing");
    if (states[i].size() != states[0].size())
      throw ConfigError("reference trajectory: state dimension varies");
  }
}

ReferenceTrajectory load_reference_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  ReferenceTrajectory ref;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw ConfigError("reference csv: ragged row in '" + path + "'");
    ref.times.push_back(std::stod(row[0]));
    std::vector<double> x(row.size() - 1);
    for (std::size_t j = 1; j < row.size(); ++j) x[j - 1] = std::stod(row[j]);
    ref.states.push_back(std::move(x));
  }
  ref.validate();
  return ref;
}

void save_reference_csv(const std::string& path, const ReferenceTrajectory& ref) {
  ref.validate();
  std::vector<std::string> header{"t"};
  for (std::size_t j = 0; j < ref.states[0].size(); ++j) header.push_back("x" + std::to_string(j));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < ref.times.size(); ++i) {
    std::vector<std::string> row{format_double(ref.times[i])};
    for (double v : ref.states[i]) row.push_back(format_double(v));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

namespace {

GradientRequest make_request(const Model& m, const ParameterBinding& binding,
                             const std::vector<double>& theta, const ReferenceTrajectory& ref,
                             const IntegratorConfig& cfg) {
  ref.validate();
  GradientRequest req;
  req.model = m;
  req.binding = binding;
  req.theta = theta;
  req.x0 = ref.states[0];
  req.t0 = ref.times[0];
  req.t1 = ref.times.back();
  req.cfg = cfg;
  req.target = GradientTarget::loss(
      std::vector<double>(ref.times.begin() + 1, ref.times.end()),
      std::vector<std::vector<double>>(ref.states.begin() + 1, ref.states.end()));
  return req;
}

}  // namespace

double trajectory_loss(const Model& m, const ParameterBinding& binding,
                       const std::vector<double>& theta, const ReferenceTrajectory& ref,
                       const IntegratorConfig& cfg) {
  ref.validate();
  if (static_cast<int>(ref.states[0].size()) != 2 * m.dof)
    throw ConfigError("trajectory_loss: reference dimension does not match model dof");
  const Model bound = apply_parameters(m, binding, theta);
  RhsFn<double> rhs = [&bound](double t, const std::vector<double>& x) {
    return ode_rhs<double>(bound, nullptr, t, x);
  };
  const DenseResult<double> sol = integrate_dense(rhs, ref.states[0], ref.times, cfg);
  double loss = 0.0;
  for (std::size_t i = 1; i < ref.states.size(); ++i)
    for (std::size_t j = 0; j < ref.states[i].size(); ++j) {
      const double d = sol.states[i][j] - ref.states[i][j];
      loss += d * d;
    }
  return loss;
}

EstimateResult estimate_parameters(const Model& m, const ParameterBinding& binding,
                                   const std::vector<double>& theta0,
                                   const ReferenceTrajectory& ref, GradientMethod method,
                                   const OptimizerConfig& opt, const IntegratorConfig& cfg,
                                   double fd_h) {
  EstimateResult result;
  Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) -> double {
    std::vector<double> th(theta.data(), theta.data() + theta.size());
    GradientRequest req = make_request(m, binding, th, ref, cfg);
    GradientReport report = compute_gradient(method, req, fd_h);
    grad = report.gradient;
    const double loss = report.loss;
    result.reports.push_back(std::move(report));
    return loss;
  };
  Eigen::VectorXd t0v = Eigen::Map<const Eigen::VectorXd>(theta0.data(),
                                                          static_cast<Eigen::Index>(theta0.size()));
  result.opt = lbfgs_minimize(objective, t0v, opt);
  return result;
}

double design_loss(const DHParams& dh, const std::vector<std::vector<double>>& q_traj,
                   const std::vector<Vec3<double>>& p_traj) {
  const Model arm = model_from_dh(dh);
  double loss = 0.0;
  for (std::size_t t = 0; t < q_traj.size(); ++t) {
    const auto poses = forward_kinematics(arm, q_traj[t]);
    const Vec3<double> p = poses.back().position;
    const Vec3<double> d = p - p_traj[t];
    loss += squared_norm(d);
  }
  return loss;
}

namespace {

// Loss and gradient over the 3N design scalars via chunked dual lanes.
double design_loss_grad(const Eigen::VectorXd& theta, const std::vector<std::vector<double>>& q_traj,
                        const std::vector<Vec3<double>>& p_traj, Eigen::VectorXd& grad) {
  using D = Dual<kJvpWidth>;
  const int n3 = static_cast<int>(theta.size());
  const int n = n3 / 3;
  double loss = 0.0;
  grad = Eigen::VectorXd::Zero(n3);
  for (int c = 0; c * kJvpWidth < n3; ++c) {
    DHParamsT<D> dh;
    dh.rows.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      auto seed = [&](int flat, double v) {
        D s(v);
        const int lane = flat - c * kJvpWidth;
        if (lane >= 0 && lane < kJvpWidth) s.dot[lane] = 1.0;
        return s;
      };
      dh.rows[static_cast<std::size_t>(j)].d = seed(3 * j, theta(3 * j));
      dh.rows[static_cast<std::size_t>(j)].a = seed(3 * j + 1, theta(3 * j + 1));
      dh.rows[static_cast<std::size_t>(j)].alpha = seed(3 * j + 2, theta(3 * j + 2));
    }
    const ModelT<D> arm = model_from_dh(dh);
    D chunk_loss(0.0);
    for (std::size_t t = 0; t < q_traj.size(); ++t) {
      std::vector<D> q(q_traj[t].begin(), q_traj[t].end());
      const auto poses = forward_kinematics(arm, q);
      const Vec3<D> p = poses.back().position;
      const Vec3<D> target{D(p_traj[t].x), D(p_traj[t].y), D(p_traj[t].z)};
      chunk_loss += squared_norm(p - target);
    }
    if (c == 0) loss = chunk_loss.val;
    for (int l = 0; l < kJvpWidth; ++l) {
      const int flat = c * kJvpWidth + l;
      if (flat < n3) grad(flat) = chunk_loss.dot[l];
    }
  }
  return loss;
}

}  // namespace

DesignResult design_arm(const DHParams& dh0, const std::vector<std::vector<double>>& q_traj,
                        const std::vector<Vec3<double>>& p_traj, const OptimizerConfig& opt) {
  if (q_traj.size() != p_traj.size() || q_traj.empty())
    throw ConfigError("design_arm: trajectories must be non-empty and equal length");
  const int n = dh0.joint_count();
  for (const auto& q : q_traj)
    if (static_cast<int>(q.size()) != n)
      throw ConfigError("design_arm: joint trajectory dimension mismatch");

  Eigen::VectorXd theta0(3 * n);
  for (int j = 0; j < n; ++j) {
    theta0(3 * j) = dh0.rows[static_cast<std::size_t>(j)].d;
    theta0(3 * j + 1) = dh0.rows[static_cast<std::size_t>(j)].a;
    theta0(3 * j + 2) = dh0.rows[static_cast<std::size_t>(j)].alpha;
  }
  Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return design_loss_grad(theta, q_traj, p_traj, grad);
  };
  DesignResult result;
  result.opt = lbfgs_minimize(objective, theta0, opt);
  result.dh.rows.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    result.dh.rows[static_cast<std::size_t>(j)].d = result.opt.theta(3 * j);
    result.dh.rows[static_cast<std::size_t>(j)].a = result.opt.theta(3 * j + 1);
    result.dh.rows[static_cast<std::size_t>(j)].alpha = result.opt.theta(3 * j + 2);
  }
  result.final_rms = std::sqrt(design_loss(result.dh, q_traj, p_traj) /
                               static_cast<double>(q_traj.size()));
  return result;
}

}  // namespace diffsim

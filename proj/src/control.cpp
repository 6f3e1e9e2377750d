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

#include "diffsim/control.hpp"

#include <cmath>
#include <random>

#include "diffsim/sensitivity.hpp"

namespace diffsim {

std::vector<double> observation_goal(const Model& m) {
  const CartpoleTopology topo = cartpole_topology(m);
  std::vector<double> goal(static_cast<std::size_t>(topo.observation_size()), 0.0);
  for (std::size_t j = 0; j < topo.poles.size(); ++j) goal[3 + 2 * j] = 1.0;  // cos slots
  return goal;
}

std::vector<double> reconstruct_state(const Model& m, const std::vector<double>& obs) {
  const CartpoleTopology topo = cartpole_topology(m);
  if (static_cast<int>(obs.size()) != topo.observation_size())
    throw ModelError("reconstruct_state: observation dimension mismatch");
  const auto np = topo.poles.size();
  const auto n = static_cast<std::size_t>(m.dof);
  std::vector<double> x(2 * n, 0.0);
  x[static_cast<std::size_t>(topo.cart_q)] = obs[0];
  x[n + static_cast<std::size_t>(topo.cart_q)] = obs[1];
  for (std::size_t j = 0; j < np; ++j) {
    x[static_cast<std::size_t>(topo.poles[j])] = std::atan2(obs[2 + 2 * j], obs[3 + 2 * j]);
    x[n + static_cast<std::size_t>(topo.poles[j])] = obs[2 + 2 * np + j];
  }
  return x;
}

void CostSpec::validate(int obs_dim, int u_dim) const {
  if (q_diag.size() != obs_dim || s_diag.size() != obs_dim || goal.size() != obs_dim)
    throw ConfigError("cost: Q/S/goal dimension must match the observation");
  if (r_diag.size() != u_dim) throw ConfigError("cost: R dimension must match the control");
  if ((q_diag.array() < 0.0).any() || (s_diag.array() < 0.0).any())
    throw ConfigError("cost: Q and S diagonals must be non-negative");
  if ((r_diag.array() <= 0.0).any()) throw ConfigError("cost: R diagonal must be positive");
}

double cost(const std::vector<Eigen::VectorXd>& obs_traj,
            const std::vector<Eigen::VectorXd>& u_traj, const CostSpec& spec) {
  if (obs_traj.size() != u_traj.size() + 1)
    throw ConfigError("cost: need one more observation than controls");
  spec.validate(static_cast<int>(obs_traj[0].size()), static_cast<int>(u_traj.empty() ? spec.r_diag.size() : u_traj[0].size()));
  double J = 0.0;
  for (std::size_t k = 0; k < u_traj.size(); ++k) {
    const Eigen::VectorXd e = spec.goal - obs_traj[k];
    J += e.dot(spec.q_diag.asDiagonal() * e) + u_traj[k].dot(spec.r_diag.asDiagonal() * u_traj[k]);
  }
  const Eigen::VectorXd e = spec.goal - obs_traj.back();
  J += e.dot(spec.s_diag.asDiagonal() * e);
  return J;
}

Eigen::VectorXd ControlBounds::clamp(Eigen::VectorXd u) const {
  if (empty()) return u;
  for (int i = 0; i < u.size(); ++i) u(i) = std::min(std::max(u(i), lower(i)), upper(i));
  return u;
}

namespace {

template <class T>
std::vector<T> step_T(const ModelT<T>& model, const std::vector<int>& actuated,
                      const IntegratorConfig& cfg, double dt, const std::vector<T>& x,
                      const std::vector<T>& u) {
  ControlFn<T> control = [&](double, std::vector<T>& tau) {
    for (std::size_t k = 0; k < actuated.size(); ++k)
      tau[static_cast<std::size_t>(actuated[k])] = u[k];
  };
  RhsFn<T> rhs = [&](double t, const std::vector<T>& state) {
    return ode_rhs(model, control, t, state);
  };
  return integrate<T>(rhs, x, 0.0, dt, cfg).state;
}

template <class T>
std::vector<T> tau_of(const ModelT<T>& model, const std::vector<int>& actuated,
                      const std::vector<T>& u) {
  std::vector<T> tau(static_cast<std::size_t>(model.dof), T(0.0));
  for (std::size_t k = 0; k < actuated.size(); ++k)
    tau[static_cast<std::size_t>(actuated[k])] = u[k];
  return tau;
}

}  // namespace

std::vector<double> control_step(const ControlModel& cm, const std::vector<double>& x,
                                 const Eigen::VectorXd& u) {
  std::vector<double> uv(u.data(), u.data() + u.size());
  return step_T<double>(cm.model, cm.actuated, cm.step_cfg, cm.dt, x, uv);
}

std::vector<double> control_observe(const ControlModel& cm, const std::vector<double>& x,
                                    const Eigen::VectorXd& u) {
  std::vector<double> uv(u.data(), u.data() + u.size());
  return observe_with_forces(cm.model, x, tau_of(cm.model, cm.actuated, uv));
}

StepJacobians linearize(const ControlModel& cm, const std::vector<double>& x,
                        const Eigen::VectorXd& u) {
  using D = Dual<kJvpWidth>;
  const int nx = cm.nx();
  const int nu = cm.nu();
  const int total = nx + nu;
  StepJacobians J;
  J.A.resize(nx, nx);
  J.B.resize(nx, nu);
  const ModelT<D> model = lift_model<D>(cm.model);
  for (int c = 0; c * kJvpWidth < total; ++c) {
    std::vector<D> xd(x.begin(), x.end());
    std::vector<D> ud(static_cast<std::size_t>(nu));
    for (int k = 0; k < nu; ++k) ud[static_cast<std::size_t>(k)] = D(u(k));
    for (int l = 0; l < kJvpWidth; ++l) {
      const int idx = c * kJvpWidth + l;
      if (idx < nx)
        xd[static_cast<std::size_t>(idx)].dot[l] = 1.0;
      else if (idx < total)
        ud[static_cast<std::size_t>(idx - nx)].dot[l] = 1.0;
    }
    const std::vector<D> xn = step_T<D>(model, cm.actuated, cm.step_cfg, cm.dt, xd, ud);
    for (int l = 0; l < kJvpWidth; ++l) {
      const int idx = c * kJvpWidth + l;
      if (idx >= total) break;
      for (int i = 0; i < nx; ++i) {
        const double v = xn[static_cast<std::size_t>(i)].dot[l];
        if (idx < nx)
          J.A(i, idx) = v;
        else
          J.B(i, idx - nx) = v;
      }
    }
  }
  return J;
}

namespace {

// Observation value and Jacobians w.r.t. (x, u) in one chunked dual sweep.
struct ObsLin {
  Eigen::VectorXd obs;
  Eigen::MatrixXd Ox;  // |obs| x |x|
  Eigen::MatrixXd Ou;  // |obs| x |u|
};

ObsLin observe_linearize(const ControlModel& cm, const std::vector<double>& x,
                         const Eigen::VectorXd& u) {
  using D = Dual<kJvpWidth>;
  const int nx = cm.nx();
  const int nu = cm.nu();
  const int total = nx + nu;
  const ModelT<D> model = lift_model<D>(cm.model);
  ObsLin out;
  for (int c = 0; c * kJvpWidth < total; ++c) {
    std::vector<D> xd(x.begin(), x.end());
    std::vector<D> ud(static_cast<std::size_t>(nu));
    for (int k = 0; k < nu; ++k) ud[static_cast<std::size_t>(k)] = D(u(k));
    for (int l = 0; l < kJvpWidth; ++l) {
      const int idx = c * kJvpWidth + l;
      if (idx < nx)
        xd[static_cast<std::size_t>(idx)].dot[l] = 1.0;
      else if (idx < total)
        ud[static_cast<std::size_t>(idx - nx)].dot[l] = 1.0;
    }
    const std::vector<D> obs = observe_with_forces(model, xd, tau_of(model, cm.actuated, ud));
    const int no = static_cast<int>(obs.size());
    if (c == 0) {
      out.obs.resize(no);
      out.Ox = Eigen::MatrixXd::Zero(no, nx);
      out.Ou = Eigen::MatrixXd::Zero(no, nu);
      for (int i = 0; i < no; ++i) out.obs(i) = obs[static_cast<std::size_t>(i)].val;
    }
    for (int l = 0; l < kJvpWidth; ++l) {
      const int idx = c * kJvpWidth + l;
      if (idx >= total) break;
      for (int i = 0; i < no; ++i) {
        const double v = obs[static_cast<std::size_t>(i)].dot[l];
        if (idx < nx)
          out.Ox(i, idx) = v;
        else
          out.Ou(i, idx - nx) = v;
      }
    }
  }
  return out;
}

struct Rollout {
  std::vector<std::vector<double>> states;  // H+1
  std::vector<Eigen::VectorXd> controls;    // H
  double cost = 0.0;
};

Rollout rollout(const ControlModel& cm, const std::vector<double>& x0,
                const std::vector<Eigen::VectorXd>& u, const CostSpec& spec,
                const ControlBounds& bounds) {
  Rollout r;
  r.states.push_back(x0);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(cm.nu());
  for (const auto& uk : u) {
    const Eigen::VectorXd ukc = bounds.clamp(uk);
    const auto& xk = r.states.back();
    const std::vector<double> obs = control_observe(cm, xk, ukc);
    const Eigen::Map<const Eigen::VectorXd> o(obs.data(), static_cast<Eigen::Index>(obs.size()));
    const Eigen::VectorXd e = spec.goal - o;
    r.cost += e.dot(spec.q_diag.asDiagonal() * e) + ukc.dot(spec.r_diag.asDiagonal() * ukc);
    r.controls.push_back(ukc);
    r.states.push_back(control_step(cm, xk, ukc));
    for (double v : r.states.back())
      if (!std::isfinite(v)) throw IntegrationError("ilqr: non-finite rollout");
  }
  const std::vector<double> obs = control_observe(cm, r.states.back(), u0);
  const Eigen::Map<const Eigen::VectorXd> o(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Eigen::VectorXd e = spec.goal - o;
  r.cost += e.dot(spec.s_diag.asDiagonal() * e);
  return r;
}

// Closed-loop forward pass around a reference trajectory.
Rollout forward_pass(const ControlModel& cm, const Rollout& ref,
                     const std::vector<Eigen::VectorXd>& k_ff,
                     const std::vector<Eigen::MatrixXd>& K_fb, double alpha,
                     const CostSpec& spec, const ControlBounds& bounds) {
  Rollout r;
  r.states.push_back(ref.states[0]);
  const int H = static_cast<int>(ref.controls.size());
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(cm.nu());
  for (int k = 0; k < H; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Eigen::Map<const Eigen::VectorXd> x(r.states.back().data(),
                                              static_cast<Eigen::Index>(r.states.back().size()));
    const Eigen::Map<const Eigen::VectorXd> xr(ref.states[ku].data(),
                                               static_cast<Eigen::Index>(ref.states[ku].size()));
    Eigen::VectorXd u = ref.controls[ku] + alpha * k_ff[ku] + K_fb[ku] * (x - xr);
    u = bounds.clamp(u);
    const std::vector<double> obs = control_observe(cm, r.states.back(), u);
    const Eigen::Map<const Eigen::VectorXd> o(obs.data(), static_cast<Eigen::Index>(obs.size()));
    const Eigen::VectorXd e = spec.goal - o;
    r.cost += e.dot(spec.q_diag.asDiagonal() * e) + u.dot(spec.r_diag.asDiagonal() * u);
    r.controls.push_back(u);
    r.states.push_back(control_step(cm, r.states.back(), u));
    for (double v : r.states.back())
      if (!std::isfinite(v)) throw IntegrationError("ilqr: non-finite rollout");
  }
  const std::vector<double> obs = control_observe(cm, r.states.back(), u0);
  const Eigen::Map<const Eigen::VectorXd> o(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Eigen::VectorXd e = spec.goal - o;
  r.cost += e.dot(spec.s_diag.asDiagonal() * e);
  return r;
}

}  // namespace

IlqrResult ilqr(const ControlModel& cm, const std::vector<double>& x0,
                std::vector<Eigen::VectorXd> u_init, const CostSpec& spec,
                const ControlBounds& bounds, const IlqrOptions& opts) {
  const int H = static_cast<int>(u_init.size());
  if (H < 1) throw ConfigError("ilqr: horizon must be >= 1");
  spec.validate(cartpole_topology(cm.model).observation_size(), cm.nu());
  const int nu = cm.nu();

  IlqrResult result;
  Rollout current = rollout(cm, x0, u_init, spec, bounds);
  result.cost_curve.push_back(current.cost);

  double mu = opts.mu_init;
  const Eigen::VectorXd u_zero = Eigen::VectorXd::Zero(nu);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // Quadraticize along the current trajectory.
    std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(H)), B(static_cast<std::size_t>(H));
    std::vector<Eigen::VectorXd> lx(static_cast<std::size_t>(H)), lu(static_cast<std::size_t>(H));
    std::vector<Eigen::MatrixXd> lxx(static_cast<std::size_t>(H)), luu(static_cast<std::size_t>(H)),
        lux(static_cast<std::size_t>(H));
    for (int k = 0; k < H; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const StepJacobians sj = linearize(cm, current.states[ku], current.controls[ku]);
      A[ku] = sj.A;
      B[ku] = sj.B;
      const ObsLin ol = observe_linearize(cm, current.states[ku], current.controls[ku]);
      const Eigen::VectorXd e = ol.obs - spec.goal;  // derivative of (goal-obs) flips sign twice
      const Eigen::MatrixXd Qw = spec.q_diag.asDiagonal();
      lx[ku] = 2.0 * ol.Ox.transpose() * (Qw * e);
      lu[ku] = 2.0 * ol.Ou.transpose() * (Qw * e) + 2.0 * spec.r_diag.asDiagonal() * current.controls[ku];
      lxx[ku] = 2.0 * ol.Ox.transpose() * Qw * ol.Ox;
      luu[ku] = 2.0 * Eigen::MatrixXd(spec.r_diag.asDiagonal()) +
                2.0 * ol.Ou.transpose() * Qw * ol.Ou;
      lux[ku] = 2.0 * ol.Ou.transpose() * Qw * ol.Ox;
    }
    const ObsLin olH = observe_linearize(cm, current.states[static_cast<std::size_t>(H)], u_zero);
    const Eigen::MatrixXd Sw = spec.s_diag.asDiagonal();
    const Eigen::VectorXd eH = olH.obs - spec.goal;
    Eigen::VectorXd Vx = 2.0 * olH.Ox.transpose() * (Sw * eH);
    Eigen::MatrixXd Vxx = 2.0 * olH.Ox.transpose() * Sw * olH.Ox;

    // Backward pass with Levenberg regularization on Quu.
    std::vector<Eigen::VectorXd> k_ff(static_cast<std::size_t>(H));
    std::vector<Eigen::MatrixXd> K_fb(static_cast<std::size_t>(H));
    bool backward_ok = true;
    for (int k = H - 1; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      const Eigen::VectorXd Qx = lx[ku] + A[ku].transpose() * Vx;
      const Eigen::VectorXd Qu = lu[ku] + B[ku].transpose() * Vx;
      const Eigen::MatrixXd Qxx = lxx[ku] + A[ku].transpose() * Vxx * A[ku];
      Eigen::MatrixXd Quu = luu[ku] + B[ku].transpose() * Vxx * B[ku];
      const Eigen::MatrixXd Qux = lux[ku] + B[ku].transpose() * Vxx * A[ku];
      Quu.diagonal().array() += mu;
      Eigen::LLT<Eigen::MatrixXd> llt(Quu);
      if (llt.info() != Eigen::Success) {
        backward_ok = false;
        break;
      }
      k_ff[ku] = -llt.solve(Qu);
      K_fb[ku] = -llt.solve(Qux);
      Vx = Qx + K_fb[ku].transpose() * Quu * k_ff[ku] + K_fb[ku].transpose() * Qu +
           Qux.transpose() * k_ff[ku];
      Vxx = Qxx + K_fb[ku].transpose() * Quu * K_fb[ku] + K_fb[ku].transpose() * Qux +
            Qux.transpose() * K_fb[ku];
      Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
    }
    if (!backward_ok) {
      mu = std::max(mu * 10.0, 1e-6);
      if (mu > opts.mu_max) {
        result.message = "regularization overflow; returning best trajectory";
        break;
      }
      continue;
    }

    // Line-searched forward pass.
    bool improved = false;
    for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
      Rollout trial;
      try {
        trial = forward_pass(cm, current, k_ff, K_fb, alpha, spec, bounds);
      } catch (const IntegrationError&) {
        continue;
      }
      if (trial.cost < current.cost - 1e-12 * std::abs(current.cost)) {
        current = std::move(trial);
        improved = true;
        break;
      }
    }
    result.iterations = iter + 1;
    if (improved) {
      result.cost_curve.push_back(current.cost);
      mu *= 0.5;
      if (mu < 1e-10) mu = 0.0;
      const double prev = result.cost_curve[result.cost_curve.size() - 2];
      if (prev - current.cost <= opts.cost_tol * (1.0 + std::abs(prev))) break;
    } else {
      mu = std::max(mu * 10.0, 1e-6);
      if (mu > opts.mu_max) {
        result.message = "no improving step; returning best trajectory";
        break;
      }
    }
  }

  result.controls = current.controls;
  result.states = current.states;
  result.cost = current.cost;
  return result;
}

Eigen::VectorXd mpc_step(const ControlModel& cm, const std::vector<double>& x0,
                         const CostSpec& spec, const ControlBounds& bounds, int horizon,
                         MpcWarmStart& warm, const IlqrOptions& opts) {
  if (horizon < 1) throw ConfigError("mpc_step: horizon must be >= 1");
  std::vector<Eigen::VectorXd> u_init;
  if (static_cast<int>(warm.controls.size()) == horizon) {
    u_init = warm.controls;
  } else {
    u_init.assign(static_cast<std::size_t>(horizon), Eigen::VectorXd::Zero(cm.nu()));
  }
  IlqrResult sol = ilqr(cm, x0, std::move(u_init), spec, bounds, opts);
  // Shift by one step for the next solve; repeat the last control.
  warm.controls.assign(sol.controls.begin() + 1, sol.controls.end());
  warm.controls.push_back(sol.controls.back());
  return sol.controls.front();
}

// ---------------------------------------------------------------------------
// Model fitting

namespace {

double fit_loss_grad(const ReplayBuffer& buffer, const Model& base,
                     const ParameterBinding& binding, const Eigen::VectorXd& theta,
                     const std::vector<int>& actuated, const IntegratorConfig& step_cfg,
                     double dt, Eigen::VectorXd* grad) {
  using D = Dual<kJvpWidth>;
  const int np = static_cast<int>(theta.size());
  double loss = 0.0;
  if (grad) grad->setZero(np);
  for (int c = 0; c * kJvpWidth < np || c == 0; ++c) {
    std::vector<D> theta_dual(static_cast<std::size_t>(np));
    for (int d = 0; d < np; ++d) {
      D v(theta(d));
      const int lane = d - c * kJvpWidth;
      if (grad && lane >= 0 && lane < kJvpWidth) v.dot[lane] = 1.0;
      theta_dual[static_cast<std::size_t>(d)] = v;
    }
    const ModelT<D> bound = apply_parameters(base, binding, theta_dual);
    D chunk_loss(0.0);
    for (const Transition& tr : buffer.transitions) {
      const std::vector<double> x0 = reconstruct_state(base, tr.obs);
      std::vector<D> x(x0.begin(), x0.end());
      std::vector<D> u(static_cast<std::size_t>(tr.u.size()));
      for (int k = 0; k < tr.u.size(); ++k) u[static_cast<std::size_t>(k)] = D(tr.u(k));
      const std::vector<D> xn = step_T<D>(bound, actuated, step_cfg, dt, x, u);
      const std::vector<D> obs_pred = observe_with_forces(bound, xn, tau_of(bound, actuated, u));
      for (std::size_t j = 0; j < obs_pred.size(); ++j) {
        const D d = obs_pred[j] - tr.obs_next[j];
        chunk_loss += d * d;
      }
    }
    if (c == 0) loss = chunk_loss.val;
    if (grad)
      for (int l = 0; l < kJvpWidth; ++l) {
        const int d = c * kJvpWidth + l;
        if (d < np) (*grad)(d) = chunk_loss.dot[l];
      }
    if (!grad) break;
  }
  return loss;
}

}  // namespace

double prediction_loss(const ReplayBuffer& buffer, const Model& base,
                       const ParameterBinding& binding, const std::vector<double>& theta,
                       const std::vector<int>& actuated, const IntegratorConfig& step_cfg,
                       double dt) {
  const Eigen::Map<const Eigen::VectorXd> th(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return fit_loss_grad(buffer, base, binding, th, actuated, step_cfg, dt, nullptr);
}

FitResult fit_model(const ReplayBuffer& buffer, const Model& base, const ParameterBinding& binding,
                    const std::vector<double>& theta0, const OptimizerConfig& opt,
                    const std::vector<int>& actuated, const IntegratorConfig& step_cfg, double dt) {
  if (buffer.transitions.empty()) throw ConfigError("fit_model: empty replay buffer");
  Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return fit_loss_grad(buffer, base, binding, theta, actuated, step_cfg, dt, &grad);
  };
  const Eigen::Map<const Eigen::VectorXd> t0(theta0.data(),
                                             static_cast<Eigen::Index>(theta0.size()));
  FitResult result;
  result.opt = lbfgs_minimize(objective, t0, opt);
  result.theta.assign(result.opt.theta.data(), result.opt.theta.data() + result.opt.theta.size());
  return result;
}

// ---------------------------------------------------------------------------
// Reference environment

ReferenceEnvironment::ReferenceEnvironment(Model true_model, std::vector<int> actuated,
                                           IntegratorConfig cfg, double control_dt,
                                           ControlBounds clamp)
    : model_(std::move(true_model)),
      actuated_(std::move(actuated)),
      cfg_(cfg),
      dt_(control_dt),
      clamp_(std::move(clamp)),
      x_(static_cast<std::size_t>(2 * model_.dof), 0.0),
      last_u_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(actuated_.size()))) {}

void ReferenceEnvironment::reset(const std::vector<double>& x0) {
  if (x0.size() != static_cast<std::size_t>(2 * model_.dof))
    throw ConfigError("environment reset: state dimension mismatch");
  x_ = x0;
  last_u_.setZero();
}

std::vector<double> ReferenceEnvironment::step(const Eigen::VectorXd& u) {
  const Eigen::VectorXd uc = clamp_.clamp(u);
  std::vector<double> uv(uc.data(), uc.data() + uc.size());
  x_ = step_T<double>(model_, actuated_, cfg_, dt_, x_, uv);
  last_u_ = uc;
  return observation();
}

std::vector<double> ReferenceEnvironment::observation() const {
  std::vector<double> uv(last_u_.data(), last_u_.data() + last_u_.size());
  return observe_with_forces(model_, x_, tau_of(model_, actuated_, uv));
}

// ---------------------------------------------------------------------------
// Adaptive MPC

namespace {

// Absolute pole angles measured from upright, from the flat state.
std::vector<double> pole_angles(const Model& m, const std::vector<double>& x) {
  const CartpoleTopology topo = cartpole_topology(m);
  std::vector<double> angles;
  double acc = 0.0;
  for (int qi : topo.poles) {
    acc += x[static_cast<std::size_t>(qi)];
    angles.push_back(acc);
  }
  return angles;
}

}  // namespace

AdaptiveMpcResult adaptive_mpc(ReferenceEnvironment& env, const Model& base,
                               const ParameterBinding& binding, const std::vector<double>& theta0,
                               const CostSpec& spec, const ControlBounds& bounds,
                               const IntegratorConfig& controller_step_cfg,
                               const AdaptiveMpcConfig& cfg) {
  if (cfg.episodes < 1 || cfg.steps < 1 || cfg.horizon < 1)
    throw ConfigError("adaptive_mpc: episodes, steps and horizon must be >= 1");
  AdaptiveMpcResult result;
  std::vector<double> theta = theta0;

  const CartpoleTopology topo = cartpole_topology(env.model());
  const auto n = static_cast<std::size_t>(env.model().dof);
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };

  auto hanging_state = [&]() {
    std::vector<double> x0(2 * n, 0.0);
    bool first = true;
    for (int qi : topo.poles) {
      const double delta = uniform(-cfg.perturbation, cfg.perturbation);
      x0[static_cast<std::size_t>(qi)] = (first ? M_PI : 0.0) + delta;
      first = false;
    }
    return x0;
  };

  // Fixed held-out transition set from seeded random controls.
  ReplayBuffer heldout;
  {
    env.reset(hanging_state());
    std::vector<double> obs = env.observation();
    for (int t = 0; t < cfg.heldout_transitions; ++t) {
      Eigen::VectorXd u(static_cast<Eigen::Index>(env.actuated().size()));
      for (int k = 0; k < u.size(); ++k)
        u(k) = bounds.empty() ? uniform(-1.0, 1.0) : uniform(bounds.lower(k), bounds.upper(k));
      std::vector<double> obs_next = env.step(u);
      heldout.push({obs, u, obs_next});
      obs = std::move(obs_next);
    }
  }

  auto controller = [&](const std::vector<double>& th) {
    ControlModel cm;
    cm.model = apply_parameters(base, binding, th);
    cm.actuated = env.actuated();
    cm.step_cfg = controller_step_cfg;
    cm.dt = env.control_dt();
    return cm;
  };

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    env.reset(hanging_state());
    ControlModel cm = controller(theta);
    ReplayBuffer buffer;
    buffer.capacity = cfg.buffer_capacity;
    MpcWarmStart warm;
    std::vector<double> obs = env.observation();
    double episode_cost = 0.0;
    std::vector<std::vector<double>> env_states;

    for (int t = 0; t < cfg.steps; ++t) {
      IlqrOptions opts;
      opts.max_iters = t == 0 ? cfg.ilqr_first_iters : cfg.ilqr_iters;
      const std::vector<double> x_hat = reconstruct_state(cm.model, obs);
      const Eigen::VectorXd u = mpc_step(cm, x_hat, spec, bounds, cfg.horizon, warm, opts);
      std::vector<double> obs_next = env.step(u);

      const Eigen::Map<const Eigen::VectorXd> o(obs.data(), static_cast<Eigen::Index>(obs.size()));
      const Eigen::VectorXd e = spec.goal - o;
      episode_cost += e.dot(spec.q_diag.asDiagonal() * e) + u.dot(spec.r_diag.asDiagonal() * u);

      buffer.push({obs, u, obs_next});
      result.records.push_back(
          {ep, t, static_cast<double>(t) * env.control_dt(), u, obs});
      env_states.push_back(env.flat_state());
      obs = std::move(obs_next);

      if (ep == 1 && cfg.warmup_fit_every > 0 && (t + 1) % cfg.warmup_fit_every == 0 &&
          t + 1 < cfg.steps) {
        FitResult fit = fit_model(buffer, base, binding, theta, cfg.fit_opt, env.actuated(),
                                  controller_step_cfg, env.control_dt());
        theta = fit.theta;
        result.theta_history.push_back(theta);
        result.fit_iterations.push_back(fit.opt.iterations);
        cm = controller(theta);
      }
    }

    FitResult fit = fit_model(buffer, base, binding, theta, cfg.fit_opt, env.actuated(),
                              controller_step_cfg, env.control_dt());
    theta = fit.theta;
    result.theta_history.push_back(theta);
    result.fit_iterations.push_back(fit.opt.iterations);
    result.episode_costs.push_back(episode_cost);
    result.buffers.push_back(std::move(buffer));
    result.heldout_errors.push_back(prediction_loss(heldout, base, binding, theta, env.actuated(),
                                                    controller_step_cfg, env.control_dt()) /
                                    static_cast<double>(heldout.size()));

    // Swing-up: every pole upright over the final success_window steps.
    if (result.success_episode < 0 &&
        static_cast<int>(env_states.size()) >= cfg.success_window) {
      bool up = true;
      for (std::size_t s = env_states.size() - static_cast<std::size_t>(cfg.success_window);
           s < env_states.size() && up; ++s) {
        for (double angle : pole_angles(env.model(), env_states[s]))
          if (std::cos(angle) < cfg.success_cos) {
            up = false;
            break;
          }
      }
      if (up) result.success_episode = ep;
    }
  }
  return result;
}

}  // namespace diffsim

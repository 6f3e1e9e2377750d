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

#include "diffsim/sensitivity.hpp"

#include <algorithm>
#include <cmath>

namespace diffsim {

std::string to_string(GradientMethod m) {
  switch (m) {
    case GradientMethod::kFiniteDiff: return "fd";
    case GradientMethod::kReverseAD: return "autodiff";
    case GradientMethod::kCoupled: return "coupled";
    case GradientMethod::kAdjoint: return "adjoint";
  }
  return "?";
}

GradientMethod gradient_method_from_string(const std::string& name) {
  if (name == "fd" || name == "numerical") return GradientMethod::kFiniteDiff;
  if (name == "autodiff" || name == "ad") return GradientMethod::kReverseAD;
  if (name == "coupled") return GradientMethod::kCoupled;
  if (name == "adjoint") return GradientMethod::kAdjoint;
  throw ConfigError("unknown gradient method '" + name + "'");
}

std::shared_ptr<const ParametricOde> GradientRequest::problem() const {
  if (ode) return ode;
  return std::make_shared<ModelOde>(model, binding);
}

void GradientRequest::validate(const ParametricOde& problem) const {
  if (static_cast<int>(theta.size()) != problem.param_size())
    throw ConfigError("gradient request: theta length does not match the problem");
  if (static_cast<int>(x0.size()) != problem.state_size())
    throw ConfigError("gradient request: x0 dimension does not match the problem");
  if (target.kind == GradientTarget::Kind::kLossGradient) {
    if (target.sample_times.empty())
      throw ConfigError("gradient request: loss target without sample times");
    if (target.sample_times.size() != target.reference.size())
      throw ConfigError("gradient request: sample/reference count mismatch");
    double prev = t0;
    for (double t : target.sample_times) {
      if (!(t > prev) || t > t1 + 1e-12)
        throw ConfigError("gradient request: sample times must increase within (t0, t1]");
      prev = t;
    }
    for (const auto& r : target.reference)
      if (r.size() != x0.size())
        throw ConfigError("gradient request: reference state dimension mismatch");
  }
}

namespace {

double sample_cost(const std::vector<double>& x, const std::vector<double>& ref) {
  double c = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - ref[j];
    c += d * d;
  }
  return c;
}

std::vector<double> sample_cost_grad(const std::vector<double>& x, const std::vector<double>& ref) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = 2.0 * (x[j] - ref[j]);
  return g;
}

std::vector<double> dense_times(const GradientRequest& req) {
  std::vector<double> times;
  times.reserve(req.target.sample_times.size() + 1);
  times.push_back(req.t0);
  times.insert(times.end(), req.target.sample_times.begin(), req.target.sample_times.end());
  return times;
}

double solve_loss(const ParametricOde& ode, const GradientRequest& req,
                  const std::vector<double>& theta, EvalCounter& counter) {
  RhsFn<double> rhs = [&](double t, const std::vector<double>& x) { return ode.rhs(t, x, theta); };
  DenseResult<double> r = integrate_dense(rhs, req.x0, dense_times(req), req.cfg);
  counter += r.counter;
  double loss = 0.0;
  for (std::size_t i = 0; i < req.target.sample_times.size(); ++i)
    loss += sample_cost(r.states[i + 1], req.target.reference[i]);
  return loss;
}

}  // namespace

GradientReport grad_fd(const GradientRequest& req, double h) {
  const auto ode = req.problem();
  req.validate(*ode);
  if (!(h > 0.0)) throw ConfigError("grad_fd: h must be positive");
  const int np = static_cast<int>(req.theta.size());
  const int nx = static_cast<int>(req.x0.size());
  GradientReport report;
  report.method = GradientMethod::kFiniteDiff;
  report.augmented_state_size = nx;

  if (req.target.kind == GradientTarget::Kind::kFinalStateJacobian) {
    report.jacobian.resize(nx, np);
    for (int d = 0; d < np; ++d) {
      const double hd = h * std::max(1.0, std::abs(req.theta[static_cast<std::size_t>(d)]));
      std::vector<double> tp = req.theta, tm = req.theta;
      tp[static_cast<std::size_t>(d)] += hd;
      tm[static_cast<std::size_t>(d)] -= hd;
      RhsFn<double> rp = [&](double t, const std::vector<double>& x) { return ode->rhs(t, x, tp); };
      RhsFn<double> rm = [&](double t, const std::vector<double>& x) { return ode->rhs(t, x, tm); };
      IntegrateResult<double> sp = integrate(rp, req.x0, req.t0, req.t1, req.cfg);
      IntegrateResult<double> sm = integrate(rm, req.x0, req.t0, req.t1, req.cfg);
      report.counters += sp.counter;
      report.counters += sm.counter;
      for (int i = 0; i < nx; ++i)
        report.jacobian(i, d) = (sp.state[static_cast<std::size_t>(i)] -
                                 sm.state[static_cast<std::size_t>(i)]) /
                                (2.0 * hd);
    }
    return report;
  }

  report.gradient.resize(np);
  for (int d = 0; d < np; ++d) {
    const double hd = h * std::max(1.0, std::abs(req.theta[static_cast<std::size_t>(d)]));
    std::vector<double> tp = req.theta, tm = req.theta;
    tp[static_cast<std::size_t>(d)] += hd;
    tm[static_cast<std::size_t>(d)] -= hd;
    const double lp = solve_loss(*ode, req, tp, report.counters);
    const double lm = solve_loss(*ode, req, tm, report.counters);
    report.gradient(d) = (lp - lm) / (2.0 * hd);
  }
  report.loss = solve_loss(*ode, req, req.theta, report.counters);
  return report;
}

GradientReport grad_reverse_ad(const GradientRequest& req) {
  const auto ode = req.problem();
  req.validate(*ode);
  if (!is_fixed_step(req.cfg.method))
    throw ConfigError("grad_reverse_ad: requires a fixed-step integrator "
                      "(derivatives across accept/reject branches are not defined)");
  const int np = static_cast<int>(req.theta.size());
  const int nx = static_cast<int>(req.x0.size());

  GradientReport report;
  report.method = GradientMethod::kReverseAD;
  report.augmented_state_size = nx;

  Tape tape;
  TapeScope scope(tape);
  std::vector<Rev> theta_rev;
  std::vector<int32_t> roots;
  theta_rev.reserve(static_cast<std::size_t>(np));
  for (double v : req.theta) {
    Rev r = Rev::variable(v);
    roots.push_back(r.idx);
    theta_rev.push_back(r);
  }
  RhsFn<Rev> rhs = [&](double t, const std::vector<Rev>& x) { return ode->rhs(t, x, theta_rev); };
  std::vector<Rev> x0(req.x0.begin(), req.x0.end());

  std::vector<double> adj;
  const auto sweep_cost = [&report](std::uint64_t recorded_evals) {
    // One reverse sweep traverses every dynamics recording on the tape.
    report.counters.rhs_evaluations += recorded_evals;
  };

  if (req.target.kind == GradientTarget::Kind::kFinalStateJacobian) {
    IntegrateResult<Rev> sol = integrate(rhs, x0, req.t0, req.t1, req.cfg);
    report.counters += sol.counter;
    report.jacobian = Eigen::MatrixXd::Zero(nx, np);
    for (int i = 0; i < nx; ++i) {
      const Rev& out = sol.state[static_cast<std::size_t>(i)];
      if (out.idx < 0) continue;
      tape.reverse({{out.idx, 1.0}}, adj);
      sweep_cost(sol.counter.rhs_evaluations);
      for (int d = 0; d < np; ++d)
        report.jacobian(i, d) = adj[static_cast<std::size_t>(roots[static_cast<std::size_t>(d)])];
    }
    report.counters.tape_variables = tape.size();
    return report;
  }

  DenseResult<Rev> sol = integrate_dense(rhs, x0, dense_times(req), req.cfg);
  report.counters += sol.counter;
  Rev loss(0.0);
  for (std::size_t i = 0; i < req.target.sample_times.size(); ++i) {
    const auto& x = sol.states[i + 1];
    const auto& ref = req.target.reference[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const Rev d = x[j] - ref[j];
      loss += d * d;
    }
  }
  report.loss = loss.val;
  report.gradient = Eigen::VectorXd::Zero(np);
  if (loss.idx >= 0) {
    tape.reverse({{loss.idx, 1.0}}, adj);
    sweep_cost(sol.counter.rhs_evaluations);
    for (int d = 0; d < np; ++d)
      report.gradient(d) = adj[static_cast<std::size_t>(roots[static_cast<std::size_t>(d)])];
  }
  report.counters.tape_variables = tape.size();
  return report;
}

namespace {

// Augmented RHS of the coupled system. Lane l of chunk c carries the
// directional derivative along (S column d, e_d) for d = c*W + l, which is
// exactly the sensitivity RHS (df/dx) S_d + df/dtheta_d.
class CoupledRhs {
 public:
  CoupledRhs(const ParametricOde& ode, const std::vector<double>& theta)
      : ode_(ode), theta_(theta), nx_(ode.state_size()), np_(ode.param_size()) {}

  int chunks() const { return std::max(1, (np_ + kJvpWidth - 1) / kJvpWidth); }

  // s = [x | S columns]; returns [f | (df/dx) S + df/dtheta].
  std::vector<double> operator()(double t, const std::vector<double>& s) const {
    using D = Dual<kJvpWidth>;
    std::vector<double> ds(s.size());
    for (int c = 0; c < chunks(); ++c) {
      std::vector<D> theta_dual(theta_.begin(), theta_.end());
      std::vector<D> x(static_cast<std::size_t>(nx_));
      for (int l = 0; l < kJvpWidth; ++l) {
        const int d = c * kJvpWidth + l;
        if (d < np_) theta_dual[static_cast<std::size_t>(d)].dot[l] = 1.0;
      }
      for (int i = 0; i < nx_; ++i) {
        D xi(s[static_cast<std::size_t>(i)]);
        for (int l = 0; l < kJvpWidth; ++l) {
          const int d = c * kJvpWidth + l;
          if (d < np_) xi.dot[l] = s[static_cast<std::size_t>(nx_ * (1 + d) + i)];
        }
        x[static_cast<std::size_t>(i)] = xi;
      }
      const std::vector<D> f = ode_.rhs(t, x, theta_dual);
      if (c == 0)
        for (int i = 0; i < nx_; ++i)
          ds[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>(i)].val;
      for (int l = 0; l < kJvpWidth; ++l) {
        const int d = c * kJvpWidth + l;
        if (d >= np_) break;
        for (int i = 0; i < nx_; ++i)
          ds[static_cast<std::size_t>(nx_ * (1 + d) + i)] = f[static_cast<std::size_t>(i)].dot[l];
      }
    }
    return ds;
  }

 private:
  const ParametricOde& ode_;
  const std::vector<double>& theta_;
  int nx_;
  int np_;
};

}  // namespace

GradientReport grad_coupled(const GradientRequest& req) {
  const auto ode = req.problem();
  req.validate(*ode);
  const int np = static_cast<int>(req.theta.size());
  const int nx = static_cast<int>(req.x0.size());

  GradientReport report;
  report.method = GradientMethod::kCoupled;
  report.augmented_state_size = nx * (1 + np);

  CoupledRhs coupled(*ode, req.theta);
  RhsFn<double> rhs = [&coupled](double t, const std::vector<double>& s) { return coupled(t, s); };

  std::vector<double> s0(static_cast<std::size_t>(nx * (1 + np)), 0.0);
  std::copy(req.x0.begin(), req.x0.end(), s0.begin());

  EvalCounter solver_counter;
  if (req.target.kind == GradientTarget::Kind::kFinalStateJacobian) {
    IntegrateResult<double> sol = integrate(rhs, s0, req.t0, req.t1, req.cfg);
    solver_counter = sol.counter;
    report.jacobian.resize(nx, np);
    for (int d = 0; d < np; ++d)
      for (int i = 0; i < nx; ++i)
        report.jacobian(i, d) = sol.state[static_cast<std::size_t>(nx * (1 + d) + i)];
  } else {
    DenseResult<double> sol = integrate_dense(rhs, s0, dense_times(req), req.cfg);
    solver_counter = sol.counter;
    report.gradient = Eigen::VectorXd::Zero(np);
    report.loss = 0.0;
    for (std::size_t k = 0; k < req.target.sample_times.size(); ++k) {
      const auto& s = sol.states[k + 1];
      const std::vector<double> x(s.begin(), s.begin() + nx);
      report.loss += sample_cost(x, req.target.reference[k]);
      const std::vector<double> gx = sample_cost_grad(x, req.target.reference[k]);
      for (int d = 0; d < np; ++d) {
        double acc = 0.0;
        for (int i = 0; i < nx; ++i)
          acc += gx[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(nx * (1 + d) + i)];
        report.gradient(d) += acc;
      }
    }
  }
  report.counters = solver_counter;
  // Each augmented call evaluates the dynamics once per dual chunk.
  report.counters.rhs_evaluations =
      solver_counter.rhs_evaluations * static_cast<std::uint64_t>(coupled.chunks());
  report.counters.tape_variables = 0;
  return report;
}

namespace {

// Backward augmented RHS [x, a, g]' = [f, -a df/dx, -a df/dtheta]; the
// vector-Jacobian products come from one nested tape per call.
class AdjointRhs {
 public:
  AdjointRhs(const ParametricOde& ode, const std::vector<double>& theta)
      : ode_(ode), theta_(theta), nx_(ode.state_size()), np_(ode.param_size()) {}

  std::vector<double> operator()(double t, const std::vector<double>& s) {
    tape_.clear();
    TapeScope scope(tape_);
    std::vector<Rev> theta_rev;
    std::vector<int32_t> theta_roots;
    for (int d = 0; d < np_; ++d) {
      Rev r = Rev::variable(theta_[static_cast<std::size_t>(d)]);
      theta_roots.push_back(r.idx);
      theta_rev.push_back(r);
    }
    std::vector<Rev> x(static_cast<std::size_t>(nx_));
    std::vector<int32_t> x_roots(static_cast<std::size_t>(nx_));
    for (int i = 0; i < nx_; ++i) {
      Rev r = Rev::variable(s[static_cast<std::size_t>(i)]);
      x_roots[static_cast<std::size_t>(i)] = r.idx;
      x[static_cast<std::size_t>(i)] = r;
    }
    const std::vector<Rev> f = ode_.rhs(t, x, theta_rev);

    std::vector<std::pair<int32_t, double>> seeds;
    for (int i = 0; i < nx_; ++i)
      if (f[static_cast<std::size_t>(i)].idx >= 0)
        seeds.emplace_back(f[static_cast<std::size_t>(i)].idx,
                           s[static_cast<std::size_t>(nx_ + i)]);
    tape_.reverse(seeds, adj_);

    std::vector<double> ds(static_cast<std::size_t>(2 * nx_ + np_));
    for (int i = 0; i < nx_; ++i)
      ds[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>(i)].val;
    for (int i = 0; i < nx_; ++i)
      ds[static_cast<std::size_t>(nx_ + i)] =
          -adj_[static_cast<std::size_t>(x_roots[static_cast<std::size_t>(i)])];
    for (int d = 0; d < np_; ++d)
      ds[static_cast<std::size_t>(2 * nx_ + d)] =
          -adj_[static_cast<std::size_t>(theta_roots[static_cast<std::size_t>(d)])];
    return ds;
  }

 private:
  const ParametricOde& ode_;
  const std::vector<double>& theta_;
  int nx_;
  int np_;
  Tape tape_;
  std::vector<double> adj_;
};

}  // namespace

GradientReport grad_adjoint(const GradientRequest& req) {
  const auto ode = req.problem();
  req.validate(*ode);
  if (req.target.kind != GradientTarget::Kind::kLossGradient)
    throw ConfigError("grad_adjoint: computes loss gradients, not full Jacobians");
  const int np = static_cast<int>(req.theta.size());
  const int nx = static_cast<int>(req.x0.size());

  GradientReport report;
  report.method = GradientMethod::kAdjoint;
  report.augmented_state_size = 2 * nx + np;

  // Forward pass: states at the sample times.
  RhsFn<double> rhs = [&](double t, const std::vector<double>& x) {
    return ode->rhs(t, x, req.theta);
  };
  DenseResult<double> fwd = integrate_dense(rhs, req.x0, dense_times(req), req.cfg);
  report.loss = 0.0;
  for (std::size_t i = 0; i < req.target.sample_times.size(); ++i)
    report.loss += sample_cost(fwd.states[i + 1], req.target.reference[i]);

  // Backward pass, segmented at the sample times; the costate jumps by
  // dc/dx at each boundary and x is re-anchored to the stored forward state.
  IntegratorConfig bwd_cfg = req.cfg;
  if (is_fixed_step(bwd_cfg.method)) bwd_cfg.dt = req.cfg.dt / 2.0;

  AdjointRhs adjoint_rhs(*ode, req.theta);
  RhsFn<double> brhs = [&adjoint_rhs](double t, const std::vector<double>& s) {
    return adjoint_rhs(t, s);
  };

  EvalCounter bwd_counter;
  std::vector<double> s(static_cast<std::size_t>(2 * nx + np), 0.0);
  const auto n_samples = req.target.sample_times.size();
  for (std::size_t k = n_samples; k-- > 0;) {
    const double tk = req.target.sample_times[k];
    const auto& xk = fwd.states[k + 1];
    std::copy(xk.begin(), xk.end(), s.begin());
    const std::vector<double> gx = sample_cost_grad(xk, req.target.reference[k]);
    for (int i = 0; i < nx; ++i)
      s[static_cast<std::size_t>(nx + i)] += gx[static_cast<std::size_t>(i)];
    const double t_prev = k == 0 ? req.t0 : req.target.sample_times[k - 1];
    IntegrateResult<double> seg = integrate(brhs, s, tk, t_prev, bwd_cfg);
    bwd_counter += seg.counter;
    s = std::move(seg.state);
  }

  report.gradient = Eigen::VectorXd::Zero(np);
  for (int d = 0; d < np; ++d) report.gradient(d) = s[static_cast<std::size_t>(2 * nx + d)];
  report.counters = fwd.counter;
  report.counters += bwd_counter;
  // Each backward call records the dynamics once and sweeps it once.
  report.counters.rhs_evaluations =
      fwd.counter.rhs_evaluations + 2 * bwd_counter.rhs_evaluations;
  report.counters.tape_variables = 0;  // nested tapes are per-call scratch
  return report;
}

GradientReport compute_gradient(GradientMethod method, const GradientRequest& req, double fd_h) {
  switch (method) {
    case GradientMethod::kFiniteDiff: return grad_fd(req, fd_h);
    case GradientMethod::kReverseAD: return grad_reverse_ad(req);
    case GradientMethod::kCoupled: return grad_coupled(req);
    case GradientMethod::kAdjoint: return grad_adjoint(req);
  }
  throw ConfigError("unknown gradient method");
}

DynamicsJacobians jac_dynamics(const Model& m, const ParameterBinding& binding,
                               const std::vector<double>& theta, const std::vector<double>& x,
                               double t, const std::vector<double>& tau_applied) {
  const int nx = static_cast<int>(x.size());
  const int np = static_cast<int>(theta.size());
  const int total = nx + np;
  DynamicsJacobians out;
  out.dfdx.resize(nx, nx);
  out.dfdtheta.resize(nx, np);
  std::vector<double> tau = tau_applied;
  if (tau.empty()) tau.assign(static_cast<std::size_t>(m.dof), 0.0);
  ControlFn<Dual<kJvpWidth>> control = [&tau](double, std::vector<Dual<kJvpWidth>>& out_tau) {
    for (std::size_t i = 0; i < out_tau.size(); ++i) out_tau[i] = tau[i];
  };
  for (int c = 0; c * kJvpWidth < total; ++c) {
    std::vector<Dual<kJvpWidth>> theta_dual(theta.begin(), theta.end());
    std::vector<Dual<kJvpWidth>> xd(x.begin(), x.end());
    for (int l = 0; l < kJvpWidth; ++l) {
      const int idx = c * kJvpWidth + l;
      if (idx < nx)
        xd[static_cast<std::size_t>(idx)].dot[l] = 1.0;
      else if (idx < total)
        theta_dual[static_cast<std::size_t>(idx - nx)].dot[l] = 1.0;
    }
    const ModelT<Dual<kJvpWidth>> bound = apply_parameters(m, binding, theta_dual);
    const std::vector<Dual<kJvpWidth>> f = ode_rhs<Dual<kJvpWidth>>(bound, control, t, xd);
    for (int l = 0; l < kJvpWidth; ++l) {
      const int idx = c * kJvpWidth + l;
      if (idx >= total) break;
      for (int i = 0; i < nx; ++i) {
        const double v = f[static_cast<std::size_t>(i)].dot[l];
        if (idx < nx)
          out.dfdx(i, idx) = v;
        else
          out.dfdtheta(i, idx - nx) = v;
      }
    }
  }
  return out;
}

}  // namespace diffsim

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

#ifndef DIFFSIM_CONTROL_HPP_
#define DIFFSIM_CONTROL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diffsim/integrate.hpp"
#include "diffsim/lbfgs.hpp"
#include "diffsim/model.hpp"
#include "diffsim/dynamics.hpp"

// Trajectory optimization (iLQR), receding-horizon control, replay-buffer
// model fitting and the adaptive MPC loop, plus the hidden-parameter
// reference environment the controller is evaluated against.

namespace diffsim {

// ---------------------------------------------------------------------------
// Observations for the cartpole family (one prismatic cart joint followed by
// revolute pole joints):
//   (p, pdot, sin q_i, cos q_i ..., qdot_i ..., qddot_i ...)
// with one sin/cos, velocity and acceleration slot per pole joint. The cart
// acceleration is not observed.

struct CartpoleTopology {
  int cart_q = -1;          // coordinate index of the prismatic cart joint
  std::vector<int> poles;   // coordinate indices of the revolute pole joints

  int observation_size() const { return 2 + 4 * static_cast<int>(poles.size()); }
};

// Throws ModelError for unsupported topologies.
template <class T>
CartpoleTopology cartpole_topology(const ModelT<T>& m) {
  CartpoleTopology topo;
  for (std::size_t i = 0; i < m.joints.size(); ++i) {
    if (m.q_index[i] < 0) continue;
    if (m.joints[i].kind == JointKind::kPrismatic) {
      if (topo.cart_q >= 0)
        throw ModelError("observe: more than one prismatic joint");
      topo.cart_q = m.q_index[i];
    } else {
      topo.poles.push_back(m.q_index[i]);
    }
  }
  if (topo.cart_q != 0)
    throw ModelError("observe: cartpole family requires a leading prismatic joint");
  return topo;
}

template <class T>
std::vector<T> observe(const ModelT<T>& m, const StateT<T>& s, const std::vector<T>& qdd) {
  using std::cos;
  using std::sin;
  const CartpoleTopology topo = cartpole_topology(m);
  const auto np = topo.poles.size();
  std::vector<T> obs;
  obs.reserve(2 + 4 * np);
  obs.push_back(s.q[static_cast<std::size_t>(topo.cart_q)]);
  obs.push_back(s.qd[static_cast<std::size_t>(topo.cart_q)]);
  for (int qi : topo.poles) {
    obs.push_back(sin(s.q[static_cast<std::size_t>(qi)]));
    obs.push_back(cos(s.q[static_cast<std::size_t>(qi)]));
  }
  for (int qi : topo.poles) obs.push_back(s.qd[static_cast<std::size_t>(qi)]);
  for (int qi : topo.poles) obs.push_back(qdd[static_cast<std::size_t>(qi)]);
  return obs;
}

// Observation with accelerations computed from the applied generalized
// forces; x is the flat [q, qd] state.
template <class T>
std::vector<T> observe_with_forces(const ModelT<T>& m, const std::vector<T>& x,
                                   const std::vector<T>& tau) {
  const auto n = static_cast<std::size_t>(m.dof);
  StateT<T> s;
  s.q.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  s.qd.assign(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
  return observe(m, s, aba(m, s, tau));
}

// Goal observation: cart centered, poles upright, all rates zero.
std::vector<double> observation_goal(const Model& m);

// Recovers the flat [q, qd] state from an observation (atan2 on the sin/cos
// pairs); accelerations are ignored.
std::vector<double> reconstruct_state(const Model& m, const std::vector<double>& obs);

// ---------------------------------------------------------------------------
// Quadratic trajectory cost (diagonal weights)

struct CostSpec {
  Eigen::VectorXd q_diag;  // stage observation weights
  Eigen::VectorXd r_diag;  // control weights (> 0)
  Eigen::VectorXd s_diag;  // terminal observation weights
  Eigen::VectorXd goal;

  void validate(int obs_dim, int u_dim) const;
};

// J = sum_k (x~' Q x~ + u' R u) + x~_H' S x~_H with x~ = goal - obs.
double cost(const std::vector<Eigen::VectorXd>& obs_traj,
            const std::vector<Eigen::VectorXd>& u_traj, const CostSpec& spec);

struct ControlBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool empty() const { return lower.size() == 0; }
  Eigen::VectorXd clamp(Eigen::VectorXd u) const;
};

// ---------------------------------------------------------------------------
// Controller-side discrete-time model: one control interval per step.

struct ControlModel {
  Model model;               // bound model
  std::vector<int> actuated; // coordinate indices receiving control
  IntegratorConfig step_cfg; // integrator across one interval
  double dt = 0.01;          // control interval (s)

  int nx() const { return 2 * model.dof; }
  int nu() const { return static_cast<int>(actuated.size()); }
};

// Discrete transition over one control interval (zero-order hold).
std::vector<double> control_step(const ControlModel& cm, const std::vector<double>& x,
                                 const Eigen::VectorXd& u);

// Observation of a flat state under held control u.
std::vector<double> control_observe(const ControlModel& cm, const std::vector<double>& x,
                                    const Eigen::VectorXd& u);

// Jacobians of the one-step transition via dual-number sweeps through the
// integrator step.
struct StepJacobians {
  Eigen::MatrixXd A;  // |x| x |x|
  Eigen::MatrixXd B;  // |x| x |u|
};
StepJacobians linearize(const ControlModel& cm, const std::vector<double>& x,
                        const Eigen::VectorXd& u);

// ---------------------------------------------------------------------------
// iLQR

struct IlqrOptions {
  int max_iters = 50;
  double cost_tol = 1e-9;    // stop when the relative improvement drops below
  double mu_init = 0.0;      // Levenberg regularization
  double mu_max = 1e10;
};

struct IlqrResult {
  std::vector<Eigen::VectorXd> controls;     // H
  std::vector<std::vector<double>> states;   // H+1 predicted flat states
  std::vector<double> cost_curve;            // cost after each accepted iteration
  double cost = 0.0;
  int iterations = 0;
  bool diverged = false;
  std::string message;
};

IlqrResult ilqr(const ControlModel& cm, const std::vector<double>& x0,
                std::vector<Eigen::VectorXd> u_init, const CostSpec& spec,
                const ControlBounds& bounds, const IlqrOptions& opts);

// Receding-horizon step: solves over horizon H warm-started from the
// previous solution shifted by one interval and returns the first control.
struct MpcWarmStart {
  std::vector<Eigen::VectorXd> controls;
};

Eigen::VectorXd mpc_step(const ControlModel& cm, const std::vector<double>& x0,
                         const CostSpec& spec, const ControlBounds& bounds, int horizon,
                         MpcWarmStart& warm, const IlqrOptions& opts);

// ---------------------------------------------------------------------------
// Replay buffer and model fitting

struct Transition {
  std::vector<double> obs;
  Eigen::VectorXd u;
  std::vector<double> obs_next;
};

struct ReplayBuffer {
  std::vector<Transition> transitions;
  std::optional<std::size_t> capacity;

  void push(Transition t) {
    if (capacity && transitions.size() >= *capacity)
      transitions.erase(transitions.begin());
    transitions.push_back(std::move(t));
  }
  std::size_t size() const { return transitions.size(); }
};

// One-step prediction loss of theta on a set of transitions
// (sum of squared observation errors; angles enter via sin/cos slots).
double prediction_loss(const ReplayBuffer& buffer, const Model& base,
                       const ParameterBinding& binding, const std::vector<double>& theta,
                       const std::vector<int>& actuated, const IntegratorConfig& step_cfg,
                       double dt);

struct FitResult {
  std::vector<double> theta;
  OptimResult opt;
};

// L-BFGS on the one-step prediction loss, gradients from forward sensitivity
// lanes over single-step horizons.
FitResult fit_model(const ReplayBuffer& buffer, const Model& base, const ParameterBinding& binding,
                    const std::vector<double>& theta0, const OptimizerConfig& opt,
                    const std::vector<int>& actuated, const IntegratorConfig& step_cfg, double dt);

// ---------------------------------------------------------------------------
// Reference environment: a second engine instance with hidden parameters and
// an independently chosen integrator, standing in for an external simulator.

class ReferenceEnvironment {
 public:
  ReferenceEnvironment(Model true_model, std::vector<int> actuated, IntegratorConfig cfg,
                       double control_dt, ControlBounds clamp);

  void reset(const std::vector<double>& x0);
  // Applies the clamped control for one interval; returns the next observation.
  std::vector<double> step(const Eigen::VectorXd& u);

  std::vector<double> observation() const;
  const std::vector<double>& flat_state() const { return x_; }
  const Model& model() const { return model_; }
  double control_dt() const { return dt_; }
  const std::vector<int>& actuated() const { return actuated_; }
  const ControlBounds& clamp() const { return clamp_; }

 private:
  Model model_;
  std::vector<int> actuated_;
  IntegratorConfig cfg_;
  double dt_;
  ControlBounds clamp_;
  std::vector<double> x_;
  Eigen::VectorXd last_u_;
};

// ---------------------------------------------------------------------------
// Adaptive MPC (episodic refitting against the reference environment)

struct AdaptiveMpcConfig {
  int episodes = 3;
  int steps = 140;            // T
  int horizon = 20;           // H
  int warmup_fit_every = 50;  // extra fits during episode 1
  int ilqr_iters = 10;
  int ilqr_first_iters = 40;  // effort for the first solve of each episode
  OptimizerConfig fit_opt;
  std::uint64_t seed = 1;
  double perturbation = 0.05;        // initial pole-angle offset bound (rad)
  std::size_t buffer_capacity = 100;
  int heldout_transitions = 40;
  double success_cos = 0.95;
  int success_window = 10;
};

struct StepRecord {
  int episode;
  int step;
  double t;
  Eigen::VectorXd u;
  std::vector<double> obs;
};

struct AdaptiveMpcResult {
  std::vector<double> episode_costs;
  std::vector<std::vector<double>> theta_history;  // after every fit
  std::vector<int> fit_iterations;
  std::vector<ReplayBuffer> buffers;               // per episode
  std::vector<double> heldout_errors;              // per episode, fixed held-out set
  std::vector<StepRecord> records;
  int success_episode = -1;  // first episode achieving swing-up (1-based)
};

AdaptiveMpcResult adaptive_mpc(ReferenceEnvironment& env, const Model& base,
                               const ParameterBinding& binding, const std::vector<double>& theta0,
                               const CostSpec& spec, const ControlBounds& bounds,
                               const IntegratorConfig& controller_step_cfg,
                               const AdaptiveMpcConfig& cfg);

}  // namespace diffsim

#endif  // DIFFSIM_CONTROL_HPP_

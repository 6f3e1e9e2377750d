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

#ifndef DIFFSIM_SENSITIVITY_HPP_
#define DIFFSIM_SENSITIVITY_HPP_

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diffsim/dynamics.hpp"
#include "diffsim/integrate.hpp"

// Four gradient engines over ODE solutions:
//
//  - finite differences: symmetric quotient, two solves per parameter;
//  - reverse-mode AD: one taped solve through a fixed-step integrator,
//    one reverse sweep per requested output;
//  - coupled (local) sensitivities: one solve of the augmented system
//    [x, dx/dtheta] whose sensitivity columns are propagated by seeding
//    dual-number lanes with the current columns;
//  - adjoint: forward solve storing samples, then a backward solve of
//    [x, a, g] with a' = -a df/dx and g' = -a df/dtheta, the
//    vector-Jacobian products coming from a nested per-call tape.
//
// Counter convention: rhs_evaluations counts traversals of the dynamics
// computation. A plain evaluation, one dual-lane chunk evaluation and one
// tape recording each count 1; a reverse sweep through recorded dynamics
// counts 1 per recorded evaluation it traverses. tape_variables counts
// variables retained on a tape across integration steps; it grows with the
// step count for reverse-mode AD and is zero for the other engines (the
// adjoint's nested tapes never outlive a single call).

namespace diffsim {

// Dual lane width used for chunked forward-mode sweeps.
inline constexpr int kJvpWidth = 16;

enum class GradientMethod { kFiniteDiff, kReverseAD, kCoupled, kAdjoint };

std::string to_string(GradientMethod m);
GradientMethod gradient_method_from_string(const std::string& name);

// A parameter-dependent ODE x' = f(x, t, theta), evaluable over the scalar
// tower. The default implementation is the free dynamics of a bound model;
// tests inject closed-form systems.
class ParametricOde {
 public:
  using DualT = Dual<kJvpWidth>;

  virtual ~ParametricOde() = default;
  virtual int state_size() const = 0;
  virtual int param_size() const = 0;
  virtual std::vector<double> rhs(double t, const std::vector<double>& x,
                                  const std::vector<double>& theta) const = 0;
  virtual std::vector<DualT> rhs(double t, const std::vector<DualT>& x,
                                 const std::vector<DualT>& theta) const = 0;
  virtual std::vector<Rev> rhs(double t, const std::vector<Rev>& x,
                               const std::vector<Rev>& theta) const = 0;
};

// Free (unforced) dynamics of a model under a parameter binding.
class ModelOde final : public ParametricOde {
 public:
  ModelOde(Model model, ParameterBinding binding)
      : model_(std::move(model)), binding_(std::move(binding)) {}

  int state_size() const override { return 2 * model_.dof; }
  int param_size() const override { return binding_.arity(); }
  std::vector<double> rhs(double t, const std::vector<double>& x,
                          const std::vector<double>& theta) const override {
    return ode_rhs(apply_parameters(model_, binding_, theta), ControlFn<double>{}, t, x);
  }
  std::vector<DualT> rhs(double t, const std::vector<DualT>& x,
                         const std::vector<DualT>& theta) const override {
    return ode_rhs(apply_parameters(model_, binding_, theta), ControlFn<DualT>{}, t, x);
  }
  std::vector<Rev> rhs(double t, const std::vector<Rev>& x,
                       const std::vector<Rev>& theta) const override {
    return ode_rhs(apply_parameters(model_, binding_, theta), ControlFn<Rev>{}, t, x);
  }

 private:
  Model model_;
  ParameterBinding binding_;
};

// Wraps a callable f(t, x, theta) -> dx that is generic over the scalar type.
template <class F>
class GenericOde final : public ParametricOde {
 public:
  GenericOde(int nx, int np, F f) : nx_(nx), np_(np), f_(std::move(f)) {}

  int state_size() const override { return nx_; }
  int param_size() const override { return np_; }
  std::vector<double> rhs(double t, const std::vector<double>& x,
                          const std::vector<double>& theta) const override {
    return f_(t, x, theta);
  }
  std::vector<DualT> rhs(double t, const std::vector<DualT>& x,
                         const std::vector<DualT>& theta) const override {
    return f_(t, x, theta);
  }
  std::vector<Rev> rhs(double t, const std::vector<Rev>& x,
                       const std::vector<Rev>& theta) const override {
    return f_(t, x, theta);
  }

 private:
  int nx_;
  int np_;
  F f_;
};

template <class F>
std::shared_ptr<const ParametricOde> make_ode(int nx, int np, F f) {
  return std::make_shared<GenericOde<F>>(nx, np, std::move(f));
}

// Per-sample quadratic cost c_i(x) = sum_j (x_j - ref[i][j])^2, the loss
// shape used by trajectory fitting; an all-zero reference is the squared
// norm of the state.
struct GradientTarget {
  enum class Kind { kFinalStateJacobian, kLossGradient };
  Kind kind = Kind::kFinalStateJacobian;
  // Loss targets: strictly increasing sample times in (t0, t1], one
  // reference state per sample.
  std::vector<double> sample_times;
  std::vector<std::vector<double>> reference;

  static GradientTarget final_state_jacobian() { return {}; }
  static GradientTarget loss(std::vector<double> times, std::vector<std::vector<double>> ref) {
    GradientTarget t;
    t.kind = Kind::kLossGradient;
    t.sample_times = std::move(times);
    t.reference = std::move(ref);
    return t;
  }
};

struct GradientRequest {
  // Model path (used when ode is null).
  Model model;
  ParameterBinding binding;
  // Direct ODE injection.
  std::shared_ptr<const ParametricOde> ode;

  std::vector<double> theta;
  std::vector<double> x0;  // flat [q, qd]
  double t0 = 0.0;
  double t1 = 1.0;
  IntegratorConfig cfg;
  GradientTarget target;

  std::shared_ptr<const ParametricOde> problem() const;
  void validate(const ParametricOde& problem) const;
};

struct GradientReport {
  GradientMethod method = GradientMethod::kFiniteDiff;
  Eigen::MatrixXd jacobian;   // |x| x |theta| for final-state targets
  Eigen::VectorXd gradient;   // |theta| for loss targets
  double loss = 0.0;          // loss value (loss targets only)
  EvalCounter counters;
  int augmented_state_size = 0;
};

// Symmetric finite differences; h is scaled per coordinate by max(1, |theta_d|).
GradientReport grad_fd(const GradientRequest& req, double h = 1e-5);

// Reverse-mode tape through the whole (fixed-step) integrator.
GradientReport grad_reverse_ad(const GradientRequest& req);

// Coupled ODE system: integrates [x, dx/dtheta], augmented size |x|(1+|theta|).
GradientReport grad_coupled(const GradientRequest& req);

// Adjoint sensitivity method; loss-gradient targets only. The backward pass
// re-integrates x alongside [a, g]; with fixed-step configs it runs at half
// the forward step for costate accuracy.
GradientReport grad_adjoint(const GradientRequest& req);

GradientReport compute_gradient(GradientMethod method, const GradientRequest& req,
                                double fd_h = 1e-5);

// Inner Jacobians of the free dynamics f(x; theta) at one state, by chunked
// dual-number sweeps (one lane per input column).
struct DynamicsJacobians {
  Eigen::MatrixXd dfdx;      // |x| x |x|
  Eigen::MatrixXd dfdtheta;  // |x| x |theta|
};

DynamicsJacobians jac_dynamics(const Model& m, const ParameterBinding& binding,
                               const std::vector<double>& theta, const std::vector<double>& x,
                               double t, const std::vector<double>& tau_applied = {});

}  // namespace diffsim

#endif  // DIFFSIM_SENSITIVITY_HPP_

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

#ifndef DIFFSIM_DYNAMICS_HPP_
#define DIFFSIM_DYNAMICS_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "diffsim/model.hpp"

// Recursive rigid-body dynamics over the scalar tower: forward kinematics,
// ABA forward dynamics, RNEA inverse dynamics, mass matrix, bias forces and
// energy. All functions are pure; instrumentation counters are thread-local.

namespace diffsim {

template <class T>
struct StateT {
  std::vector<T> q;
  std::vector<T> qd;
};

using State = StateT<double>;

template <class T>
struct FramePoseT {
  Vec3<T> position;
  Quat<T> orientation;
};

using FramePose = FramePoseT<double>;

// Thread-local instrumentation. `dynamics_evals` counts executions of the
// forward-dynamics computation (any scalar type); `body_visits` counts
// per-body loop iterations, which the tests use to pin the O(n) cost of ABA.
struct DynamicsCounters {
  std::uint64_t dynamics_evals = 0;
  std::uint64_t body_visits = 0;
};

inline DynamicsCounters& dynamics_counters() {
  thread_local DynamicsCounters c;
  return c;
}

namespace detail {

// Pose of body i in its parent frame for joint coordinate q.
template <class T>
SpatialTransform<T> joint_pose(const Joint<T>& j, const T& q) {
  switch (j.kind) {
    case JointKind::kRevolute:
      return compose(j.parent_to_joint,
                     SpatialTransform<T>{Quat<T>::from_axis_angle(j.axis, q), Vec3<T>::zero()});
    case JointKind::kPrismatic: {
      SpatialTransform<T> X = j.parent_to_joint;
      X.trans += X.rot.rotate(j.axis * q);
      return X;
    }
    case JointKind::kFixed:
      return j.parent_to_joint;
  }
  return SpatialTransform<T>::identity();
}

// Per-body kinematic scratch shared by the recursive algorithms.
template <class T>
struct LinkFrame {
  Mat3<T> E;           // child -> parent rotation
  Vec3<T> r;           // child origin in parent coordinates
  SpatialMotion<T> S;  // motion subspace in child coordinates (dof joints)
};

template <class T>
LinkFrame<T> link_frame(const Joint<T>& j, const T& q) {
  const SpatialTransform<T> X = joint_pose(j, q);
  LinkFrame<T> f;
  f.E = X.rot.to_matrix();
  f.r = X.trans;
  if (j.kind == JointKind::kRevolute)
    f.S = {j.axis, Vec3<T>::zero()};
  else if (j.kind == JointKind::kPrismatic)
    f.S = {Vec3<T>::zero(), j.axis};
  else
    f.S = SpatialMotion<T>::zero();
  return f;
}

// Parent-frame motion expressed in the child frame.
template <class T>
SpatialMotion<T> motion_to_child(const LinkFrame<T>& f, const SpatialMotion<T>& v) {
  const Vec3<T> ang = transposed_mul(f.E, v.ang);
  return {ang, transposed_mul(f.E, v.lin - cross(f.r, v.ang))};
}

// Child-frame force expressed in the parent frame.
template <class T>
SpatialForce<T> force_to_parent(const LinkFrame<T>& f, const SpatialForce<T>& fc) {
  const Vec3<T> force = f.E * fc.force;
  return {f.E * fc.moment + cross(f.r, force), force};
}

}  // namespace detail

// Forward kinematics: world pose of every body frame; the last body is the
// end-effector of serial chains.
template <class T>
std::vector<FramePoseT<T>> forward_kinematics(const ModelT<T>& m, const std::vector<T>& q) {
  if (static_cast<int>(q.size()) != m.dof)
    throw ModelError("forward_kinematics: expected " + std::to_string(m.dof) +
                     " coordinates, got " + std::to_string(q.size()));
  const int nb = m.body_count();
  std::vector<SpatialTransform<T>> world(static_cast<std::size_t>(nb));
  std::vector<FramePoseT<T>> out(static_cast<std::size_t>(nb));
  for (int i = 0; i < nb; ++i) {
    const T qi = m.q_index[i] >= 0 ? q[static_cast<std::size_t>(m.q_index[i])] : T(0.0);
    const SpatialTransform<T> X = detail::joint_pose(m.joints[i], qi);
    world[i] = m.parent[i] < 0 ? X : compose(world[static_cast<std::size_t>(m.parent[i])], X);
    out[i] = {world[i].trans, world[i].rot};
  }
  return out;
}

// Articulated Body Algorithm: joint accelerations from state and applied
// generalized forces, O(n) in the body count. Gravity enters as a fictitious
// base acceleration.
template <class T>
std::vector<T> aba(const ModelT<T>& m, const StateT<T>& s, const std::vector<T>& tau) {
  const int nb = m.body_count();
  if (static_cast<int>(s.q.size()) != m.dof || static_cast<int>(s.qd.size()) != m.dof ||
      static_cast<int>(tau.size()) != m.dof)
    throw ModelError("aba: state/force dimensions do not match dof");
  auto& counters = dynamics_counters();
  counters.dynamics_evals += 1;

  std::vector<detail::LinkFrame<T>> frame(static_cast<std::size_t>(nb));
  std::vector<SpatialMotion<T>> v(static_cast<std::size_t>(nb));
  std::vector<SpatialMotion<T>> c(static_cast<std::size_t>(nb));
  std::vector<Mat6<T>> IA(static_cast<std::size_t>(nb));
  std::vector<SpatialForce<T>> pA(static_cast<std::size_t>(nb));
  std::vector<SpatialForce<T>> U(static_cast<std::size_t>(nb));
  std::vector<T> D(static_cast<std::size_t>(nb), T(1.0));
  std::vector<T> u(static_cast<std::size_t>(nb), T(0.0));

  for (int i = 0; i < nb; ++i) {
    counters.body_visits += 1;
    const int qi = m.q_index[i];
    const T q = qi >= 0 ? s.q[static_cast<std::size_t>(qi)] : T(0.0);
    frame[i] = detail::link_frame(m.joints[i], q);
    const SpatialMotion<T> vp = m.parent[i] < 0
                                    ? SpatialMotion<T>::zero()
                                    : detail::motion_to_child(frame[i], v[static_cast<std::size_t>(m.parent[i])]);
    if (qi >= 0) {
      const SpatialMotion<T> vj = frame[i].S * s.qd[static_cast<std::size_t>(qi)];
      v[i] = vp + vj;
      c[i] = cross_motion(v[i], vj);
    } else {
      v[i] = vp;
      c[i] = SpatialMotion<T>::zero();
    }
    IA[i] = to_mat6(m.bodies[i].inertia);
    pA[i] = cross_force(v[i], inertia_apply(m.bodies[i].inertia, v[i]));
  }

  for (int i = nb - 1; i >= 0; --i) {
    counters.body_visits += 1;
    const int qi = m.q_index[i];
    Mat6<T> Ia = IA[i];
    SpatialForce<T> pa = pA[i] + IA[i] * c[i];
    if (qi >= 0) {
      U[i] = IA[i] * frame[i].S;
      D[i] = dot(frame[i].S, U[i]);
      u[i] = tau[static_cast<std::size_t>(qi)] - dot(frame[i].S, pA[i]);
      if (!(value(D[i]) > 1e-14))
        throw DynamicsError("aba: singular articulated inertia at joint " + std::to_string(i));
      const T invD = T(1.0) / D[i];
      Ia = Ia - outer(U[i] * invD, SpatialMotion<T>{U[i].moment, U[i].force});
      pa = pA[i] + Ia * c[i] + U[i] * (u[i] * invD);
    }
    if (m.parent[i] >= 0) {
      const auto p = static_cast<std::size_t>(m.parent[i]);
      IA[p] += transform_inertia(Ia, frame[i].E, frame[i].r);
      pA[p] = pA[p] + detail::force_to_parent(frame[i], pa);
    }
  }

  std::vector<SpatialMotion<T>> a(static_cast<std::size_t>(nb));
  std::vector<T> qdd(static_cast<std::size_t>(m.dof), T(0.0));
  const SpatialMotion<T> a_base{Vec3<T>::zero(), -m.gravity};
  for (int i = 0; i < nb; ++i) {
    counters.body_visits += 1;
    const SpatialMotion<T> ap = m.parent[i] < 0 ? a_base : a[static_cast<std::size_t>(m.parent[i])];
    SpatialMotion<T> ai = detail::motion_to_child(frame[i], ap) + c[i];
    const int qi = m.q_index[i];
    if (qi >= 0) {
      const T qddi = (u[i] - dot(SpatialMotion<T>{U[i].moment, U[i].force}, ai)) / D[i];
      qdd[static_cast<std::size_t>(qi)] = qddi;
      ai = ai + frame[i].S * qddi;
    }
    a[i] = ai;
  }
  return qdd;
}

namespace detail {

template <class T>
std::vector<T> rnea_impl(const ModelT<T>& m, const StateT<T>& s, const std::vector<T>& qdd,
                         bool with_gravity) {
  const int nb = m.body_count();
  if (static_cast<int>(s.q.size()) != m.dof || static_cast<int>(s.qd.size()) != m.dof ||
      static_cast<int>(qdd.size()) != m.dof)
    throw ModelError("rnea: state/acceleration dimensions do not match dof");
  auto& counters = dynamics_counters();

  std::vector<LinkFrame<T>> frame(static_cast<std::size_t>(nb));
  std::vector<SpatialMotion<T>> v(static_cast<std::size_t>(nb));
  std::vector<SpatialMotion<T>> a(static_cast<std::size_t>(nb));
  std::vector<SpatialForce<T>> f(static_cast<std::size_t>(nb));
  const SpatialMotion<T> a_base{Vec3<T>::zero(),
                                with_gravity ? Vec3<T>(-m.gravity.x, -m.gravity.y, -m.gravity.z)
                                             : Vec3<T>::zero()};

  for (int i = 0; i < nb; ++i) {
    counters.body_visits += 1;
    const int qi = m.q_index[i];
    const T q = qi >= 0 ? s.q[static_cast<std::size_t>(qi)] : T(0.0);
    frame[i] = link_frame(m.joints[i], q);
    const bool root = m.parent[i] < 0;
    const SpatialMotion<T> vp =
        root ? SpatialMotion<T>::zero()
             : motion_to_child(frame[i], v[static_cast<std::size_t>(m.parent[i])]);
    const SpatialMotion<T> ap =
        root ? motion_to_child(frame[i], a_base)
             : motion_to_child(frame[i], a[static_cast<std::size_t>(m.parent[i])]);
    if (qi >= 0) {
      const SpatialMotion<T> vj = frame[i].S * s.qd[static_cast<std::size_t>(qi)];
      v[i] = vp + vj;
      a[i] = ap + frame[i].S * qdd[static_cast<std::size_t>(qi)] + cross_motion(v[i], vj);
    } else {
      v[i] = vp;
      a[i] = ap;
    }
    f[i] = inertia_apply(m.bodies[i].inertia, a[i]) +
           cross_force(v[i], inertia_apply(m.bodies[i].inertia, v[i]));
  }

  std::vector<T> tau(static_cast<std::size_t>(m.dof), T(0.0));
  for (int i = nb - 1; i >= 0; --i) {
    counters.body_visits += 1;
    const int qi = m.q_index[i];
    if (qi >= 0) tau[static_cast<std::size_t>(qi)] = dot(frame[i].S, f[i]);
    if (m.parent[i] >= 0)
      f[static_cast<std::size_t>(m.parent[i])] =
          f[static_cast<std::size_t>(m.parent[i])] + force_to_parent(frame[i], f[i]);
  }
  return tau;
}

}  // namespace detail

// Recursive Newton-Euler: generalized forces tau = H(q) qdd + C(q, qd) + G(q).
// Direct evaluation of the equations of motion; serves as the ABA oracle.
template <class T>
std::vector<T> rnea(const ModelT<T>& m, const StateT<T>& s, const std::vector<T>& qdd) {
  return detail::rnea_impl(m, s, qdd, /*with_gravity=*/true);
}

// C(q, qd) + G(q), i.e. rnea with zero accelerations.
template <class T>
std::vector<T> bias_forces(const ModelT<T>& m, const StateT<T>& s) {
  return detail::rnea_impl(m, s, std::vector<T>(static_cast<std::size_t>(m.dof), T(0.0)),
                           /*with_gravity=*/true);
}

// Joint-space inertia matrix H(q), column-wise via RNEA with unit
// accelerations and the gravity/velocity contributions removed.
inline Eigen::MatrixXd mass_matrix(const Model& m, const std::vector<double>& q) {
  StateT<double> s{q, std::vector<double>(static_cast<std::size_t>(m.dof), 0.0)};
  Eigen::MatrixXd H(m.dof, m.dof);
  std::vector<double> e(static_cast<std::size_t>(m.dof), 0.0);
  for (int j = 0; j < m.dof; ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    const std::vector<double> col = detail::rnea_impl(m, s, e, /*with_gravity=*/false);
    e[static_cast<std::size_t>(j)] = 0.0;
    for (int i = 0; i < m.dof; ++i) H(i, j) = col[static_cast<std::size_t>(i)];
  }
  return H;
}

// Kinetic plus gravitational potential energy; the potential datum is the
// world origin.
template <class T>
T total_energy(const ModelT<T>& m, const StateT<T>& s) {
  const int nb = m.body_count();
  std::vector<detail::LinkFrame<T>> frame(static_cast<std::size_t>(nb));
  std::vector<SpatialMotion<T>> v(static_cast<std::size_t>(nb));
  std::vector<SpatialTransform<T>> world(static_cast<std::size_t>(nb));
  T energy(0.0);
  for (int i = 0; i < nb; ++i) {
    const int qi = m.q_index[i];
    const T q = qi >= 0 ? s.q[static_cast<std::size_t>(qi)] : T(0.0);
    const SpatialTransform<T> X = detail::joint_pose(m.joints[i], q);
    world[i] = m.parent[i] < 0 ? X : compose(world[static_cast<std::size_t>(m.parent[i])], X);
    frame[i] = detail::link_frame(m.joints[i], q);
    SpatialMotion<T> vp = m.parent[i] < 0
                              ? SpatialMotion<T>::zero()
                              : detail::motion_to_child(frame[i], v[static_cast<std::size_t>(m.parent[i])]);
    if (qi >= 0) vp = vp + frame[i].S * s.qd[static_cast<std::size_t>(qi)];
    v[i] = vp;
    energy += T(0.5) * dot(v[i], inertia_apply(m.bodies[i].inertia, v[i]));
    const Vec3<T> com_world = world[i].apply_point(m.bodies[i].inertia.com);
    energy -= m.bodies[i].inertia.mass * dot(m.gravity, com_world);
  }
  return energy;
}

// ---------------------------------------------------------------------------
// ODE right-hand side over flat states x = [q, qd]

// Fills the generalized-force vector for time t (zero where unactuated).
template <class T>
using ControlFn = std::function<void(double, std::vector<T>&)>;

template <class T>
std::vector<T> ode_rhs(const ModelT<T>& m, const ControlFn<T>& control, double t,
                       const std::vector<T>& x) {
  const auto n = static_cast<std::size_t>(m.dof);
  if (x.size() != 2 * n) throw ModelError("ode_rhs: flat state must have length 2*dof");
  StateT<T> s;
  s.q.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  s.qd.assign(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
  std::vector<T> tau(n, T(0.0));
  if (control) control(t, tau);
  std::vector<T> dx(2 * n);
  for (std::size_t i = 0; i < n; ++i) dx[i] = s.qd[i];
  const std::vector<T> qdd = aba(m, s, tau);
  for (std::size_t i = 0; i < n; ++i) dx[n + i] = qdd[i];
  return dx;
}

// Convenience overload that binds parameters first.
template <class T>
std::vector<T> ode_rhs(const Model& m, const ParameterBinding& binding,
                       const std::vector<T>& theta, const ControlFn<T>& control, double t,
                       const std::vector<T>& x) {
  const ModelT<T> bound = apply_parameters(m, binding, theta);
  return ode_rhs(bound, control, t, x);
}

}  // namespace diffsim

#endif  // DIFFSIM_DYNAMICS_HPP_

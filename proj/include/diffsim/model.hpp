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

#ifndef DIFFSIM_MODEL_HPP_
#define DIFFSIM_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diffsim/error.hpp"
#include "diffsim/spatial.hpp"

// Kinematic trees: bodies and joints in topological order (parent before
// child), plus the parameter-binding layer that overwrites selected model
// fields from a parameter vector, and Denavit-Hartenberg chain construction.

namespace diffsim {

enum class JointKind { kRevolute, kPrismatic, kFixed };

template <class T>
struct Joint {
  JointKind kind = JointKind::kRevolute;
  Vec3<T> axis{T(0.0), T(0.0), T(1.0)};     // unit, in the joint frame
  SpatialTransform<T> parent_to_joint = SpatialTransform<T>::identity();
  std::optional<std::pair<double, double>> position_limits;
};

template <class T>
struct Body {
  SpatialInertia<T> inertia;
  std::string name;
};

// Tree model. joints[i] attaches bodies[i] to bodies[parent[i]]
// (parent -1 is the world). Immutable after construction; parameter
// application returns copies.
template <class T>
struct ModelT {
  std::vector<Body<T>> bodies;
  std::vector<Joint<T>> joints;
  std::vector<int> parent;
  Vec3<T> gravity{T(0.0), T(0.0), T(-9.81)};

  // Derived by finalize().
  int dof = 0;
  std::vector<int> q_index;  // per joint; -1 for fixed joints

  int body_count() const { return static_cast<int>(bodies.size()); }

  // Validates tree structure and computes dof / coordinate indices.
  void finalize() {
    const int nb = body_count();
    if (static_cast<int>(joints.size()) != nb || static_cast<int>(parent.size()) != nb)
      throw ModelError("model: bodies, joints and parent lists must have equal length");
    q_index.assign(nb, -1);
    dof = 0;
    for (int i = 0; i < nb; ++i) {
      if (parent[i] < -1 || parent[i] >= nb)
        throw ModelError("model: dangling parent reference at joint " + std::to_string(i));
      if (parent[i] >= i)
        throw ModelError("model: cycle detected at joint " + std::to_string(i) +
                         " (parent " + std::to_string(parent[i]) +
                         " does not precede its child)");
      if (!(value(bodies[i].inertia.mass) > 0.0))
        throw ModelError("model: non-positive mass for body '" + bodies[i].name + "'");
      if (joints[i].kind != JointKind::kFixed) q_index[i] = dof++;
    }
  }
};

using Model = ModelT<double>;

template <class T>
inline Vec3<T> lift(const Vec3<double>& v) {
  return {T(v.x), T(v.y), T(v.z)};
}
template <class T>
inline Quat<T> lift(const Quat<double>& q) {
  return {T(q.w), T(q.x), T(q.y), T(q.z)};
}
template <class T>
inline Mat3<T> lift(const Mat3<double>& m) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = T(m.m[i][j]);
  return r;
}

// Lifts every numeric field to scalar type T (constants).
template <class T>
ModelT<T> lift_model(const Model& m) {
  ModelT<T> r;
  r.bodies.reserve(m.bodies.size());
  for (const auto& b : m.bodies) {
    Body<T> lb;
    lb.name = b.name;
    lb.inertia.mass = T(b.inertia.mass);
    lb.inertia.com = lift<T>(b.inertia.com);
    lb.inertia.inertia_com = lift<T>(b.inertia.inertia_com);
    r.bodies.push_back(std::move(lb));
  }
  r.joints.reserve(m.joints.size());
  for (const auto& j : m.joints) {
    Joint<T> lj;
    lj.kind = j.kind;
    lj.axis = lift<T>(j.axis);
    lj.parent_to_joint = {lift<T>(j.parent_to_joint.rot), lift<T>(j.parent_to_joint.trans)};
    lj.position_limits = j.position_limits;
    r.joints.push_back(std::move(lj));
  }
  r.parent = m.parent;
  r.gravity = lift<T>(m.gravity);
  r.finalize();
  return r;
}

// ---------------------------------------------------------------------------
// Parameter binding

enum class ModelField {
  kLinkLength,  // magnitude of a joint's translation offset along its stored direction
  kBodyMass,
  kComX,
  kComY,
  kComZ,
  kInertiaXX,  // diagonal rotational inertia terms (about the com)
  kInertiaYY,
  kInertiaZZ,
};

struct BindingEntry {
  ModelField field;
  int target;       // body index, or joint index for kLinkLength
  int theta_index;
};

// Maps parameter-vector entries onto model fields. Several fields may share
// one theta index; every index must be bound at least once.
struct ParameterBinding {
  std::vector<BindingEntry> entries;

  int arity() const {
    int n = 0;
    for (const auto& e : entries) n = std::max(n, e.theta_index + 1);
    return n;
  }

  void validate(const Model& m) const {
    const int n = arity();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto& e : entries) {
      if (e.theta_index < 0) throw ModelError("binding: negative parameter index");
      seen[static_cast<std::size_t>(e.theta_index)] = 1;
      const bool is_joint = e.field == ModelField::kLinkLength;
      const int limit = is_joint ? static_cast<int>(m.joints.size())
                                 : static_cast<int>(m.bodies.size());
      if (e.target < 0 || e.target >= limit)
        throw ModelError("binding: selector references a missing " +
                         std::string(is_joint ? "joint" : "body"));
      if (is_joint && value(norm(m.joints[e.target].parent_to_joint.trans)) <= 0.0)
        throw ModelError("binding: link-length selector on a joint with zero offset");
    }
    for (int i = 0; i < n; ++i)
      if (!seen[static_cast<std::size_t>(i)])
        throw ModelError("binding: parameter " + std::to_string(i) + " is never bound");
  }
};

// Returns a copy of the model with bound fields overwritten by theta.
// Unbound fields are untouched. The scalar type of theta decides the scalar
// type of the result, so dual/tape parameters flow into the dynamics.
template <class T>
ModelT<T> apply_parameters(const Model& m, const ParameterBinding& binding,
                           const std::vector<T>& theta) {
  binding.validate(m);
  if (static_cast<int>(theta.size()) != binding.arity())
    throw ModelError("apply_parameters: theta has length " + std::to_string(theta.size()) +
                     ", binding arity is " + std::to_string(binding.arity()));
  ModelT<T> r = lift_model<T>(m);
  for (const auto& e : binding.entries) {
    const T& v = theta[static_cast<std::size_t>(e.theta_index)];
    switch (e.field) {
      case ModelField::kLinkLength: {
        const Vec3<double> base = m.joints[e.target].parent_to_joint.trans;
        const double len = std::sqrt(base.x * base.x + base.y * base.y + base.z * base.z);
        const Vec3<double> dir{base.x / len, base.y / len, base.z / len};
        r.joints[e.target].parent_to_joint.trans = {v * dir.x, v * dir.y, v * dir.z};
        break;
      }
      case ModelField::kBodyMass:
        r.bodies[e.target].inertia.mass = v;
        break;
      case ModelField::kComX:
        r.bodies[e.target].inertia.com.x = v;
        break;
      case ModelField::kComY:
        r.bodies[e.target].inertia.com.y = v;
        break;
      case ModelField::kComZ:
        r.bodies[e.target].inertia.com.z = v;
        break;
      case ModelField::kInertiaXX:
        r.bodies[e.target].inertia.inertia_com.m[0][0] = v;
        break;
      case ModelField::kInertiaYY:
        r.bodies[e.target].inertia.inertia_com.m[1][1] = v;
        break;
      case ModelField::kInertiaZZ:
        r.bodies[e.target].inertia.inertia_com.m[2][2] = v;
        break;
    }
  }
  for (const auto& b : r.bodies)
    if (!(value(b.inertia.mass) > 0.0))
      throw ModelError("apply_parameters: non-positive mass for body '" + b.name + "'");
  return r;
}

// ---------------------------------------------------------------------------
// Denavit-Hartenberg chains (standard/distal convention)

template <class T>
struct DHRow {
  T d{}, a{}, alpha{};  // theta_i is the runtime joint coordinate
};

template <class T>
struct DHParamsT {
  std::vector<DHRow<T>> rows;

  int joint_count() const { return static_cast<int>(rows.size()); }
};

using DHParams = DHParamsT<double>;

// Serial chain of N revolute joints about z whose frame-to-frame transform
// is RotZ(q_i) TransZ(d_i) TransX(a_i) RotX(alpha_i). The constant tail of
// each DH transform becomes the fixed offset of the next joint; a final
// fixed joint carries the last link so that forward kinematics of the last
// body lands on the end-effector frame. Bodies are unit point masses at the
// frame origins (mass is irrelevant to kinematic design).
template <class T>
ModelT<T> model_from_dh(const DHParamsT<T>& dh) {
  const int n = dh.joint_count();
  if (n < 1) throw ModelError("model_from_dh: need at least one joint");
  auto link_transform = [](const DHRow<T>& row) {
    SpatialTransform<T> X;
    X.rot = Quat<T>::from_axis_angle(Vec3<T>{T(1.0), T(0.0), T(0.0)}, row.alpha);
    X.trans = {row.a, T(0.0), row.d};
    return X;
  };
  ModelT<T> m;
  m.gravity = Vec3<T>::zero();
  for (int i = 0; i <= n; ++i) {
    Body<T> b;
    b.name = i < n ? "link" + std::to_string(i) : "end_effector";
    b.inertia = SpatialInertia<T>::point_mass(T(1.0), Vec3<T>::zero());
    m.bodies.push_back(std::move(b));
    Joint<T> j;
    if (i < n) {
      j.kind = JointKind::kRevolute;
      j.axis = {T(0.0), T(0.0), T(1.0)};
      j.parent_to_joint = i == 0 ? SpatialTransform<T>::identity()
                                 : link_transform(dh.rows[static_cast<std::size_t>(i - 1)]);
    } else {
      j.kind = JointKind::kFixed;
      j.parent_to_joint = link_transform(dh.rows[static_cast<std::size_t>(n - 1)]);
    }
    m.joints.push_back(std::move(j));
    m.parent.push_back(i - 1);
  }
  m.finalize();
  return m;
}

// ---------------------------------------------------------------------------
// Model document I/O (JSON, schema documented in the README)

Model parse_model(const std::string& text);
std::string print_model(const Model& m);
Model load_model_file(const std::string& path);

}  // namespace diffsim

#endif  // DIFFSIM_MODEL_HPP_

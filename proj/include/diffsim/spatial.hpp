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

#ifndef DIFFSIM_SPATIAL_HPP_
#define DIFFSIM_SPATIAL_HPP_

#include "diffsim/algebra.hpp"

// 6-D spatial vector algebra in Featherstone's convention (angular part
// first). Transforms are stored as poses: X = (rotation q, translation p)
// places a child frame in its parent, so a point with child coordinates y
// has parent coordinates R(q) y + p.

namespace diffsim {

template <class T>
struct SpatialMotion {
  Vec3<T> ang;  // rad/s or rad/s^2
  Vec3<T> lin;  // m/s or m/s^2

  static SpatialMotion zero() { return {Vec3<T>::zero(), Vec3<T>::zero()}; }
};

template <class T>
struct SpatialForce {
  Vec3<T> moment;  // N m
  Vec3<T> force;   // N

  static SpatialForce zero() { return {Vec3<T>::zero(), Vec3<T>::zero()}; }
};

template <class T>
inline SpatialMotion<T> operator+(const SpatialMotion<T>& a, const SpatialMotion<T>& b) {
  return {a.ang + b.ang, a.lin + b.lin};
}
template <class T>
inline SpatialMotion<T> operator-(const SpatialMotion<T>& a, const SpatialMotion<T>& b) {
  return {a.ang - b.ang, a.lin - b.lin};
}
template <class T, class S>
inline SpatialMotion<T> operator*(const SpatialMotion<T>& a, const S& s) {
  return {a.ang * s, a.lin * s};
}
template <class T>
inline SpatialForce<T> operator+(const SpatialForce<T>& a, const SpatialForce<T>& b) {
  return {a.moment + b.moment, a.force + b.force};
}
template <class T>
inline SpatialForce<T> operator-(const SpatialForce<T>& a, const SpatialForce<T>& b) {
  return {a.moment - b.moment, a.force - b.force};
}
template <class T, class S>
inline SpatialForce<T> operator*(const SpatialForce<T>& a, const S& s) {
  return {a.moment * s, a.force * s};
}

template <class T>
inline T dot(const SpatialMotion<T>& v, const SpatialForce<T>& f) {
  return dot(v.ang, f.moment) + dot(v.lin, f.force);
}
template <class T>
inline T dot(const SpatialMotion<T>& a, const SpatialMotion<T>& b) {
  return dot(a.ang, b.ang) + dot(a.lin, b.lin);
}

// Spatial motion cross product v x m.
template <class T>
inline SpatialMotion<T> cross_motion(const SpatialMotion<T>& v, const SpatialMotion<T>& m) {
  return {cross(v.ang, m.ang), cross(v.ang, m.lin) + cross(v.lin, m.ang)};
}

// Spatial force cross product v x* f (dual of cross_motion).
template <class T>
inline SpatialForce<T> cross_force(const SpatialMotion<T>& v, const SpatialForce<T>& f) {
  return {cross(v.ang, f.moment) + cross(v.lin, f.force), cross(v.ang, f.force)};
}

template <class T>
struct SpatialTransform {
  Quat<T> rot;    // unit quaternion, renormalized after composition
  Vec3<T> trans;  // m

  static SpatialTransform identity() {
    return {Quat<T>::identity(), Vec3<T>::zero()};
  }

  Vec3<T> apply_point(const Vec3<T>& p) const { return rot.rotate(p) + trans; }

  SpatialTransform inverse() const {
    const Quat<T> qc = rot.conjugated();
    return {qc, -qc.rotate(trans)};
  }
};

// Composition: the result applies `b` first, then `a` (pose chaining).
template <class T>
inline SpatialTransform<T> compose(const SpatialTransform<T>& a, const SpatialTransform<T>& b) {
  SpatialTransform<T> r;
  r.rot = (a.rot * b.rot).normalized();
  r.trans = a.rot.rotate(b.trans) + a.trans;
  return r;
}

// Expresses a motion given in the frame placed by X in X's parent frame.
template <class T>
inline SpatialMotion<T> transform_motion(const SpatialTransform<T>& X, const SpatialMotion<T>& v) {
  const Vec3<T> ang = X.rot.rotate(v.ang);
  return {ang, X.rot.rotate(v.lin) + cross(X.trans, ang)};
}

// Expresses a force given in the frame placed by X in X's parent frame.
template <class T>
inline SpatialForce<T> transform_force(const SpatialTransform<T>& X, const SpatialForce<T>& f) {
  const Vec3<T> force = X.rot.rotate(f.force);
  return {X.rot.rotate(f.moment) + cross(X.trans, force), force};
}

// Rigid-body inertia: mass, center of mass in the body frame, and the
// rotational inertia about the center of mass. The origin-referenced 6x6
// operator is assembled on demand (parallel axis), which keeps any
// (mass, com) overwrite a valid rigid body as long as inertia_com stays PSD.
template <class T>
struct SpatialInertia {
  T mass{};
  Vec3<T> com;
  Mat3<T> inertia_com;

  static SpatialInertia point_mass(T m, const Vec3<T>& c) {
    return {std::move(m), c, Mat3<T>::zero()};
  }
};

// Momentum (or force) of motion v under inertia I, about the body origin:
//   moment = I_origin w + c x m v,   force = m (v + w x c)
// with I_origin = I_com + m (c.c 1 - c c^T).
template <class T>
inline SpatialForce<T> inertia_apply(const SpatialInertia<T>& I, const SpatialMotion<T>& v) {
  const Vec3<T> mc = I.com * I.mass;
  const Vec3<T> w = v.ang;
  // I_origin * w without forming the matrix.
  const Vec3<T> io_w = I.inertia_com * w + cross(I.com, cross(w, I.com)) * I.mass;
  return {io_w + cross(mc, v.lin), v.lin * I.mass + cross(w, mc)};
}

// Dense 6x6 operator in block form [[A, B], [C, D]], mapping motion to
// force coordinates. Used for articulated-body inertias.
template <class T>
struct Mat6 {
  Mat3<T> A, B, C, D;

  static Mat6 zero() { return {}; }

  SpatialForce<T> operator*(const SpatialMotion<T>& v) const {
    return {A * v.ang + B * v.lin, C * v.ang + D * v.lin};
  }
};

template <class T>
inline Mat6<T> operator+(const Mat6<T>& a, const Mat6<T>& b) {
  return {a.A + b.A, a.B + b.B, a.C + b.C, a.D + b.D};
}
template <class T>
inline Mat6<T>& operator+=(Mat6<T>& a, const Mat6<T>& b) {
  a = a + b;
  return a;
}
template <class T>
inline Mat6<T> operator-(const Mat6<T>& a, const Mat6<T>& b) {
  return {a.A - b.A, a.B - b.B, a.C - b.C, a.D - b.D};
}

// Outer product of a force and a motion, f m^T, as a 6x6 operator.
template <class T>
inline Mat6<T> outer(const SpatialForce<T>& f, const SpatialMotion<T>& m) {
  return {Mat3<T>::outer(f.moment, m.ang), Mat3<T>::outer(f.moment, m.lin),
          Mat3<T>::outer(f.force, m.ang), Mat3<T>::outer(f.force, m.lin)};
}

// Origin-referenced 6x6 form of a rigid-body inertia.
template <class T>
inline Mat6<T> to_mat6(const SpatialInertia<T>& I) {
  const Mat3<T> cx = Mat3<T>::skew(I.com);
  const Mat3<T> mcx = cx * I.mass;
  // I_origin = I_com + m cx cx^T = I_com - m cx cx.
  const Mat3<T> io = I.inertia_com - (cx * cx) * I.mass;
  Mat3<T> mI = Mat3<T>::identity() * I.mass;
  return {io, mcx, mcx.transposed(), mI};
}

// Transforms a 6x6 inertia expressed in a child frame to the parent frame,
// given the child's pose (E = rotation matrix of X.rot, r = X.trans):
//   I_parent = F(X) I_child M(X^-1)
// where M, F are the motion and force transforms of the pose.
template <class T>
inline Mat6<T> transform_inertia(const Mat6<T>& I, const Mat3<T>& E, const Vec3<T>& r) {
  const Mat3<T> Et = E.transposed();
  const Mat3<T> rx = Mat3<T>::skew(r);
  // P = I * M(X^-1), with M(X^-1) = [[E^T, 0], [-E^T rx, E^T]].
  const Mat3<T> P11 = I.A * Et - (I.B * Et) * rx;
  const Mat3<T> P12 = I.B * Et;
  const Mat3<T> P21 = I.C * Et - (I.D * Et) * rx;
  const Mat3<T> P22 = I.D * Et;
  // I' = [[E, rx E], [0, E]] * P.
  const Mat3<T> EP21 = E * P21;
  const Mat3<T> EP22 = E * P22;
  return {E * P11 + rx * EP21, E * P12 + rx * EP22, EP21, EP22};
}

}  // namespace diffsim

#endif  // DIFFSIM_SPATIAL_HPP_

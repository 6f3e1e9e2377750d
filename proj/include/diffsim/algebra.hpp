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

#ifndef DIFFSIM_ALGEBRA_HPP_
#define DIFFSIM_ALGEBRA_HPP_

#include <cmath>

#include "diffsim/scalar.hpp"

// 3-vector, 3x3 matrix and quaternion primitives, templated over the scalar
// tower. These stay hand-rolled so that dual and tape scalars flow through
// without trait machinery.

namespace diffsim {

template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  Vec3() = default;
  Vec3(T xx, T yy, T zz) : x(std::move(xx)), y(std::move(yy)), z(std::move(zz)) {}

  static Vec3 zero() { return Vec3(T(0.0), T(0.0), T(0.0)); }

  T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

template <class T>
inline Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class T>
inline Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class T>
inline Vec3<T> operator-(const Vec3<T>& a) {
  return {-a.x, -a.y, -a.z};
}
template <class T, class S>
inline Vec3<T> operator*(const Vec3<T>& a, const S& s) {
  return {a.x * s, a.y * s, a.z * s};
}
template <class T, class S>
inline Vec3<T> operator*(const S& s, const Vec3<T>& a) {
  return a * s;
}
template <class T>
inline Vec3<T>& operator+=(Vec3<T>& a, const Vec3<T>& b) {
  a.x += b.x;
  a.y += b.y;
  a.z += b.z;
  return a;
}

template <class T>
inline T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T>
inline Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T>
inline T squared_norm(const Vec3<T>& a) {
  return dot(a, a);
}
template <class T>
inline T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(squared_norm(a));
}

// Row-major 3x3 matrix.
template <class T>
struct Mat3 {
  T m[3][3]{};

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = T(1.0);
    r.m[1][1] = T(1.0);
    r.m[2][2] = T(1.0);
    return r;
  }
  static Mat3 zero() { return Mat3{}; }

  static Mat3 diagonal(const Vec3<T>& d) {
    Mat3 r;
    r.m[0][0] = d.x;
    r.m[1][1] = d.y;
    r.m[2][2] = d.z;
    return r;
  }

  // Cross-product matrix: skew(v) * w == cross(v, w).
  static Mat3 skew(const Vec3<T>& v) {
    Mat3 r;
    r.m[0][1] = -v.z;
    r.m[0][2] = v.y;
    r.m[1][0] = v.z;
    r.m[1][2] = -v.x;
    r.m[2][0] = -v.y;
    r.m[2][1] = v.x;
    return r;
  }

  static Mat3 outer(const Vec3<T>& a, const Vec3<T>& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = a[i] * b[j];
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }
};

template <class T>
inline Mat3<T> operator+(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[i][j] + b.m[i][j];
  return r;
}
template <class T>
inline Mat3<T> operator-(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[i][j] - b.m[i][j];
  return r;
}
template <class T, class S>
inline Mat3<T> operator*(const Mat3<T>& a, const S& s) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[i][j] * s;
  return r;
}
template <class T>
inline Vec3<T> operator*(const Mat3<T>& a, const Vec3<T>& v) {
  return {a.m[0][0] * v.x + a.m[0][1] * v.y + a.m[0][2] * v.z,
          a.m[1][0] * v.x + a.m[1][1] * v.y + a.m[1][2] * v.z,
          a.m[2][0] * v.x + a.m[2][1] * v.y + a.m[2][2] * v.z};
}
template <class T>
inline Mat3<T> operator*(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j] + a.m[i][2] * b.m[2][j];
  return r;
}
template <class T>
inline Mat3<T>& operator+=(Mat3<T>& a, const Mat3<T>& b) {
  a = a + b;
  return a;
}

// Multiply by the transpose of `a` without forming it.
template <class T>
inline Vec3<T> transposed_mul(const Mat3<T>& a, const Vec3<T>& v) {
  return {a.m[0][0] * v.x + a.m[1][0] * v.y + a.m[2][0] * v.z,
          a.m[0][1] * v.x + a.m[1][1] * v.y + a.m[2][1] * v.z,
          a.m[0][2] * v.x + a.m[1][2] * v.y + a.m[2][2] * v.z};
}

// Unit quaternion (w, x, y, z).
template <class T>
struct Quat {
  T w{}, x{}, y{}, z{};

  Quat() : w(T(1.0)), x(T(0.0)), y(T(0.0)), z(T(0.0)) {}
  Quat(T ww, T xx, T yy, T zz)
      : w(std::move(ww)), x(std::move(xx)), y(std::move(yy)), z(std::move(zz)) {}

  static Quat identity() { return Quat(); }

  static Quat from_axis_angle(const Vec3<T>& axis, const T& angle) {
    using std::cos;
    using std::sin;
    const T half = angle * 0.5;
    const T s = sin(half);
    return Quat(cos(half), axis.x * s, axis.y * s, axis.z * s);
  }

  Quat conjugated() const { return Quat(w, -x, -y, -z); }

  Quat normalized() const {
    using std::sqrt;
    const T n = sqrt(w * w + x * x + y * y + z * z);
    const T inv = T(1.0) / n;
    return Quat(w * inv, x * inv, y * inv, z * inv);
  }

  Mat3<T> to_matrix() const {
    Mat3<T> r;
    const T xx = x * x, yy = y * y, zz = z * z;
    const T xy = x * y, xz = x * z, yz = y * z;
    const T wx = w * x, wy = w * y, wz = w * z;
    r.m[0][0] = T(1.0) - 2.0 * (yy + zz);
    r.m[0][1] = 2.0 * (xy - wz);
    r.m[0][2] = 2.0 * (xz + wy);
    r.m[1][0] = 2.0 * (xy + wz);
    r.m[1][1] = T(1.0) - 2.0 * (xx + zz);
    r.m[1][2] = 2.0 * (yz - wx);
    r.m[2][0] = 2.0 * (xz - wy);
    r.m[2][1] = 2.0 * (yz + wx);
    r.m[2][2] = T(1.0) - 2.0 * (xx + yy);
    return r;
  }

  Vec3<T> rotate(const Vec3<T>& v) const {
    // q v q* via the rotation matrix rows, unrolled.
    const Vec3<T> t = cross(Vec3<T>{x, y, z}, v) * T(2.0);
    return v + w * t + cross(Vec3<T>{x, y, z}, t);
  }
};

template <class T>
inline Quat<T> operator*(const Quat<T>& a, const Quat<T>& b) {
  return Quat<T>(a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                 a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                 a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                 a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w);
}

}  // namespace diffsim

#endif  // DIFFSIM_ALGEBRA_HPP_

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

#ifndef DIFFSIM_SCALAR_HPP_
#define DIFFSIM_SCALAR_HPP_

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

// Scalar tower used by all dynamics code: plain double, forward-mode dual
// numbers with a fixed number of tangent lanes, and reverse-mode tape
// variables. Dynamics algorithms are written once against this interface
// (arithmetic, comparisons on values, sin/cos/sqrt) and instantiated per
// scalar kind.

namespace diffsim {

// ---------------------------------------------------------------------------
// Forward mode: value plus W tangent lanes.

template <int W>
struct Dual {
  double val = 0.0;
  std::array<double, W> dot{};

  Dual() = default;
  Dual(double v) : val(v) {}  // NOLINT: implicit lift of constants

  static Dual seeded(double v, int lane, double tangent = 1.0) {
    Dual d(v);
    d.dot[lane] = tangent;
    return d;
  }
};

template <int W>
inline double value(const Dual<W>& x) {
  return x.val;
}
inline double value(double x) { return x; }

template <int W>
inline Dual<W> operator+(const Dual<W>& a, const Dual<W>& b) {
  Dual<W> r(a.val + b.val);
  for (int i = 0; i < W; ++i) r.dot[i] = a.dot[i] + b.dot[i];
  return r;
}
template <int W>
inline Dual<W> operator+(const Dual<W>& a, double b) {
  Dual<W> r = a;
  r.val += b;
  return r;
}
template <int W>
inline Dual<W> operator+(double a, const Dual<W>& b) {
  return b + a;
}

template <int W>
inline Dual<W> operator-(const Dual<W>& a) {
  Dual<W> r(-a.val);
  for (int i = 0; i < W; ++i) r.dot[i] = -a.dot[i];
  return r;
}
template <int W>
inline Dual<W> operator-(const Dual<W>& a, const Dual<W>& b) {
  Dual<W> r(a.val - b.val);
  for (int i = 0; i < W; ++i) r.dot[i] = a.dot[i] - b.dot[i];
  return r;
}
template <int W>
inline Dual<W> operator-(const Dual<W>& a, double b) {
  Dual<W> r = a;
  r.val -= b;
  return r;
}
template <int W>
inline Dual<W> operator-(double a, const Dual<W>& b) {
  Dual<W> r(a - b.val);
  for (int i = 0; i < W; ++i) r.dot[i] = -b.dot[i];
  return r;
}

template <int W>
inline Dual<W> operator*(const Dual<W>& a, const Dual<W>& b) {
  Dual<W> r(a.val * b.val);
  for (int i = 0; i < W; ++i) r.dot[i] = a.dot[i] * b.val + a.val * b.dot[i];
  return r;
}
template <int W>
inline Dual<W> operator*(const Dual<W>& a, double b) {
  Dual<W> r(a.val * b);
  for (int i = 0; i < W; ++i) r.dot[i] = a.dot[i] * b;
  return r;
}
template <int W>
inline Dual<W> operator*(double a, const Dual<W>& b) {
  return b * a;
}

template <int W>
inline Dual<W> operator/(const Dual<W>& a, const Dual<W>& b) {
  const double inv = 1.0 / b.val;
  Dual<W> r(a.val / b.val);
  for (int i = 0; i < W; ++i) r.dot[i] = (a.dot[i] - r.val * b.dot[i]) * inv;
  return r;
}
template <int W>
inline Dual<W> operator/(const Dual<W>& a, double b) {
  return a * (1.0 / b);
}
template <int W>
inline Dual<W> operator/(double a, const Dual<W>& b) {
  const double inv = 1.0 / b.val;
  Dual<W> r(a * inv);
  for (int i = 0; i < W; ++i) r.dot[i] = -r.val * b.dot[i] * inv;
  return r;
}

template <int W>
inline Dual<W>& operator+=(Dual<W>& a, const Dual<W>& b) {
  a = a + b;
  return a;
}
template <int W>
inline Dual<W>& operator-=(Dual<W>& a, const Dual<W>& b) {
  a = a - b;
  return a;
}
template <int W>
inline Dual<W>& operator*=(Dual<W>& a, const Dual<W>& b) {
  a = a * b;
  return a;
}

template <int W>
inline bool operator<(const Dual<W>& a, const Dual<W>& b) {
  return a.val < b.val;
}
template <int W>
inline bool operator>(const Dual<W>& a, const Dual<W>& b) {
  return a.val > b.val;
}
template <int W>
inline bool operator<=(const Dual<W>& a, const Dual<W>& b) {
  return a.val <= b.val;
}
template <int W>
inline bool operator>=(const Dual<W>& a, const Dual<W>& b) {
  return a.val >= b.val;
}

template <int W>
inline Dual<W> sin(const Dual<W>& a) {
  const double s = std::sin(a.val), c = std::cos(a.val);
  Dual<W> r(s);
  for (int i = 0; i < W; ++i) r.dot[i] = c * a.dot[i];
  return r;
}
template <int W>
inline Dual<W> cos(const Dual<W>& a) {
  const double s = std::sin(a.val), c = std::cos(a.val);
  Dual<W> r(c);
  for (int i = 0; i < W; ++i) r.dot[i] = -s * a.dot[i];
  return r;
}
template <int W>
inline Dual<W> sqrt(const Dual<W>& a) {
  const double s = std::sqrt(a.val);
  Dual<W> r(s);
  const double d = 0.5 / s;
  for (int i = 0; i < W; ++i) r.dot[i] = d * a.dot[i];
  return r;
}
template <int W>
inline Dual<W> abs(const Dual<W>& a) {
  return a.val < 0.0 ? -a : a;
}

// ---------------------------------------------------------------------------
// Reverse mode: variables indexed into a tape of elementary operations.
// A tape is activated for the current thread via TapeScope; operations on
// active variables append nodes holding parent indices and local partials.

class Tape {
 public:
  struct Node {
    int32_t a = -1;
    int32_t b = -1;
    double wa = 0.0;
    double wb = 0.0;
  };

  int32_t record(int32_t a, double wa, int32_t b, double wb) {
    nodes_.push_back(Node{a, b, wa, wb});
    return static_cast<int32_t>(nodes_.size()) - 1;
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // Seeds adjoints at the given (index, weight) pairs and propagates
  // backward through the whole tape. `adj` is resized and overwritten.
  void reverse(const std::vector<std::pair<int32_t, double>>& seeds,
               std::vector<double>& adj) const {
    adj.assign(nodes_.size(), 0.0);
    for (const auto& [idx, w] : seeds) {
      assert(idx >= 0 && static_cast<std::size_t>(idx) < nodes_.size());
      adj[static_cast<std::size_t>(idx)] += w;
    }
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const double g = adj[i];
      if (g == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += n.wa * g;
      if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += n.wb * g;
    }
  }

  std::vector<double> gradient(int32_t output) const {
    std::vector<double> adj;
    reverse({{output, 1.0}}, adj);
    return adj;
  }

 private:
  std::vector<Node> nodes_;
};

namespace detail {
inline Tape*& active_tape() {
  thread_local Tape* tape = nullptr;
  return tape;
}
}  // namespace detail

// Activates a tape for the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : prev_(detail::active_tape()) {
    detail::active_tape() = &tape;
  }
  ~TapeScope() { detail::active_tape() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

struct Rev {
  double val = 0.0;
  int32_t idx = -1;  // -1: constant, never recorded

  Rev() = default;
  Rev(double v) : val(v) {}  // NOLINT: implicit lift of constants

  // Records an independent variable on the active tape.
  static Rev variable(double v) {
    Tape* t = detail::active_tape();
    assert(t != nullptr);
    Rev r(v);
    r.idx = t->record(-1, 0.0, -1, 0.0);
    return r;
  }
};

inline double value(const Rev& x) { return x.val; }

namespace detail {
inline Rev rev_binary(double val, const Rev& a, double wa, const Rev& b,
                      double wb) {
  Rev r(val);
  if (a.idx >= 0 || b.idx >= 0) {
    Tape* t = active_tape();
    assert(t != nullptr);
    r.idx = t->record(a.idx, wa, b.idx, wb);
  }
  return r;
}
inline Rev rev_unary(double val, const Rev& a, double wa) {
  Rev r(val);
  if (a.idx >= 0) {
    Tape* t = active_tape();
    assert(t != nullptr);
    r.idx = t->record(a.idx, wa, -1, 0.0);
  }
  return r;
}
}  // namespace detail

inline Rev operator+(const Rev& a, const Rev& b) {
  return detail::rev_binary(a.val + b.val, a, 1.0, b, 1.0);
}
inline Rev operator+(const Rev& a, double b) {
  return detail::rev_unary(a.val + b, a, 1.0);
}
inline Rev operator+(double a, const Rev& b) {
  return detail::rev_unary(a + b.val, b, 1.0);
}

inline Rev operator-(const Rev& a) { return detail::rev_unary(-a.val, a, -1.0); }
inline Rev operator-(const Rev& a, const Rev& b) {
  return detail::rev_binary(a.val - b.val, a, 1.0, b, -1.0);
}
inline Rev operator-(const Rev& a, double b) {
  return detail::rev_unary(a.val - b, a, 1.0);
}
inline Rev operator-(double a, const Rev& b) {
  return detail::rev_unary(a - b.val, b, -1.0);
}

inline Rev operator*(const Rev& a, const Rev& b) {
  return detail::rev_binary(a.val * b.val, a, b.val, b, a.val);
}
inline Rev operator*(const Rev& a, double b) {
  return detail::rev_unary(a.val * b, a, b);
}
inline Rev operator*(double a, const Rev& b) {
  return detail::rev_unary(a * b.val, b, a);
}

inline Rev operator/(const Rev& a, const Rev& b) {
  const double inv = 1.0 / b.val;
  const double v = a.val / b.val;
  return detail::rev_binary(v, a, inv, b, -v * inv);
}
inline Rev operator/(const Rev& a, double b) { return a * (1.0 / b); }
inline Rev operator/(double a, const Rev& b) {
  const double inv = 1.0 / b.val;
  const double v = a * inv;
  return detail::rev_unary(v, b, -v * inv);
}

inline Rev& operator+=(Rev& a, const Rev& b) {
  a = a + b;
  return a;
}
inline Rev& operator-=(Rev& a, const Rev& b) {
  a = a - b;
  return a;
}
inline Rev& operator*=(Rev& a, const Rev& b) {
  a = a * b;
  return a;
}

inline bool operator<(const Rev& a, const Rev& b) { return a.val < b.val; }
inline bool operator>(const Rev& a, const Rev& b) { return a.val > b.val; }
inline bool operator<=(const Rev& a, const Rev& b) { return a.val <= b.val; }
inline bool operator>=(const Rev& a, const Rev& b) { return a.val >= b.val; }

inline Rev sin(const Rev& a) {
  return detail::rev_unary(std::sin(a.val), a, std::cos(a.val));
}
inline Rev cos(const Rev& a) {
  return detail::rev_unary(std::cos(a.val), a, -std::sin(a.val));
}
inline Rev sqrt(const Rev& a) {
  const double s = std::sqrt(a.val);
  return detail::rev_unary(s, a, 0.5 / s);
}
inline Rev abs(const Rev& a) { return a.val < 0.0 ? -a : a; }

}  // namespace diffsim

#endif  // DIFFSIM_SCALAR_HPP_

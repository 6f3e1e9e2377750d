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

#ifndef DIFFSIM_INTEGRATE_HPP_
#define DIFFSIM_INTEGRATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diffsim/error.hpp"
#include "diffsim/scalar.hpp"

// Explicit ODE solvers, generic over the scalar type and the RHS function.
// Fixed-step methods take ceil(|t1-t0|/dt) steps and land exactly on t1.
// The embedded pairs control the per-step error against
// abs_tol + rel_tol*|x| with the standard elementary controller
// (safety 0.9, growth clamp [0.2, 5]). Backward integration (t1 < t0) just
// negates the step direction.

namespace diffsim {

enum class IntegratorMethod { kEuler, kRK4, kDopri45, kFehlberg45 };

inline bool is_fixed_step(IntegratorMethod m) {
  return m == IntegratorMethod::kEuler || m == IntegratorMethod::kRK4;
}

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::kRK4;
  double dt = 1e-3;  // fixed step; initial step for the embedded pairs
  double abs_tol = 1e-6;
  double rel_tol = 1e-6;
  double min_step = 1e-12;
  double max_step = 1.0;
  std::uint64_t max_evals = 100'000'000;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("integrator: dt must be positive");
    if (!(abs_tol > 0.0) || !(rel_tol >= 0.0))
      throw ConfigError("integrator: tolerances must be positive");
    if (!(min_step <= max_step)) throw ConfigError("integrator: min_step > max_step");
  }
};

// Instrumentation for one solve. rhs_evaluations counts calls to the
// integrated RHS: 1 per Euler step, 4 per RK4 step, 6 per attempted step
// plus one initial evaluation for Dormand-Prince (FSAL reuse), 6 per
// attempted step for Fehlberg. tape_variables is the number of variables
// retained across integration steps on a reverse-mode tape; it stays zero
// unless the solve itself is being taped.
struct EvalCounter {
  std::uint64_t rhs_evaluations = 0;
  std::uint64_t accepted_steps = 0;
  std::uint64_t rejected_steps = 0;
  std::uint64_t tape_variables = 0;

  EvalCounter& operator+=(const EvalCounter& o) {
    rhs_evaluations += o.rhs_evaluations;
    accepted_steps += o.accepted_steps;
    rejected_steps += o.rejected_steps;
    tape_variables = std::max(tape_variables, o.tape_variables);
    return *this;
  }
};

template <class T>
using RhsFn = std::function<std::vector<T>(double, const std::vector<T>&)>;

template <class T>
struct IntegrateResult {
  std::vector<T> state;
  EvalCounter counter;
};

namespace detail {

template <class T>
inline void check_finite(const std::vector<T>& x, double t) {
  for (const T& v : x)
    if (!std::isfinite(value(v)))
      throw IntegrationError("integrate: non-finite state at t=" + std::to_string(t));
}

template <class T>
inline std::vector<T> stage_point(const std::vector<T>& x, const std::vector<std::vector<T>>& k,
                                  const double* coeff, int stages, double h) {
  std::vector<T> r = x;
  for (int s = 0; s < stages; ++s) {
    if (coeff[s] == 0.0) continue;
    const double c = coeff[s] * h;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += k[static_cast<std::size_t>(s)][i] * c;
  }
  return r;
}

template <class T>
class Stepper {
 public:
  Stepper(const RhsFn<T>& rhs, const IntegratorConfig& cfg, EvalCounter& counter)
      : rhs_(rhs), cfg_(cfg), counter_(counter) {}

  std::vector<T> eval(double t, const std::vector<T>& x) {
    if (++counter_.rhs_evaluations > cfg_.max_evals)
      throw IntegrationError("integrate: evaluation budget exceeded");
    return rhs_(t, x);
  }

  // One explicit Euler or RK4 step of size h (h may be negative).
  std::vector<T> fixed_step(double t, const std::vector<T>& x, double h) {
    if (cfg_.method == IntegratorMethod::kEuler) {
      const std::vector<T> k = eval(t, x);
      std::vector<T> r = x;
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += k[i] * h;
      return r;
    }
    const std::vector<T> k1 = eval(t, x);
    std::vector<T> xs = x;
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + k1[i] * (0.5 * h);
    const std::vector<T> k2 = eval(t + 0.5 * h, xs);
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + k2[i] * (0.5 * h);
    const std::vector<T> k3 = eval(t + 0.5 * h, xs);
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + k3[i] * h;
    const std::vector<T> k4 = eval(t + h, xs);
    std::vector<T> r = x;
    for (std::size_t i = 0; i < x.size(); ++i)
      r[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    return r;
  }

 private:
  const RhsFn<T>& rhs_;
  const IntegratorConfig& cfg_;
  EvalCounter& counter_;
};

template <class T>
void integrate_fixed(Stepper<T>& stepper, std::vector<T>& x, double t0, double t1, double dt) {
  const double span = std::abs(t1 - t0);
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const auto steps = static_cast<std::int64_t>(std::ceil(span / dt - 1e-9));
  double t = t0;
  for (std::int64_t k = 0; k < std::max<std::int64_t>(steps, 1); ++k) {
    const double target = (k + 1 == std::max<std::int64_t>(steps, 1)) ? t1 : t0 + dir * dt * static_cast<double>(k + 1);
    x = stepper.fixed_step(t, x, target - t);
    t = target;
    check_finite(x, t);
  }
}

struct ButcherPair {
  int stages;
  bool fsal;
  const double* c;
  const double (*a)[7];
  const double* b_high;  // advancing solution
  const double* b_err;   // b_high - b_low
};

inline const ButcherPair& dopri_tableau() {
  static const double c[7] = {0, 1. / 5, 3. / 10, 4. / 5, 8. / 9, 1., 1.};
  static const double a[7][7] = {
      {},
      {1. / 5},
      {3. / 40, 9. / 40},
      {44. / 45, -56. / 15, 32. / 9},
      {19372. / 6561, -25360. / 2187, 64448. / 6561, -212. / 729},
      {9017. / 3168, -355. / 33, 46732. / 5247, 49. / 176, -5103. / 18656},
      {35. / 384, 0., 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84},
  };
  static const double bh[7] = {35. / 384, 0., 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84, 0.};
  static const double bl[7] = {5179. / 57600,    0., 7571. / 16695, 393. / 640,
                               -92097. / 339200, 187. / 2100,       1. / 40};
  static double berr[7];
  static const bool init = [] {
    for (int i = 0; i < 7; ++i) berr[i] = bh[i] - bl[i];
    return true;
  }();
  (void)init;
  static const ButcherPair pair{7, true, c, a, bh, berr};
  return pair;
}

inline const ButcherPair& fehlberg_tableau() {
  static const double c[7] = {0, 1. / 4, 3. / 8, 12. / 13, 1., 1. / 2, 0};
  static const double a[7][7] = {
      {},
      {1. / 4},
      {3. / 32, 9. / 32},
      {1932. / 2197, -7200. / 2197, 7296. / 2197},
      {439. / 216, -8., 3680. / 513, -845. / 4104},
      {-8. / 27, 2., -3544. / 2565, 1859. / 4104, -11. / 40},
  };
  // Advances with the fifth-order solution (local extrapolation).
  static const double bh[7] = {16. / 135, 0., 6656. / 12825, 28561. / 56430, -9. / 50, 2. / 55, 0.};
  static const double bl[7] = {25. / 216, 0., 1408. / 2565, 2197. / 4104, -1. / 5, 0., 0.};
  static double berr[7];
  static const bool init = [] {
    for (int i = 0; i < 6; ++i) berr[i] = bh[i] - bl[i];
    return true;
  }();
  (void)init;
  static const ButcherPair pair{6, false, c, a, bh, berr};
  return pair;
}

template <class T>
void integrate_adaptive(Stepper<T>& stepper, std::vector<T>& x, double t0, double t1,
                        const IntegratorConfig& cfg, EvalCounter& counter,
                        const ButcherPair& tab) {
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  double t = t0;
  double h = std::min(cfg.dt, std::abs(t1 - t0));
  std::vector<std::vector<T>> k(static_cast<std::size_t>(tab.stages));
  bool have_first = false;
  while (dir * (t1 - t) > 1e-14 * std::max(1.0, std::abs(t1))) {
    h = std::clamp(h, cfg.min_step, cfg.max_step);
    h = std::min(h, std::abs(t1 - t));
    const double hs = dir * h;
    if (!have_first || !tab.fsal) {
      k[0] = stepper.eval(t, x);
      have_first = true;
    }
    for (int s = 1; s < tab.stages; ++s)
      k[static_cast<std::size_t>(s)] =
          stepper.eval(t + tab.c[s] * hs, stage_point(x, k, tab.a[s], s, hs));
    std::vector<T> x_new = stage_point(x, k, tab.b_high, tab.stages, hs);
    // Scaled RMS error from the embedded pair.
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double e = 0.0;
      for (int s = 0; s < tab.stages; ++s)
        e += tab.b_err[s] * value(k[static_cast<std::size_t>(s)][i]);
      e *= hs;
      const double scale =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(value(x[i])), std::abs(value(x_new[i])));
      err += (e / scale) * (e / scale);
    }
    err = std::sqrt(err / static_cast<double>(std::max<std::size_t>(x.size(), 1)));
    if (!std::isfinite(err)) throw IntegrationError("integrate: non-finite state at t=" + std::to_string(t));
    if (err <= 1.0) {
      t += hs;
      x = std::move(x_new);
      check_finite(x, t);
      counter.accepted_steps += 1;
      if (tab.fsal) k[0] = k[static_cast<std::size_t>(tab.stages - 1)];
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= factor;
    } else {
      counter.rejected_steps += 1;
      const double factor = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 0.9);
      h *= factor;
      if (h < cfg.min_step)
        throw IntegrationError("integrate: required step underflows min_step at t=" +
                               std::to_string(t));
    }
  }
}

}  // namespace detail

// Solves x' = rhs(t, x) from (t0, x0) to t1 and returns x(t1) with counters.
template <class T>
IntegrateResult<T> integrate(const RhsFn<T>& rhs, std::vector<T> x0, double t0, double t1,
                             const IntegratorConfig& cfg) {
  cfg.validate();
  if (t0 == t1) throw ConfigError("integrate: t0 and t1 must differ");
  detail::check_finite(x0, t0);
  IntegrateResult<T> result;
  result.state = std::move(x0);
  detail::Stepper<T> stepper(rhs, cfg, result.counter);
  switch (cfg.method) {
    case IntegratorMethod::kEuler:
    case IntegratorMethod::kRK4: {
      const double span = std::abs(t1 - t0);
      const auto steps =
          std::max<std::int64_t>(static_cast<std::int64_t>(std::ceil(span / cfg.dt - 1e-9)), 1);
      detail::integrate_fixed(stepper, result.state, t0, t1, cfg.dt);
      result.counter.accepted_steps += static_cast<std::uint64_t>(steps);
      break;
    }
    case IntegratorMethod::kDopri45:
      detail::integrate_adaptive(stepper, result.state, t0, t1, cfg, result.counter,
                                 detail::dopri_tableau());
      break;
    case IntegratorMethod::kFehlberg45:
      detail::integrate_adaptive(stepper, result.state, t0, t1, cfg, result.counter,
                                 detail::fehlberg_tableau());
      break;
  }
  return result;
}

// Solves through a strictly monotone list of sample times, reusing the state
// between samples; times[0] is the initial time of x0. Equivalent to
// repeated integrate() calls segment by segment.
template <class T>
struct DenseResult {
  std::vector<std::vector<T>> states;
  EvalCounter counter;
};

template <class T>
DenseResult<T> integrate_dense(const RhsFn<T>& rhs, std::vector<T> x0,
                               const std::vector<double>& times, const IntegratorConfig& cfg) {
  cfg.validate();
  if (times.empty()) throw ConfigError("integrate_dense: empty time list");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const bool forward = times[1] > times[0];
    if ((forward && times[i] <= times[i - 1]) || (!forward && times[i] >= times[i - 1]))
      throw ConfigError("integrate_dense: times must be strictly monotone");
  }
  DenseResult<T> result;
  result.states.reserve(times.size());
  result.states.push_back(std::move(x0));
  for (std::size_t i = 1; i < times.size(); ++i) {
    IntegrateResult<T> seg = integrate<T>(rhs, result.states.back(), times[i - 1], times[i], cfg);
    result.counter += seg.counter;
    result.states.push_back(std::move(seg.state));
  }
  return result;
}

}  // namespace diffsim

#endif  // DIFFSIM_INTEGRATE_HPP_

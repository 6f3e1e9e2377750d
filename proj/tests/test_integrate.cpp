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

#include "diffsim/integrate.hpp"

#include <cmath>

#include <doctest.h>

#include "diffsim/dynamics.hpp"
#include "oracles.hpp"

using namespace diffsim;

namespace {

RhsFn<double> exponential() {
  return [](double, const std::vector<double>& x) { return std::vector<double>{x[0]}; };
}

Model double_pendulum_model() {
  Model m;
  for (int i = 0; i < 2; ++i) {
    Body<double> b;
    b.name = "link" + std::to_string(i);
    b.inertia = SpatialInertia<double>::point_mass(1.0, {1.0, 0.0, 0.0});
    m.bodies.push_back(b);
    Joint<double> j;
    j.kind = JointKind::kRevolute;
    j.axis = {0, 1, 0};
    j.parent_to_joint.trans = i == 0 ? Vec3<double>::zero() : Vec3<double>{1.0, 0.0, 0.0};
    m.joints.push_back(j);
    m.parent.push_back(i - 1);
  }
  m.finalize();
  return m;
}

IntegratorConfig cfg_of(IntegratorMethod method, double dt) {
  IntegratorConfig cfg;
  cfg.method = method;
  cfg.dt = dt;
  return cfg;
}

}  // namespace

TEST_CASE("zero dynamics keep the state exactly") {
  RhsFn<double> rhs = [](double, const std::vector<double>& x) {
    return std::vector<double>(x.size(), 0.0);
  };
  for (auto method : {IntegratorMethod::kEuler, IntegratorMethod::kRK4, IntegratorMethod::kDopri45,
                      IntegratorMethod::kFehlberg45}) {
    const auto r = integrate<double>(rhs, {1.5, -2.5}, 0.0, 0.7, cfg_of(method, 0.1));
    CHECK(r.state[0] == 1.5);
    CHECK(r.state[1] == -2.5);
  }
}

TEST_CASE("exponential growth reaches e within 1e-9 under RK4") {
  const auto r = integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg_of(IntegratorMethod::kRK4, 0.01));
  CHECK(r.state[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
  CHECK(r.counter.rhs_evaluations == 400);
  CHECK(r.counter.accepted_steps == 100);
}

TEST_CASE("RK4 integrates cubic polynomials exactly") {
  RhsFn<double> rhs = [](double t, const std::vector<double>&) {
    return std::vector<double>{3.0 * t * t};
  };
  for (const double dt : {0.5, 0.25, 0.2, 0.1}) {
    const auto r = integrate<double>(rhs, {0.0}, 0.0, 1.0, cfg_of(IntegratorMethod::kRK4, dt));
    CHECK(r.state[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("integrate lands exactly on t1 with a partial last step") {
  RhsFn<double> rhs = [](double t, const std::vector<double>&) {
    return std::vector<double>{2.0 * t};
  };
  // 0.35 / 0.1 -> 4 steps, last of size 0.05; x(t) = t^2.
  const auto r = integrate<double>(rhs, {0.0}, 0.0, 0.35, cfg_of(IntegratorMethod::kRK4, 0.1));
  CHECK(r.counter.accepted_steps == 4);
  CHECK(r.state[0] == doctest::Approx(0.35 * 0.35).epsilon(1e-14));
}

TEST_CASE("backward integration reverses forward integration") {
  const auto fwd = integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg_of(IntegratorMethod::kRK4, 0.01));
  const auto bwd = integrate<double>(exponential(), fwd.state, 1.0, 0.0, cfg_of(IntegratorMethod::kRK4, 0.01));
  CHECK(bwd.state[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("integrate_dense") {
  SUBCASE("a single time returns the initial state") {
    const auto r = integrate_dense<double>(exponential(), {2.0}, {0.5}, cfg_of(IntegratorMethod::kRK4, 0.1));
    REQUIRE(r.states.size() == 1);
    CHECK(r.states[0][0] == 2.0);
  }
  SUBCASE("two commensurate segments equal one long segment") {
    const auto cfg = cfg_of(IntegratorMethod::kRK4, 0.05);
    const auto dense = integrate_dense<double>(exponential(), {1.0}, {0.0, 0.5, 1.0}, cfg);
    const auto direct = integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg);
    CHECK(dense.states[2][0] == doctest::Approx(direct.state[0]).epsilon(1e-12));
  }
  SUBCASE("harmonic oscillator matches the closed form at 140 samples") {
    RhsFn<double> rhs = [](double, const std::vector<double>& x) {
      return std::vector<double>{x[1], -x[0]};
    };
    std::vector<double> times;
    for (int i = 0; i <= 140; ++i) times.push_back(0.01 * i);
    const auto r = integrate_dense<double>(rhs, {1.0, 0.0}, times, cfg_of(IntegratorMethod::kRK4, 1e-3));
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(r.states[i][0] == doctest::Approx(std::cos(times[i])).epsilon(1e-6));
      CHECK(r.states[i][1] == doctest::Approx(-std::sin(times[i])).epsilon(1e-6));
    }
  }
  SUBCASE("non-monotone times are rejected") {
    CHECK_THROWS_AS(
        integrate_dense<double>(exponential(), {1.0}, {0.0, 0.5, 0.4}, cfg_of(IntegratorMethod::kRK4, 0.1)),
        ConfigError);
  }
}

TEST_CASE("empirical convergence orders: Euler ~1, RK4 ~4") {
  auto global_error = [&](IntegratorMethod method, double dt) {
    const auto r = integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg_of(method, dt));
    return std::abs(r.state[0] - std::exp(1.0));
  };
  auto slope = [&](IntegratorMethod method) {
    std::vector<double> log_dt, log_err;
    for (const double dt : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
      log_dt.push_back(std::log(dt));
      log_err.push_back(std::log(global_error(method, dt)));
    }
    // Least-squares slope.
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < log_dt.size(); ++i) {
      mx += log_dt[i];
      my += log_err[i];
    }
    mx /= static_cast<double>(log_dt.size());
    my /= static_cast<double>(log_dt.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < log_dt.size(); ++i) {
      num += (log_dt[i] - mx) * (log_err[i] - my);
      den += (log_dt[i] - mx) * (log_dt[i] - mx);
    }
    return num / den;
  };
  CHECK(slope(IntegratorMethod::kEuler) == doctest::Approx(1.0).epsilon(0.15));
  CHECK(slope(IntegratorMethod::kRK4) == doctest::Approx(4.0).epsilon(0.075));
}

TEST_CASE("Dormand-Prince tracks a tight RK4 reference on the double pendulum") {
  const Model m = double_pendulum_model();
  RhsFn<double> rhs = [&m](double t, const std::vector<double>& x) {
    return ode_rhs<double>(m, nullptr, t, x);
  };
  const std::vector<double> x0{0.4, -0.2, 0.0, 0.0};
  IntegratorConfig ref_cfg = cfg_of(IntegratorMethod::kRK4, 1e-5);
  const auto ref = integrate<double>(rhs, x0, 0.0, 1.0, ref_cfg);
  IntegratorConfig ad = cfg_of(IntegratorMethod::kDopri45, 1e-2);
  ad.abs_tol = 1e-10;
  ad.rel_tol = 1e-8;
  const auto sol = integrate<double>(rhs, x0, 0.0, 1.0, ad);
  for (int i = 0; i < 4; ++i)
    CHECK(sol.state[static_cast<std::size_t>(i)] ==
          doctest::Approx(ref.state[static_cast<std::size_t>(i)]).epsilon(1e-6));
  CHECK(sol.counter.rhs_evaluations ==
        1 + 6 * (sol.counter.accepted_steps + sol.counter.rejected_steps));

  // Fehlberg agrees too and reports 6 evaluations per attempted step.
  IntegratorConfig fb = ad;
  fb.method = IntegratorMethod::kFehlberg45;
  const auto sol2 = integrate<double>(rhs, x0, 0.0, 1.0, fb);
  for (int i = 0; i < 4; ++i)
    CHECK(sol2.state[static_cast<std::size_t>(i)] ==
          doctest::Approx(ref.state[static_cast<std::size_t>(i)]).epsilon(1e-6));
  CHECK(sol2.counter.rhs_evaluations ==
        6 * (sol2.counter.accepted_steps + sol2.counter.rejected_steps));
}

TEST_CASE("energy drift of the unactuated double pendulum stays below 1e-4 over 10 s") {
  const Model m = double_pendulum_model();
  RhsFn<double> rhs = [&m](double t, const std::vector<double>& x) {
    return ode_rhs<double>(m, nullptr, t, x);
  };
  const std::vector<double> x0{1.2, 0.3, 0.0, 0.0};
  const double e0 = total_energy(m, StateT<double>{{x0[0], x0[1]}, {x0[2], x0[3]}});
  std::vector<double> x = x0;
  const auto r = integrate<double>(rhs, x, 0.0, 10.0, cfg_of(IntegratorMethod::kRK4, 1e-3));
  const double e1 = total_energy(m, StateT<double>{{r.state[0], r.state[1]}, {r.state[2], r.state[3]}});
  CHECK(std::abs(e1 - e0) / std::abs(e0) <= 1e-4);
}

TEST_CASE("per-step evaluation counts are pinned") {
  const auto euler = integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg_of(IntegratorMethod::kEuler, 0.01));
  CHECK(euler.counter.rhs_evaluations == euler.counter.accepted_steps);
  const auto rk4 = integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg_of(IntegratorMethod::kRK4, 0.01));
  CHECK(rk4.counter.rhs_evaluations == 4 * rk4.counter.accepted_steps);
}

TEST_CASE("failure modes") {
  SUBCASE("evaluation budget exceeded") {
    IntegratorConfig cfg = cfg_of(IntegratorMethod::kRK4, 1e-6);
    cfg.max_evals = 100;
    CHECK_THROWS_WITH_AS(integrate<double>(exponential(), {1.0}, 0.0, 1.0, cfg),
                         doctest::Contains("budget"), IntegrationError);
  }
  SUBCASE("divergence is detected") {
    RhsFn<double> blowup = [](double, const std::vector<double>& x) {
      return std::vector<double>{x[0] * x[0]};
    };
    // x' = x^2 from x0 = 1 blows up at t = 1.
    CHECK_THROWS_WITH_AS(
        integrate<double>(blowup, {1.0}, 0.0, 2.0, cfg_of(IntegratorMethod::kEuler, 1e-3)),
        doctest::Contains("non-finite"), IntegrationError);
  }
  SUBCASE("step underflow against min_step") {
    RhsFn<double> rhs = [](double, const std::vector<double>& x) {
      return std::vector<double>{-1000.0 * x[0]};
    };
    IntegratorConfig cfg = cfg_of(IntegratorMethod::kDopri45, 0.5);
    cfg.abs_tol = 1e-14;
    cfg.rel_tol = 1e-14;
    cfg.min_step = 0.05;
    CHECK_THROWS_WITH_AS(integrate<double>(rhs, {1.0}, 0.0, 1.0, cfg),
                         doctest::Contains("underflow"), IntegrationError);
  }
  SUBCASE("t0 == t1 is a config error") {
    CHECK_THROWS_AS(integrate<double>(exponential(), {1.0}, 0.5, 0.5, cfg_of(IntegratorMethod::kRK4, 0.1)),
                    ConfigError);
  }
}

TEST_CASE("integrators are scalar generic (dual state)") {
  using D = Dual<1>;
  // x' = theta x with theta carried in the tangent: d x(1) / d theta = e.
  RhsFn<D> rhs = [](double, const std::vector<D>& x) {
    const D theta = D::seeded(1.0, 0);
    return std::vector<D>{theta * x[0]};
  };
  const auto r = integrate<D>(rhs, {D(1.0)}, 0.0, 1.0, cfg_of(IntegratorMethod::kRK4, 0.001));
  CHECK(r.state[0].val == doctest::Approx(std::exp(1.0)).epsilon(1e-10));
  CHECK(r.state[0].dot[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-7));
}

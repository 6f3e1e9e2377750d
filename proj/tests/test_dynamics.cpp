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

#include "diffsim/dynamics.hpp"

#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"

using namespace diffsim;

namespace {

constexpr double kGravity = 9.81;

// Uniform rod of mass m and length l, pivot at one end, hanging along -z at
// q = 0, swinging about +y.
Model rod_pendulum(double mass = 1.0, double length = 1.0) {
  Model m;
  Body<double> b;
  b.name = "rod";
  b.inertia.mass = mass;
  b.inertia.com = {0.0, 0.0, -length / 2.0};
  const double i = mass * length * length / 12.0;
  b.inertia.inertia_com = Mat3<double>::diagonal({i, i, 0.0});
  m.bodies.push_back(b);
  Joint<double> j;
  j.kind = JointKind::kRevolute;
  j.axis = {0.0, 1.0, 0.0};
  m.joints.push_back(j);
  m.parent.push_back(-1);
  m.finalize();
  return m;
}

// Point-mass double pendulum matching the hand-derived oracle.
Model double_pendulum(double m1, double l1, double m2, double l2) {
  Model m;
  for (int i = 0; i < 2; ++i) {
    Body<double> b;
    b.name = "link" + std::to_string(i);
    b.inertia = SpatialInertia<double>::point_mass(i == 0 ? m1 : m2,
                                                   {i == 0 ? l1 : l2, 0.0, 0.0});
    m.bodies.push_back(b);
    Joint<double> j;
    j.kind = JointKind::kRevolute;
    j.axis = {0.0, 1.0, 0.0};
    j.parent_to_joint.trans = i == 0 ? Vec3<double>::zero() : Vec3<double>{l1, 0.0, 0.0};
    m.joints.push_back(j);
    m.parent.push_back(i - 1);
  }
  m.finalize();
  return m;
}

// Planar double pendulum but along -z at rest (stable hanging at q = 0),
// used for the oracle comparison in its own convention.
Model random_chain(std::mt19937_64& rng, int links) {
  Model m;
  for (int i = 0; i < links; ++i) {
    Body<double> b;
    b.name = "link" + std::to_string(i);
    b.inertia.mass = oracles::uniform(rng, 0.3, 3.0);
    b.inertia.com = {oracles::uniform(rng, -0.5, 0.5), oracles::uniform(rng, -0.5, 0.5),
                     oracles::uniform(rng, -0.5, 0.5)};
    Eigen::Matrix3d A = Eigen::Matrix3d::Random();
    const Eigen::Matrix3d Ic = A * A.transpose() + 0.05 * Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) b.inertia.inertia_com.m[r][c] = Ic(r, c);
    m.bodies.push_back(b);

    Joint<double> j;
    j.kind = oracles::uniform(rng, 0.0, 1.0) < 0.8 ? JointKind::kRevolute : JointKind::kPrismatic;
    Vec3<double> axis{oracles::uniform(rng, -1, 1), oracles::uniform(rng, -1, 1),
                      oracles::uniform(rng, -1, 1)};
    const double n = std::sqrt(squared_norm(axis));
    j.axis = axis * (1.0 / (n > 0.1 ? n : 1.0));
    j.parent_to_joint.trans = {oracles::uniform(rng, -0.5, 0.5), oracles::uniform(rng, -0.5, 0.5),
                               oracles::uniform(rng, -0.5, 0.5)};
    const Vec3<double> raxis{oracles::uniform(rng, -1, 1), oracles::uniform(rng, -1, 1),
                             oracles::uniform(rng, -1, 1)};
    const double rn = std::sqrt(squared_norm(raxis));
    j.parent_to_joint.rot =
        Quat<double>::from_axis_angle(raxis * (1.0 / (rn > 0.1 ? rn : 1.0)),
                                      oracles::uniform(rng, -2.0, 2.0));
    m.joints.push_back(j);
    m.parent.push_back(i - 1);
  }
  m.finalize();
  return m;
}

StateT<double> random_state(std::mt19937_64& rng, int dof) {
  StateT<double> s;
  for (int i = 0; i < dof; ++i) {
    s.q.push_back(oracles::uniform(rng, -1.0, 1.0));
    s.qd.push_back(oracles::uniform(rng, -1.0, 1.0));
  }
  return s;
}

// Gravity torque oracle: G_j = d PE / d q_j by central differences of the
// potential computed from forward kinematics only.
std::vector<double> gravity_torque_fd(const Model& m, const std::vector<double>& q) {
  auto potential = [&m](const std::vector<double>& qq) {
    const auto poses = forward_kinematics(m, qq);
    double pe = 0.0;
    for (int i = 0; i < m.body_count(); ++i) {
      const Vec3<double> com_w =
          poses[i].orientation.rotate(m.bodies[i].inertia.com) + poses[i].position;
      pe -= m.bodies[i].inertia.mass * dot(m.gravity, com_w);
    }
    return pe;
  };
  const double h = 1e-6;
  std::vector<double> g(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    auto qp = q, qm = q;
    qp[j] += h;
    qm[j] -= h;
    g[j] = (potential(qp) - potential(qm)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("forward kinematics of a two-link planar chain") {
  const Model m = double_pendulum(1.0, 1.0, 1.0, 1.0);
  SUBCASE("rest configuration reaches (2,0,0) at the second mass") {
    const auto poses = forward_kinematics(m, {0.0, 0.0});
    // Second joint frame sits at (1,0,0); its body com adds the second link.
    const Vec3<double> tip =
        poses[1].orientation.rotate(m.bodies[1].inertia.com) + poses[1].position;
    CHECK(tip.x == doctest::Approx(2.0));
    CHECK(tip.y == doctest::Approx(0.0));
    CHECK(tip.z == doctest::Approx(0.0));
    CHECK(poses[1].orientation.w == doctest::Approx(1.0));
  }
  SUBCASE("quarter turn at the base maps the tip to (0,0,-2)") {
    // Rotation about +y by pi/2 takes +x to -z.
    const auto poses = forward_kinematics(m, {M_PI / 2.0, 0.0});
    const Vec3<double> tip =
        poses[1].orientation.rotate(m.bodies[1].inertia.com) + poses[1].position;
    CHECK(tip.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tip.y == doctest::Approx(0.0));
    CHECK(tip.z == doctest::Approx(-2.0).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch is reported") {
    CHECK_THROWS_AS(forward_kinematics(m, std::vector<double>{0.0}), ModelError);
  }
}

TEST_CASE("aba: equilibrium and the uniform-rod benchmark") {
  SUBCASE("hanging at rest gives zero acceleration") {
    const Model m = rod_pendulum();
    const auto qdd = aba(m, StateT<double>{{0.0}, {0.0}}, {0.0});
    CHECK(qdd[0] == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("horizontal rod accelerates at -3g/(2l) sin q") {
    for (const double l : {0.5, 1.0, 2.0}) {
      const Model m = rod_pendulum(1.3, l);
      const auto qdd = aba(m, StateT<double>{{M_PI / 2.0}, {0.0}}, {0.0});
      CHECK(qdd[0] == doctest::Approx(-3.0 * kGravity / (2.0 * l)).epsilon(1e-10));
    }
  }
  SUBCASE("singular articulated inertia raises a diagnostic error") {
    Model m = rod_pendulum();
    m.bodies[0].inertia.com = Vec3<double>::zero();
    m.bodies[0].inertia.inertia_com = Mat3<double>::zero();
    m.finalize();
    CHECK_THROWS_AS(aba(m, StateT<double>{{0.1}, {0.0}}, {0.0}), DynamicsError);
  }
}

TEST_CASE("aba inverts rnea on random chains (1-6 links)") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const int links = 1 + static_cast<int>(oracles::uniform(rng, 0.0, 5.999));
    const Model m = random_chain(rng, links);
    const auto s = random_state(rng, m.dof);
    std::vector<double> qdd_star(static_cast<std::size_t>(m.dof));
    for (auto& v : qdd_star) v = oracles::uniform(rng, -2.0, 2.0);
    const auto tau = rnea(m, s, qdd_star);
    const auto qdd = aba(m, s, tau);
    for (int i = 0; i < m.dof; ++i)
      CHECK(qdd[static_cast<std::size_t>(i)] ==
            doctest::Approx(qdd_star[static_cast<std::size_t>(i)]).epsilon(1e-8));
  }
}

TEST_CASE("rnea") {
  SUBCASE("no motion and no gravity means no force") {
    Model m = double_pendulum(1.0, 1.0, 0.5, 0.7);
    m.gravity = Vec3<double>::zero();
    const auto tau = rnea(m, StateT<double>{{0.3, -0.2}, {0.0, 0.0}}, {0.0, 0.0});
    CHECK(tau[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(tau[1] == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("static torques equal the potential-energy gradient") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Model m = random_chain(rng, 3);
      std::vector<double> q{oracles::uniform(rng, -1, 1), oracles::uniform(rng, -1, 1),
                            oracles::uniform(rng, -1, 1)};
      const auto tau = rnea(m, StateT<double>{q, {0, 0, 0}}, {0, 0, 0});
      const auto g = gravity_torque_fd(m, q);
      for (int i = 0; i < 3; ++i)
        CHECK(tau[static_cast<std::size_t>(i)] ==
              doctest::Approx(g[static_cast<std::size_t>(i)]).epsilon(1e-5));
    }
  }
  SUBCASE("double pendulum matches the hand-derived equations of motion") {
    std::mt19937_64 rng(17);
    const double m1 = 1.2, l1 = 0.9, m2 = 0.7, l2 = 1.4;
    const Model m = double_pendulum(m1, l1, m2, l2);
    const oracles::DoublePendulum oracle{m1, l1, m2, l2, kGravity};
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Vector2d q{oracles::uniform(rng, -M_PI, M_PI), oracles::uniform(rng, -M_PI, M_PI)};
      const Eigen::Vector2d qd{oracles::uniform(rng, -3, 3), oracles::uniform(rng, -3, 3)};
      const Eigen::Vector2d qdd{oracles::uniform(rng, -3, 3), oracles::uniform(rng, -3, 3)};
      const auto tau = rnea(m, StateT<double>{{q(0), q(1)}, {qd(0), qd(1)}}, {qdd(0), qdd(1)});
      const Eigen::Vector2d expected = oracle.inverse_dynamics(q, qd, qdd);
      CHECK(tau[0] == doctest::Approx(expected(0)).epsilon(1e-8));
      CHECK(tau[1] == doctest::Approx(expected(1)).epsilon(1e-8));
    }
  }
}

TEST_CASE("mass matrix") {
  SUBCASE("uniform rod pendulum has H = m l^2 / 3") {
    const Model m = rod_pendulum(1.7, 1.3);
    const Eigen::MatrixXd H = mass_matrix(m, {0.4});
    CHECK(H(0, 0) == doctest::Approx(1.7 * 1.3 * 1.3 / 3.0).epsilon(1e-12));
  }
  SUBCASE("symmetric positive definite over random configurations") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const int links = 1 + static_cast<int>(oracles::uniform(rng, 0.0, 4.999));
      const Model m = random_chain(rng, links);
      std::vector<double> q(static_cast<std::size_t>(m.dof));
      for (auto& v : q) v = oracles::uniform(rng, -M_PI, M_PI);
      const Eigen::MatrixXd H = mass_matrix(m, q);
      CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }
  SUBCASE("H qdd + bias = rnea on random inputs") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 30; ++trial) {
      const Model m = random_chain(rng, 4);
      const auto s = random_state(rng, m.dof);
      std::vector<double> qdd(static_cast<std::size_t>(m.dof));
      for (auto& v : qdd) v = oracles::uniform(rng, -2, 2);
      const Eigen::MatrixXd H = mass_matrix(m, s.q);
      const auto bias = bias_forces(m, s);
      const auto tau = rnea(m, s, qdd);
      for (int i = 0; i < m.dof; ++i) {
        double hq = 0.0;
        for (int j = 0; j < m.dof; ++j) hq += H(i, j) * qdd[static_cast<std::size_t>(j)];
        CHECK(tau[static_cast<std::size_t>(i)] ==
              doctest::Approx(hq + bias[static_cast<std::size_t>(i)]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("bias forces") {
  const Model m = double_pendulum(1.0, 1.0, 0.8, 0.6);
  SUBCASE("zero velocity and no gravity vanish") {
    Model mg = m;
    mg.gravity = Vec3<double>::zero();
    const auto b = bias_forces(mg, StateT<double>{{0.5, -0.7}, {0.0, 0.0}});
    CHECK(std::abs(b[0]) < 1e-14);
    CHECK(std::abs(b[1]) < 1e-14);
  }
  SUBCASE("zero velocity leaves exactly the gravity torque") {
    const std::vector<double> q{0.4, 0.9};
    const auto b = bias_forces(m, StateT<double>{q, {0.0, 0.0}});
    const auto g = gravity_torque_fd(m, q);
    CHECK(b[0] == doctest::Approx(g[0]).epsilon(1e-6));
    CHECK(b[1] == doctest::Approx(g[1]).epsilon(1e-6));
  }
  SUBCASE("matches the symbolic oracle velocity+gravity terms") {
    const oracles::DoublePendulum oracle{1.0, 1.0, 0.8, 0.6, kGravity};
    const Eigen::Vector2d q{0.3, -1.1}, qd{2.0, -1.5};
    const auto b = bias_forces(m, StateT<double>{{q(0), q(1)}, {qd(0), qd(1)}});
    const Eigen::Vector2d expected = oracle.inverse_dynamics(q, qd, Eigen::Vector2d::Zero());
    CHECK(b[0] == doctest::Approx(expected(0)).epsilon(1e-8));
    CHECK(b[1] == doctest::Approx(expected(1)).epsilon(1e-8));
  }
}

TEST_CASE("aba equals the dense H^-1 (tau - bias) route") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const Model m = random_chain(rng, 3);
    const auto s = random_state(rng, m.dof);
    std::vector<double> tau(static_cast<std::size_t>(m.dof));
    for (auto& v : tau) v = oracles::uniform(rng, -2, 2);
    const auto qdd = aba(m, s, tau);
    const Eigen::MatrixXd H = mass_matrix(m, s.q);
    const auto bias = bias_forces(m, s);
    Eigen::VectorXd rhs(m.dof);
    for (int i = 0; i < m.dof; ++i)
      rhs(i) = tau[static_cast<std::size_t>(i)] - bias[static_cast<std::size_t>(i)];
    const Eigen::VectorXd expected = H.ldlt().solve(rhs);
    for (int i = 0; i < m.dof; ++i)
      CHECK(qdd[static_cast<std::size_t>(i)] == doctest::Approx(expected(i)).epsilon(1e-8));
  }
}

TEST_CASE("ode_rhs") {
  SUBCASE("free chain at rest without gravity does not move") {
    Model m = double_pendulum(1.0, 1.0, 1.0, 1.0);
    m.gravity = Vec3<double>::zero();
    const ModelT<double> bound = m;
    const auto dx = ode_rhs<double>(bound, nullptr, 0.0, {0.2, 0.4, 0.0, 0.0});
    for (double v : dx) CHECK(std::abs(v) < 1e-14);
  }
  SUBCASE("rod pendulum rhs is (qd, -3g/2l sin q)") {
    const Model m = rod_pendulum(1.0, 1.0);
    for (const double q : {0.3, 1.2, -0.8}) {
      const auto dx = ode_rhs<double>(m, nullptr, 0.0, {q, 0.7});
      CHECK(dx[0] == doctest::Approx(0.7));
      CHECK(dx[1] == doctest::Approx(-1.5 * kGravity * std::sin(q)).epsilon(1e-10));
    }
  }
  SUBCASE("cartpole rhs matches the textbook equations on random states") {
    std::mt19937_64 rng(53);
    const double mc = 0.6, mp = 0.2, l = 0.8;
    Model m;
    Body<double> cart;
    cart.name = "cart";
    cart.inertia = SpatialInertia<double>::point_mass(mc, {0, 0, 0});
    m.bodies.push_back(cart);
    Body<double> pole;
    pole.name = "pole";
    pole.inertia = SpatialInertia<double>::point_mass(mp, {0, 0, l});
    m.bodies.push_back(pole);
    Joint<double> slide;
    slide.kind = JointKind::kPrismatic;
    slide.axis = {1, 0, 0};
    m.joints.push_back(slide);
    m.parent.push_back(-1);
    Joint<double> hinge;
    hinge.kind = JointKind::kRevolute;
    hinge.axis = {0, 1, 0};
    m.joints.push_back(hinge);
    m.parent.push_back(0);
    m.finalize();

    const oracles::Cartpole oracle{mc, mp, l, kGravity};
    for (int trial = 0; trial < 50; ++trial) {
      const double theta = oracles::uniform(rng, -M_PI, M_PI);
      const double xd = oracles::uniform(rng, -2, 2);
      const double thd = oracles::uniform(rng, -3, 3);
      const double u = oracles::uniform(rng, -5, 5);
      ControlFn<double> control = [u](double, std::vector<double>& tau) { tau[0] = u; };
      const auto dx = ode_rhs<double>(m, control, 0.0,
                                      {oracles::uniform(rng, -1, 1), theta, xd, thd});
      const Eigen::Vector2d acc = oracle.accelerations(theta, xd, thd, u);
      CHECK(dx[2] == doctest::Approx(acc(0)).epsilon(1e-9));
      CHECK(dx[3] == doctest::Approx(acc(1)).epsilon(1e-9));
    }
  }
}

TEST_CASE("total energy") {
  SUBCASE("at rest at the datum the energy is zero") {
    const Model m = rod_pendulum(1.0, 1.0);
    // Hanging rod: com below the pivot contributes negative potential.
    const double e0 = total_energy(m, StateT<double>{{M_PI / 2.0}, {0.0}});
    // At q = pi/2 the rod is horizontal: com height 0 -> zero energy.
    CHECK(e0 == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("rod pendulum potential is -(l/2) m g cos q") {
    const Model m = rod_pendulum(2.0, 1.4);
    for (const double q : {0.0, 0.5, 2.0}) {
      const double e = total_energy(m, StateT<double>{{q}, {0.0}});
      CHECK(e == doctest::Approx(-0.7 * 2.0 * kGravity * std::cos(q)).epsilon(1e-12));
    }
  }
  SUBCASE("kinetic part matches 0.5 qd' H qd") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
      Model m = random_chain(rng, 3);
      m.gravity = Vec3<double>::zero();
      const auto s = random_state(rng, m.dof);
      const Eigen::MatrixXd H = mass_matrix(m, s.q);
      double ke = 0.0;
      for (int i = 0; i < m.dof; ++i)
        for (int j = 0; j < m.dof; ++j)
          ke += 0.5 * s.qd[static_cast<std::size_t>(i)] * H(i, j) * s.qd[static_cast<std::size_t>(j)];
      CHECK(total_energy(m, s) == doctest::Approx(ke).epsilon(1e-10));
    }
  }
}

TEST_CASE("scalar genericity: dual numbers with zero tangents match double bitwise-ish") {
  std::mt19937_64 rng(71);
  using D = Dual<4>;
  for (int trial = 0; trial < 10; ++trial) {
    const Model m = random_chain(rng, 4);
    const auto s = random_state(rng, m.dof);
    std::vector<double> tau(static_cast<std::size_t>(m.dof));
    for (auto& v : tau) v = oracles::uniform(rng, -2, 2);
    const auto qdd = aba(m, s, tau);

    const ModelT<D> md = lift_model<D>(m);
    StateT<D> sd;
    for (double v : s.q) sd.q.emplace_back(v);
    for (double v : s.qd) sd.qd.emplace_back(v);
    std::vector<D> taud(tau.begin(), tau.end());
    const auto qddd = aba(md, sd, taud);
    for (int i = 0; i < m.dof; ++i) {
      CHECK(std::abs(qddd[static_cast<std::size_t>(i)].val - qdd[static_cast<std::size_t>(i)]) <=
            1e-14 * std::max(1.0, std::abs(qdd[static_cast<std::size_t>(i)])));
      CHECK(qddd[static_cast<std::size_t>(i)].dot[0] == 0.0);
    }
  }
}

TEST_CASE("aba cost grows linearly in the body count") {
  std::mt19937_64 rng(81);
  std::vector<std::uint64_t> visits;
  const std::vector<int> sizes{1, 10, 50, 100};
  for (int n : sizes) {
    Model m;
    for (int i = 0; i < n; ++i) {
      Body<double> b;
      b.name = "l" + std::to_string(i);
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
    const auto s = random_state(rng, n);
    auto& counters = dynamics_counters();
    const auto before = counters.body_visits;
    aba(m, s, std::vector<double>(static_cast<std::size_t>(n), 0.0));
    visits.push_back(counters.body_visits - before);
  }
  // Per-call visits are an exact linear function of n: visits(n)/n constant.
  for (std::size_t i = 0; i < sizes.size(); ++i)
    CHECK(static_cast<double>(visits[i]) / sizes[i] ==
          doctest::Approx(static_cast<double>(visits[0]) / sizes[0]));
}

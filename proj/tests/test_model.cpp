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

#include "diffsim/model.hpp"

#include <random>

#include <doctest.h>

#include "diffsim/dynamics.hpp"
#include "oracles.hpp"

using namespace diffsim;

namespace {

const char* kPendulumDoc = R"json({
  "gravity": [0, 0, -9.81],
  "bodies": [
    {"name": "rod", "mass": 1.0, "com": [0, 0, -0.5], "inertia": [0.0833333, 0, 0, 0.0833333, 0, 0]},
    {"name": "tip", "mass": 1e-6, "com": [0, 0, 0], "inertia": [0, 0, 0, 0, 0, 0]}
  ],
  "joints": [
    {"kind": "revolute", "axis": [0, 1, 0], "parent": -1, "offset": [0, 0, 0]},
    {"kind": "fixed", "axis": [0, 0, 1], "parent": 0, "offset": [0, 0, -1]}
  ]
})json";

// Double cartpole: cart on a rail, two pole links, plus a tip frame whose
// offset carries the second pole's length.
const char* kDoubleCartpoleDoc = R"json({
  "gravity": [0, 0, -9.81],
  "bodies": [
    {"name": "cart", "mass": 0.5, "com": [0, 0, 0], "inertia": [0.001, 0, 0, 0.001, 0, 0.001]},
    {"name": "pole1", "mass": 0.1, "com": [0, 0, 0.25], "inertia": [0, 0, 0, 0, 0, 0]},
    {"name": "pole2", "mass": 0.1, "com": [0, 0, 0.25], "inertia": [0, 0, 0, 0, 0, 0]},
    {"name": "tip", "mass": 1e-6, "com": [0, 0, 0], "inertia": [0, 0, 0, 0, 0, 0]}
  ],
  "joints": [
    {"kind": "prismatic", "axis": [1, 0, 0], "parent": -1, "offset": [0, 0, 0]},
    {"kind": "revolute", "axis": [0, 1, 0], "parent": 0, "offset": [0, 0, 0]},
    {"kind": "revolute", "axis": [0, 1, 0], "parent": 1, "offset": [0, 0, 0.5]},
    {"kind": "fixed", "axis": [0, 0, 1], "parent": 2, "offset": [0, 0, 0.5]}
  ]
})json";

ParameterBinding double_cartpole_binding() {
  ParameterBinding b;
  // 3 masses, 2 link lengths, 3x3 com coordinates: 14 parameters.
  b.entries.push_back({ModelField::kBodyMass, 0, 0});
  b.entries.push_back({ModelField::kBodyMass, 1, 1});
  b.entries.push_back({ModelField::kBodyMass, 2, 2});
  b.entries.push_back({ModelField::kLinkLength, 2, 3});
  b.entries.push_back({ModelField::kLinkLength, 3, 4});
  int k = 5;
  for (int body = 0; body < 3; ++body) {
    b.entries.push_back({ModelField::kComX, body, k++});
    b.entries.push_back({ModelField::kComY, body, k++});
    b.entries.push_back({ModelField::kComZ, body, k++});
  }
  return b;
}

}  // namespace

TEST_CASE("parse_model: minimal pendulum document") {
  const Model m = parse_model(kPendulumDoc);
  CHECK(m.dof == 1);
  CHECK(m.body_count() == 2);
  CHECK(m.joints[0].kind == JointKind::kRevolute);
  CHECK(m.gravity.z == doctest::Approx(-9.81));
}

TEST_CASE("parse_model: error reporting") {
  SUBCASE("syntax error carries line and column") {
    try {
      parse_model("{\n  \"bodies\": [,]\n}");
      FAIL("expected ModelError");
    } catch (const ModelError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("parent cycle is rejected") {
    const char* doc = R"({"bodies": [
        {"name":"a","mass":1,"com":[0,0,0],"inertia":[0,0,0,0,0,0]},
        {"name":"b","mass":1,"com":[0,0,0],"inertia":[0,0,0,0,0,0]}],
      "joints": [
        {"kind":"revolute","axis":[0,0,1],"parent":1,"offset":[0,0,0]},
        {"kind":"revolute","axis":[0,0,1],"parent":0,"offset":[0,0,0]}]})";
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("cycle"), ModelError);
  }
  SUBCASE("non-positive mass is rejected") {
    const char* doc = R"({"bodies": [{"name":"a","mass":0.0,"com":[0,0,0],"inertia":[0,0,0,0,0,0]}],
      "joints": [{"kind":"revolute","axis":[0,0,1],"parent":-1,"offset":[0,0,0]}]})";
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("mass"), ModelError);
  }
  SUBCASE("unknown joint kind") {
    const char* doc = R"({"bodies": [{"name":"a","mass":1,"com":[0,0,0],"inertia":[0,0,0,0,0,0]}],
      "joints": [{"kind":"helical","axis":[0,0,1],"parent":-1,"offset":[0,0,0]}]})";
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("unknown joint kind"), ModelError);
  }
  SUBCASE("dangling parent reference") {
    const char* doc = R"({"bodies": [{"name":"a","mass":1,"com":[0,0,0],"inertia":[0,0,0,0,0,0]}],
      "joints": [{"kind":"revolute","axis":[0,0,1],"parent":7,"offset":[0,0,0]}]})";
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("dangling"), ModelError);
  }
}

TEST_CASE("parse_model: double cartpole has dof 3 and 14 bindable parameters") {
  const Model m = parse_model(kDoubleCartpoleDoc);
  CHECK(m.dof == 3);
  const ParameterBinding binding = double_cartpole_binding();
  binding.validate(m);
  CHECK(binding.arity() == 14);
}

TEST_CASE("parse/print round-trips a model") {
  const Model m = parse_model(kDoubleCartpoleDoc);
  const Model r = parse_model(print_model(m));
  REQUIRE(r.body_count() == m.body_count());
  for (int i = 0; i < m.body_count(); ++i) {
    CHECK(r.bodies[i].inertia.mass == doctest::Approx(m.bodies[i].inertia.mass).epsilon(1e-15));
    CHECK(r.bodies[i].inertia.com.z == doctest::Approx(m.bodies[i].inertia.com.z).epsilon(1e-15));
    CHECK(r.joints[i].parent_to_joint.trans.z ==
          doctest::Approx(m.joints[i].parent_to_joint.trans.z).epsilon(1e-15));
    CHECK(r.parent[i] == m.parent[i]);
    CHECK(r.joints[i].kind == m.joints[i].kind);
  }
  // DH models exercise the optional joint orientation.
  DHParams dh;
  dh.rows = {{0.3, 0.5, 1.1}, {-0.2, 0.7, -0.4}};
  const Model arm = model_from_dh(dh);
  const Model arm2 = parse_model(print_model(arm));
  std::vector<double> q{0.3, -0.8};
  const auto p1 = forward_kinematics(arm, q).back().position;
  const auto p2 = forward_kinematics(arm2, q).back().position;
  CHECK(p1.x == doctest::Approx(p2.x).epsilon(1e-12));
  CHECK(p1.y == doctest::Approx(p2.y).epsilon(1e-12));
  CHECK(p1.z == doctest::Approx(p2.z).epsilon(1e-12));
}

TEST_CASE("apply_parameters") {
  const Model m = parse_model(kDoubleCartpoleDoc);

  SUBCASE("empty binding returns the model unchanged") {
    const ModelT<double> r = apply_parameters(m, ParameterBinding{}, std::vector<double>{});
    CHECK(r.bodies[1].inertia.mass == doctest::Approx(0.1));
    CHECK(r.joints[2].parent_to_joint.trans.z == doctest::Approx(0.5));
  }
  SUBCASE("link length overwrite sets the offset magnitude") {
    ParameterBinding b;
    b.entries.push_back({ModelField::kLinkLength, 2, 0});
    const auto r = apply_parameters(m, b, std::vector<double>{2.0});
    CHECK(r.joints[2].parent_to_joint.trans.z == doctest::Approx(2.0));
    CHECK(r.joints[2].parent_to_joint.trans.x == doctest::Approx(0.0));
    // Everything else untouched.
    CHECK(r.bodies[0].inertia.mass == doctest::Approx(0.5));
  }
  SUBCASE("binding all 14 fields to 2 gives the all-2 initial guess") {
    const ParameterBinding b = double_cartpole_binding();
    const auto r = apply_parameters(m, b, std::vector<double>(14, 2.0));
    for (int body = 0; body < 3; ++body) {
      CHECK(r.bodies[body].inertia.mass == doctest::Approx(2.0));
      CHECK(r.bodies[body].inertia.com.x == doctest::Approx(2.0));
      CHECK(r.bodies[body].inertia.com.y == doctest::Approx(2.0));
      CHECK(r.bodies[body].inertia.com.z == doctest::Approx(2.0));
    }
    CHECK(r.joints[2].parent_to_joint.trans.z == doctest::Approx(2.0));
    CHECK(r.joints[3].parent_to_joint.trans.z == doctest::Approx(2.0));
  }
  SUBCASE("idempotent for a fixed theta") {
    const ParameterBinding b = double_cartpole_binding();
    const std::vector<double> theta(14, 1.7);
    const Model r1 = apply_parameters(m, b, theta);
    const Model r2 = apply_parameters(r1, b, theta);
    for (int i = 0; i < m.body_count(); ++i) {
      CHECK(r2.bodies[i].inertia.mass == r1.bodies[i].inertia.mass);
      CHECK(r2.bodies[i].inertia.com.z == r1.bodies[i].inertia.com.z);
      CHECK(r2.joints[i].parent_to_joint.trans.z == r1.joints[i].parent_to_joint.trans.z);
    }
  }
  SUBCASE("dimension mismatch and non-physical results are rejected") {
    const ParameterBinding b = double_cartpole_binding();
    CHECK_THROWS_AS(apply_parameters(m, b, std::vector<double>(13, 2.0)), ModelError);
    std::vector<double> theta(14, 2.0);
    theta[0] = -1.0;  // cart mass
    CHECK_THROWS_WITH_AS(apply_parameters(m, b, theta), doctest::Contains("mass"), ModelError);
  }
  SUBCASE("unbound parameter index is rejected") {
    ParameterBinding b;
    b.entries.push_back({ModelField::kBodyMass, 0, 1});  // theta 0 never bound
    CHECK_THROWS_WITH_AS(apply_parameters(m, b, std::vector<double>{1.0, 2.0}),
                         doctest::Contains("never bound"), ModelError);
  }
}

TEST_CASE("model_from_dh") {
  SUBCASE("single joint with zero parameters rotates about z at the origin") {
    DHParams dh;
    dh.rows = {{0.0, 0.0, 0.0}};
    const auto m = model_from_dh(dh);
    CHECK(m.dof == 1);
    CHECK(m.body_count() == 2);
    CHECK(m.joints[0].kind == JointKind::kRevolute);
    CHECK(m.joints[0].axis.z == doctest::Approx(1.0));
    const auto poses = forward_kinematics(m, std::vector<double>{0.7});
    CHECK(poses.back().position.x == doctest::Approx(0.0));
    CHECK(poses.back().position.y == doctest::Approx(0.0));
    CHECK(poses.back().position.z == doctest::Approx(0.0));
  }
  SUBCASE("two-link planar arm reaches (2, 0, 0) at rest") {
    DHParams dh;
    dh.rows = {{0.0, 1.0, 0.0}, {0.0, 1.0, 0.0}};
    const auto m = model_from_dh(dh);
    const auto poses = forward_kinematics(m, std::vector<double>{0.0, 0.0});
    CHECK(poses.back().position.x == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(poses.back().position.y == doctest::Approx(0.0));
    CHECK(poses.back().position.z == doctest::Approx(0.0));
  }
  SUBCASE("alpha = pi/2 makes the second axis orthogonal, matches the 4x4 oracle") {
    std::mt19937_64 rng(3);
    DHParams dh;
    dh.rows = {{0.2, 0.8, M_PI / 2.0}, {0.1, 0.6, 0.0}};
    const auto m = model_from_dh(dh);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> q{oracles::uniform(rng, -M_PI, M_PI), oracles::uniform(rng, -M_PI, M_PI)};
      const auto p = forward_kinematics(m, q).back().position;
      const auto expected = oracles::dh_end_effector({{0.2, 0.8, M_PI / 2.0}, {0.1, 0.6, 0.0}}, q);
      CHECK(p.x == doctest::Approx(expected.x()).epsilon(1e-10));
      CHECK(p.y == doctest::Approx(expected.y()).epsilon(1e-10));
      CHECK(p.z == doctest::Approx(expected.z()).epsilon(1e-10));
    }
  }
}

TEST_CASE("DH forward kinematics equals the homogeneous-matrix product on 100 random draws") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(oracles::uniform(rng, 0.0, 4.999));
    DHParams dh;
    std::vector<std::array<double, 3>> rows;
    for (int j = 0; j < n; ++j) {
      const double d = oracles::uniform(rng, -0.5, 0.5);
      const double a = oracles::uniform(rng, -1.0, 1.0);
      const double alpha = oracles::uniform(rng, -M_PI, M_PI);
      dh.rows.push_back({d, a, alpha});
      rows.push_back({d, a, alpha});
    }
    std::vector<double> q(static_cast<std::size_t>(n));
    for (auto& qi : q) qi = oracles::uniform(rng, -M_PI, M_PI);
    const auto m = model_from_dh(dh);
    const auto p = forward_kinematics(m, q).back().position;
    const auto expected = oracles::dh_end_effector(rows, q);
    CHECK(std::abs(p.x - expected.x()) <= 1e-10);
    CHECK(std::abs(p.y - expected.y()) <= 1e-10);
    CHECK(std::abs(p.z - expected.z()) <= 1e-10);
  }
}

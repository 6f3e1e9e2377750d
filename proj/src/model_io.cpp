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

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "diffsim/model.hpp"

// Model document format (JSON):
// {
//   "gravity": [x, y, z],                     optional, default (0,0,-9.81)
//   "bodies": [{"name", "mass", "com": [3], "inertia": [6]}],
//   "joints": [{"kind", "axis": [3], "parent": i|-1, "offset": [3],
//               "orientation": [w,x,y,z]?, "limits": [lo,hi]?}]
// }
// Lists are parallel: joint i attaches body i to body parent[i]. "inertia"
// holds the upper triangle (xx, xy, xz, yy, yz, zz) of the rotational
// inertia about the center of mass.

namespace diffsim {

namespace {

using nlohmann::json;

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

Vec3<double> parse_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw ModelError("model: '" + what + "' must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

JointKind parse_kind(const std::string& kind) {
  if (kind == "revolute") return JointKind::kRevolute;
  if (kind == "prismatic") return JointKind::kPrismatic;
  if (kind == "fixed") return JointKind::kFixed;
  throw ModelError("model: unknown joint kind '" + kind + "'");
}

std::string kind_name(JointKind k) {
  switch (k) {
    case JointKind::kRevolute: return "revolute";
    case JointKind::kPrismatic: return "prismatic";
    case JointKind::kFixed: return "fixed";
  }
  return "?";
}

}  // namespace

Model parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ModelError("model: syntax error at line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": " + e.what());
  }
  try {
    Model m;
    if (doc.contains("gravity")) m.gravity = parse_vec3(doc.at("gravity"), "gravity");
    if (!doc.contains("bodies") || !doc.contains("joints"))
      throw ModelError("model: document needs 'bodies' and 'joints'");
    for (const auto& jb : doc.at("bodies")) {
      Body<double> b;
      b.name = jb.value("name", "body" + std::to_string(m.bodies.size()));
      b.inertia.mass = jb.at("mass").get<double>();
      b.inertia.com = parse_vec3(jb.at("com"), "com");
      const auto& in = jb.at("inertia");
      if (!in.is_array() || in.size() != 6)
        throw ModelError("model: 'inertia' must hold 6 upper-triangular entries");
      const double xx = in[0], xy = in[1], xz = in[2], yy = in[3], yz = in[4], zz = in[5];
      b.inertia.inertia_com.m[0][0] = xx;
      b.inertia.inertia_com.m[0][1] = b.inertia.inertia_com.m[1][0] = xy;
      b.inertia.inertia_com.m[0][2] = b.inertia.inertia_com.m[2][0] = xz;
      b.inertia.inertia_com.m[1][1] = yy;
      b.inertia.inertia_com.m[1][2] = b.inertia.inertia_com.m[2][1] = yz;
      b.inertia.inertia_com.m[2][2] = zz;
      m.bodies.push_back(std::move(b));
    }
    for (const auto& jj : doc.at("joints")) {
      Joint<double> j;
      j.kind = parse_kind(jj.at("kind").get<std::string>());
      if (jj.contains("axis")) {
        j.axis = parse_vec3(jj.at("axis"), "axis");
        const double n = std::sqrt(squared_norm(j.axis));
        if (!(n > 0.0)) throw ModelError("model: joint axis must be nonzero");
        j.axis = j.axis * (1.0 / n);
      }
      j.parent_to_joint.trans = jj.contains("offset") ? parse_vec3(jj.at("offset"), "offset")
                                                      : Vec3<double>::zero();
      if (jj.contains("orientation")) {
        const auto& q = jj.at("orientation");
        if (!q.is_array() || q.size() != 4)
          throw ModelError("model: 'orientation' must be a quaternion [w,x,y,z]");
        j.parent_to_joint.rot =
            Quat<double>(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                         q[3].get<double>())
                .normalized();
      }
      if (jj.contains("limits")) {
        const auto& lim = jj.at("limits");
        if (!lim.is_array() || lim.size() != 2)
          throw ModelError("model: 'limits' must be [lower, upper]");
        j.position_limits = std::make_pair(lim[0].get<double>(), lim[1].get<double>());
      }
      m.parent.push_back(jj.at("parent").get<int>());
      m.joints.push_back(std::move(j));
    }
    m.finalize();
    return m;
  } catch (const json::exception& e) {
    throw ModelError(std::string("model: ") + e.what());
  }
}

std::string print_model(const Model& m) {
  json doc;
  doc["gravity"] = {m.gravity.x, m.gravity.y, m.gravity.z};
  doc["bodies"] = json::array();
  for (const auto& b : m.bodies) {
    const auto& I = b.inertia.inertia_com.m;
    doc["bodies"].push_back({{"name", b.name},
                             {"mass", b.inertia.mass},
                             {"com", {b.inertia.com.x, b.inertia.com.y, b.inertia.com.z}},
                             {"inertia", {I[0][0], I[0][1], I[0][2], I[1][1], I[1][2], I[2][2]}}});
  }
  doc["joints"] = json::array();
  for (std::size_t i = 0; i < m.joints.size(); ++i) {
    const auto& j = m.joints[i];
    json jj = {{"kind", kind_name(j.kind)},
               {"axis", {j.axis.x, j.axis.y, j.axis.z}},
               {"parent", m.parent[i]},
               {"offset",
                {j.parent_to_joint.trans.x, j.parent_to_joint.trans.y, j.parent_to_joint.trans.z}}};
    const auto& q = j.parent_to_joint.rot;
    if (!(q.w == 1.0 && q.x == 0.0 && q.y == 0.0 && q.z == 0.0))
      jj["orientation"] = {q.w, q.x, q.y, q.z};
    if (j.position_limits)
      jj["limits"] = {j.position_limits->first, j.position_limits->second};
    doc["joints"].push_back(std::move(jj));
  }
  return doc.dump(2);
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace diffsim

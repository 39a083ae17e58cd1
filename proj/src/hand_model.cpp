#include "skelgrasp/hand_model.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "skelgrasp/errors.hpp"
#include "skelgrasp/log.hpp"
#include "skelgrasp/primitives.hpp"

namespace skelgrasp {

using nlohmann::json;

int HandModel::link_index(std::string_view n) const {
  for (std::size_t i = 0; i < links.size(); ++i)
    if (links[i].name == n) return static_cast<int>(i);
  return -1;
}

int HandModel::joint_index(std::string_view n) const {
  for (std::size_t i = 0; i < joints.size(); ++i)
    if (joints[i].name == n) return static_cast<int>(i);
  return -1;
}

const Preshape& HandModel::preshape(std::string_view n) const {
  for (const auto& p : preshapes)
    if (p.name == n) return p;
  throw InputError("hand '" + name + "' has no preshape '" + std::string(n) + "'");
}

std::vector<int> HandModel::joints_moving(int link) const {
  std::vector<int> out;
  for (int l = link; l > 0;) {
    int via = -1;
    for (std::size_t j = 0; j < joints.size(); ++j)
      if (joints[j].child == l) via = static_cast<int>(j);
    if (via < 0) break;
    out.push_back(via);
    l = joints[via].parent;
  }
  return out;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw InputError("hand config: " + msg); }

Vec3 read_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) fail(what + " must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) fail(what + " must be an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

RigidPose read_pose(const json& j, const std::string& what) {
  if (!j.is_object()) fail(what + " must be an object with translation and rotation");
  Vec3 t = j.contains("translation") ? read_vec3(j["translation"], what + ".translation") : Vec3::Zero();
  Quat q = Quat::Identity();
  if (j.contains("rotation")) {
    const auto& r = j["rotation"];
    if (!r.is_array() || r.size() != 4) fail(what + ".rotation must be a quaternion [w, x, y, z]");
    q = Quat(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>());
    if (q.norm() < 1e-9) fail(what + ".rotation has zero norm");
  }
  return {t, q};
}

std::pair<double, double> read_range(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(what + " must be [lower, upper]");
  const double lo = j[0].get<double>(), hi = j[1].get<double>();
  if (lo > hi) fail(what + " has lower bound above upper bound");
  return {lo, hi};
}

double read_number(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_number()) fail(what + " needs numeric '" + key + "'");
  return j[key].get<double>();
}

Mesh read_link_mesh(const json& j, const std::string& what, const std::filesystem::path& base) {
  if (j.contains("box")) {
    const auto& b = j["box"];
    const Vec3 size = read_vec3(b.at("size"), what + ".box.size");
    if ((size.array() <= 0.0).any()) fail(what + ".box.size must be positive");
    const Vec3 center = b.contains("center") ? read_vec3(b["center"], what + ".box.center") : Vec3::Zero();
    return shapes::box(size, center);
  }
  if (j.contains("mesh")) {
    std::filesystem::path p = j["mesh"].get<std::string>();
    if (p.is_relative()) p = base / p;
    const double scale = j.value("scale", 1.0);
    return load_mesh(p, scale);
  }
  fail(what + " needs either 'box' or 'mesh'");
}

}  // namespace

HandModel parse_hand(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("parse error: ") + e.what());
  }
  try {
    if (!doc.is_object()) fail("top level must be an object");
    if (doc.value("schema_version", 0) != kHandSchemaVersion)
      fail("unsupported schema_version (expected " + std::to_string(kHandSchemaVersion) + ")");

    HandModel hand;
    hand.name = doc.value("name", std::string("hand"));
    hand.fingerwidth = read_number(doc, "fingerwidth", "hand");
    hand.handwidth = read_number(doc, "handwidth", "hand");
    if (hand.fingerwidth <= 0 || hand.handwidth <= 0) fail("fingerwidth and handwidth must be positive");

    if (!doc.contains("links") || !doc["links"].is_array() || doc["links"].empty()) fail("needs a non-empty 'links' array");
    std::vector<Link> links;
    std::map<std::string, int> link_ids;
    for (const auto& jl : doc["links"]) {
      const std::string name = jl.at("name").get<std::string>();
      if (link_ids.count(name)) fail("duplicate link '" + name + "'");
      link_ids[name] = static_cast<int>(links.size());
      links.push_back({name, read_link_mesh(jl, "link '" + name + "'", base_dir)});
    }

    std::vector<Joint> joints;
    std::vector<int> parent_joint(links.size(), -1);
    std::map<std::string, int> joint_ids;
    for (const auto& jj : doc.value("joints", json::array())) {
      Joint j;
      j.name = jj.at("name").get<std::string>();
      const std::string type = jj.value("type", std::string("revolute"));
      if (type == "prismatic") {
        j.type = JointType::Prismatic;
      } else if (type != "revolute") {
        fail("joint '" + j.name + "' has unknown type '" + type + "'");
      }
      if (joint_ids.count(j.name)) fail("duplicate joint '" + j.name + "'");
      const auto parent = jj.at("parent").get<std::string>();
      const auto child = jj.at("child").get<std::string>();
      if (!link_ids.count(parent)) fail("joint '" + j.name + "' references unknown link '" + parent + "'");
      if (!link_ids.count(child)) fail("joint '" + j.name + "' references unknown link '" + child + "'");
      j.parent = link_ids[parent];
      j.child = link_ids[child];
      if (j.parent == j.child) fail("cyclic joint graph: joint '" + j.name + "' connects a link to itself");
      if (parent_joint[j.child] >= 0) fail("link '" + child + "' has more than one parent joint");
      const Vec3 axis = read_vec3(jj.at("axis"), "joint '" + j.name + "'.axis");
      if (axis.norm() < 1e-9) fail("joint '" + j.name + "' has a zero axis");
      j.axis = axis.normalized();
      if (jj.contains("origin")) j.origin = read_pose(jj["origin"], "joint '" + j.name + "'.origin");
      std::tie(j.lower, j.upper) = read_range(jj.at("limits"), "joint '" + j.name + "'.limits");
      parent_joint[j.child] = static_cast<int>(joints.size());
      joint_ids[j.name] = static_cast<int>(joints.size());
      joints.push_back(j);
    }

    // Every link must reach a single root by following parent joints.
    for (std::size_t l = 0; l < links.size(); ++l) {
      std::size_t steps = 0;
      for (int cur = static_cast<int>(l); parent_joint[cur] >= 0; cur = joints[parent_joint[cur]].parent)
        if (++steps > links.size()) fail("cyclic joint graph through link '" + links[l].name + "'");
    }
    std::vector<int> roots;
    for (std::size_t l = 0; l < links.size(); ++l)
      if (parent_joint[l] < 0) roots.push_back(static_cast<int>(l));
    if (roots.size() != 1) fail("joint graph must form a single tree rooted at the palm");

    // Reindex: links breadth first from the root, joints in the order their child is reached.
    std::vector<int> order{roots[0]};
    std::vector<int> joint_order;
    for (std::size_t q = 0; q < order.size(); ++q)
      for (std::size_t j = 0; j < joints.size(); ++j)
        if (joints[j].parent == order[q]) {
          order.push_back(joints[j].child);
          joint_order.push_back(static_cast<int>(j));
        }
    std::vector<int> new_link(links.size());
    for (std::size_t i = 0; i < order.size(); ++i) new_link[order[i]] = static_cast<int>(i);
    for (int l : order) hand.links.push_back(std::move(links[l]));
    std::vector<int> new_joint(joints.size());
    for (std::size_t i = 0; i < joint_order.size(); ++i) {
      Joint j = joints[joint_order[i]];
      j.parent = new_link[j.parent];
      j.child = new_link[j.child];
      new_joint[joint_order[i]] = static_cast<int>(i);
      hand.joints.push_back(j);
    }

    if (!doc.contains("preshapes") || !doc["preshapes"].is_array()) fail("needs a 'preshapes' array");
    for (const auto& jp : doc["preshapes"]) {
      Preshape p;
      p.name = jp.at("name").get<std::string>();
      const std::string what = "preshape '" + p.name + "'";
      p.start.assign(hand.joints.size(), 0.0);
      p.closing.assign(hand.joints.size(), 0.0);
      for (const char* key : {"start", "closing"}) {
        if (!jp.contains(key)) continue;
        if (!jp[key].is_object()) fail(what + "." + key + " must map joint names to numbers");
        for (const auto& [jn, val] : jp[key].items()) {
          if (!joint_ids.count(jn)) fail(what + " references unknown joint '" + jn + "'");
          if (!val.is_number()) fail(what + "." + key + "." + jn + " must be a number");
          const int j = new_joint[joint_ids[jn]];
          if (std::string_view(key) == "start") {
            p.start[j] = val.get<double>();
          } else {
            const double d = val.get<double>();
            p.closing[j] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
          }
        }
      }
      if (!jp.contains("gcp")) fail(what + " is missing its grasp center point 'gcp'");
      p.gcp = read_pose(jp["gcp"], what + ".gcp");
      hand.preshapes.push_back(std::move(p));
    }
    for (const char* required : {"precision", "power"}) {
      const bool found = std::any_of(hand.preshapes.begin(), hand.preshapes.end(),
                                     [&](const Preshape& p) { return p.name == required; });
      if (!found) fail(std::string("missing required preshape '") + required + "'");
    }

    if (doc.contains("thresholds")) {
      const auto& t = doc["thresholds"];
      auto& s = hand.thresholds;
      if (t.contains("pre1")) std::tie(s.pre1_min, s.pre1_max) = read_range(t["pre1"], "thresholds.pre1");
      if (t.contains("pre2")) std::tie(s.pre2_min, s.pre2_max) = read_range(t["pre2"], "thresholds.pre2");
      if (t.contains("pow2")) std::tie(s.pow2_min, s.pow2_max) = read_range(t["pow2"], "thresholds.pow2");
      if (t.contains("pow1_min")) s.pow1_min = read_number(t, "pow1_min", "thresholds");
    }
    return hand;
  } catch (const json::exception& e) {
    fail(e.what());
  }
}

HandModel load_hand(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open hand config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hand(ss.str(), path.parent_path());
}

namespace {

constexpr const char* kParallelGripper = R"({
  "schema_version": 1,
  "name": "parallel_gripper",
  "fingerwidth": 20,
  "handwidth": 50,
  "links": [
    {"name": "palm", "box": {"size": [120, 50, 20], "center": [0, 0, 0]}},
    {"name": "left_jaw", "box": {"size": [8, 20, 90], "center": [0, 0, 45]}},
    {"name": "right_jaw", "box": {"size": [8, 20, 90], "center": [0, 0, 45]}}
  ],
  "joints": [
    {"name": "left", "type": "prismatic", "parent": "palm", "child": "left_jaw", "axis": [1, 0, 0],
     "origin": {"translation": [-54, 0, 10]}, "limits": [0, 48]},
    {"name": "right", "type": "prismatic", "parent": "palm", "child": "right_jaw", "axis": [-1, 0, 0],
     "origin": {"translation": [54, 0, 10]}, "limits": [0, 48]}
  ],
  "preshapes": [
    {"name": "precision", "start": {"left": 0, "right": 0}, "closing": {"left": 1, "right": 1},
     "gcp": {"translation": [0, 0, 80], "rotation": [1, 0, 0, 0]}},
    {"name": "power", "start": {"left": 0, "right": 0}, "closing": {"left": 1, "right": 1},
     "gcp": {"translation": [0, 0, 40], "rotation": [1, 0, 0, 0]}}
  ],
  "thresholds": {"pre1": [5, 60], "pre2": [5, 40], "pow1_min": 40, "pow2": [20, 80]}
})";

constexpr const char* kThreeFinger = R"({
  "schema_version": 1,
  "name": "three_finger",
  "fingerwidth": 16,
  "handwidth": 80,
  "links": [
    {"name": "palm", "box": {"size": [80, 80, 20], "center": [0, 0, 0]}},
    {"name": "f1_proximal", "box": {"size": [10, 16, 50], "center": [0, 0, 25]}},
    {"name": "f1_distal", "box": {"size": [10, 16, 40], "center": [0, 0, 20]}},
    {"name": "f2_proximal", "box": {"size": [10, 16, 50], "center": [0, 0, 25]}},
    {"name": "f2_distal", "box": {"size": [10, 16, 40], "center": [0, 0, 20]}},
    {"name": "f3_proximal", "box": {"size": [10, 16, 50], "center": [0, 0, 25]}},
    {"name": "f3_distal", "box": {"size": [10, 16, 40], "center": [0, 0, 20]}}
  ],
  "joints": [
    {"name": "f1_base", "parent": "palm", "child": "f1_proximal", "axis": [0, -1, 0],
     "origin": {"translation": [0, 35, 10], "rotation": [0.70710678118654757, 0, 0, 0.70710678118654757]},
     "limits": [0, 1.2]},
    {"name": "f1_tip", "parent": "f1_proximal", "child": "f1_distal", "axis": [0, -1, 0],
     "origin": {"translation": [0, 0, 50]}, "limits": [0, 1.4]},
    {"name": "f2_base", "parent": "palm", "child": "f2_proximal", "axis": [0, -1, 0],
     "origin": {"translation": [-30.310889132455355, -17.5, 10], "rotation": [-0.25881904510252074, 0, 0, 0.96592582628906831]},
     "limits": [0, 1.2]},
    {"name": "f2_tip", "parent": "f2_proximal", "child": "f2_distal", "axis": [0, -1, 0],
     "origin": {"translation": [0, 0, 50]}, "limits": [0, 1.4]},
    {"name": "f3_base", "parent": "palm", "child": "f3_proximal", "axis": [0, -1, 0],
     "origin": {"translation": [30.310889132455355, -17.5, 10], "rotation": [-0.96592582628906831, 0, 0, 0.25881904510252074]},
     "limits": [0, 1.2]},
    {"name": "f3_tip", "parent": "f3_proximal", "child": "f3_distal", "axis": [0, -1, 0],
     "origin": {"translation": [0, 0, 50]}, "limits": [0, 1.4]}
  ],
  "preshapes": [
    {"name": "precision", "closing": {"f1_base": 1, "f2_base": 1, "f3_base": 1},
     "gcp": {"translation": [0, 0, 90], "rotation": [1, 0, 0, 0]}},
    {"name": "power",
     "closing": {"f1_base": 1, "f1_tip": 1, "f2_base": 1, "f2_tip": 1, "f3_base": 1, "f3_tip": 1},
     "gcp": {"translation": [0, 0, 40], "rotation": [1, 0, 0, 0]}}
  ],
  "thresholds": {"pre1": [5, 50], "pre2": [5, 35], "pow1_min": 30, "pow2": [15, 60]}
})";

}  // namespace

std::vector<std::string> builtin_hand_names() { return {"parallel_gripper", "three_finger"}; }

std::string builtin_hand_config(std::string_view name) {
  if (name == "parallel_gripper") return kParallelGripper;
  if (name == "three_finger") return kThreeFinger;
  return {};
}

HandModel builtin_hand(std::string_view name) {
  const std::string text = builtin_hand_config(name);
  if (text.empty()) throw InputError("unknown built-in hand '" + std::string(name) + "'");
  return parse_hand(text);
}

HandModel resolve_hand(std::string_view spec) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.substr(0, prefix.size()) == prefix) return builtin_hand(spec.substr(prefix.size()));
  const std::filesystem::path p{std::string(spec)};
  if (std::filesystem::exists(p)) return load_hand(p);
  if (p.is_relative()) {
    if (const char* env = std::getenv(kHandPathEnv)) {
      std::stringstream dirs(env);
      std::string dir;
      while (std::getline(dirs, dir, ':')) {
        if (dir.empty()) continue;
        const auto candidate = std::filesystem::path(dir) / p;
        if (std::filesystem::exists(candidate)) return load_hand(candidate);
      }
    }
  }
  throw InputError("hand config not found: " + std::string(spec));
}

std::vector<RigidPose> forward_kinematics(const HandModel& hand, std::span<const double> q, const RigidPose& root) {
  if (q.size() != hand.joints.size())
    throw InputError("forward_kinematics: expected " + std::to_string(hand.joints.size()) + " joint values, got " +
                     std::to_string(q.size()));
  std::vector<RigidPose> poses(hand.links.size());
  poses[0] = root;
  for (std::size_t i = 0; i < hand.joints.size(); ++i) {
    const auto& j = hand.joints[i];
    double v = q[i];
    if (v < j.lower || v > j.upper) {
      const double c = std::clamp(v, j.lower, j.upper);
      log_warning("joint '" + j.name + "' value " + std::to_string(v) + " clamped to " + std::to_string(c));
      v = c;
    }
    const RigidPose motion = j.type == JointType::Revolute ? RigidPose::from_axis_angle(j.axis, v)
                                                           : RigidPose::from_translation(v * j.axis);
    poses[j.child] = poses[j.parent] * j.origin * motion;
  }
  return poses;
}

bool hand_collides(const HandModel& hand, std::span<const RigidPose> link_poses, const Mesh& object) {
  for (std::size_t l = 0; l < hand.links.size(); ++l)
    if (collide(hand.links[l].mesh, link_poses[l], object, RigidPose::identity())) return true;
  return false;
}

CloseResult close_fingers(const HandModel& hand, const RigidPose& pose, std::string_view preshape_name,
                          const Mesh& object, const CloseOptions& options) {
  const Preshape& pre = hand.preshape(preshape_name);
  const std::size_t nj = hand.joints.size();
  const std::size_t nl = hand.links.size();
  const RigidPose identity;

  CloseResult result;
  std::vector<double> q(nj);
  for (std::size_t j = 0; j < nj; ++j) q[j] = std::clamp(pre.start[j], hand.joints[j].lower, hand.joints[j].upper);
  if (hand_collides(hand, forward_kinematics(hand, q, pose), object)) {
    result.initial_collision = true;
    return result;
  }

  // moved_by[l][j]: joint j moves link l.
  std::vector<std::vector<char>> moved_by(nl, std::vector<char>(nj, 0));
  for (std::size_t l = 0; l < nl; ++l)
    for (int j : hand.joints_moving(static_cast<int>(l))) moved_by[l][j] = 1;

  std::vector<double> step(nj);
  for (std::size_t j = 0; j < nj; ++j)
    step[j] = hand.joints[j].type == JointType::Revolute ? options.step : options.linear_step;

  std::vector<char> active(nj, 0);
  for (std::size_t j = 0; j < nj; ++j) {
    const double dir = pre.closing[j];
    active[j] = dir != 0.0 && (dir > 0 ? q[j] < hand.joints[j].upper : q[j] > hand.joints[j].lower);
  }
  auto moving = [&](std::size_t l) {
    for (std::size_t j = 0; j < nj; ++j)
      if (active[j] && moved_by[l][j]) return true;
    return false;
  };
  auto advanced = [&](double t) {
    std::vector<double> out = q;
    for (std::size_t j = 0; j < nj; ++j)
      if (active[j])
        out[j] = std::clamp(q[j] + t * step[j] * pre.closing[j], hand.joints[j].lower, hand.joints[j].upper);
    return out;
  };
  auto touching = [&](const std::vector<double>& qs) {
    const auto poses = forward_kinematics(hand, qs, pose);
    std::vector<char> hit(nl, 0);
    for (std::size_t l = 0; l < nl; ++l)
      if (moving(l)) hit[l] = surfaces_within(hand.links[l].mesh, poses[l], object, identity, options.touch_tolerance);
    return hit;
  };
  auto any = [](const std::vector<char>& v) { return std::any_of(v.begin(), v.end(), [](char c) { return c != 0; }); };

  int iter = 0;
  for (; iter < options.max_iterations && any(active); ++iter) {
    auto hit = touching(advanced(1.0));
    double t = 1.0;
    if (any(hit)) {
      double lo = 0.0, hi = 1.0;
      for (int b = 0; b < options.bisections; ++b) {
        const double mid = 0.5 * (lo + hi);
        auto h = touching(advanced(mid));
        if (any(h)) {
          hi = mid;
          hit = std::move(h);
        } else {
          lo = mid;
        }
      }
      t = hi;
    }
    q = advanced(t);
    for (std::size_t j = 0; j < nj; ++j) {
      if (!active[j]) continue;
      const bool at_limit = pre.closing[j] > 0 ? q[j] >= hand.joints[j].upper : q[j] <= hand.joints[j].lower;
      bool blocked = false;
      for (std::size_t l = 0; l < nl; ++l) blocked = blocked || (hit[l] && moved_by[l][j]);
      if (at_limit || blocked) active[j] = 0;
    }
  }
  result.iterations = iter;
  result.joints = q;

  const auto poses = forward_kinematics(hand, q, pose);
  for (std::size_t l = 0; l < nl; ++l) {
    auto c = extract_contacts(hand.links[l].mesh, poses[l], object, static_cast<int>(l));
    result.contacts.insert(result.contacts.end(), c.begin(), c.end());
  }
  return result;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::PrecisionConnecting1a: return "1a";
    case Strategy::PrecisionConnecting1b: return "1b";
    case Strategy::PowerConnecting2a: return "2a";
    case Strategy::PowerConnecting2b: return "2b";
    case Strategy::PrecisionEndpoint3: return "3";
    case Strategy::PowerEndpoint4: return "4";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view id) {
  for (Strategy s : kAllStrategies)
    if (to_string(s) == id) return s;
  return std::nullopt;
}

bool is_precision(Strategy s) {
  return s == Strategy::PrecisionConnecting1a || s == Strategy::PrecisionConnecting1b ||
         s == Strategy::PrecisionEndpoint3;
}

std::string_view preshape_for(Strategy s) { return is_precision(s) ? "precision" : "power"; }

RigidPose place_gcp(const HandModel& hand, std::string_view preshape, const Vec3& point, const Vec3& approach,
                    const Vec3& spread) {
  const Vec3 z = approach.normalized();
  Vec3 x = spread - spread.dot(z) * z;
  if (x.norm() < 1e-9) x = any_perpendicular(z);
  x.normalize();
  const Vec3 y = z.cross(x);
  const RigidPose gcp_world = RigidPose::from_frame(point, x, y, z);
  return gcp_world * hand.preshape(preshape).gcp.inverse();
}

}  // namespace skelgrasp

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>
#include <json.hpp>

#include "skelgrasp/errors.hpp"
#include "skelgrasp/hand_model.hpp"
#include "skelgrasp/primitives.hpp"

using namespace skelgrasp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json gripper_json() { return json::parse(builtin_hand_config("parallel_gripper")); }

json single_revolute_hand() {
  return json::parse(R"({
    "schema_version": 1, "name": "pendulum", "fingerwidth": 10, "handwidth": 40,
    "links": [{"name": "base", "box": {"size": [10, 10, 10]}},
              {"name": "arm", "box": {"size": [2, 2, 20], "center": [10, 0, 0]}}],
    "joints": [{"name": "hinge", "parent": "base", "child": "arm", "axis": [0, 0, 1],
                "origin": {"translation": [0, 0, 5]}, "limits": [-3.2, 3.2]}],
    "preshapes": [
      {"name": "precision", "closing": {"hinge": 1}, "gcp": {"translation": [0, 0, 10]}},
      {"name": "power", "closing": {"hinge": 1}, "gcp": {"translation": [0, 0, 10]}}]
  })");
}

void expect_bad(const json& j, const std::string& fragment) {
  try {
    parse_hand(j.dump());
    FAIL() << "accepted config, expected error containing '" << fragment << "'";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

void expect_pose_near(const RigidPose& a, const RigidPose& b, double tol = 1e-9) {
  EXPECT_LT((a.translation - b.translation).norm(), tol);
  EXPECT_LT(a.rotation.angularDistance(b.rotation), tol);
}

RigidPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {Vec3(100 * n(rng), 100 * n(rng), 100 * n(rng)), Quat(n(rng), n(rng), n(rng), n(rng)).normalized()};
}

/// Gripper pose with the power GCP at the origin, approach +z, jaws closing along x.
RigidPose centered_pose(const HandModel& hand) {
  return place_gcp(hand, "power", Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitX());
}

}  // namespace

TEST(LoadHand, BuiltinGripper) {
  const HandModel h = builtin_hand("parallel_gripper");
  EXPECT_EQ(h.links.size(), 3u);
  EXPECT_EQ(h.joints.size(), 2u);
  ASSERT_EQ(h.preshapes.size(), 2u);
  EXPECT_EQ(h.preshape("precision").gcp.translation.z(), 80.0);
  EXPECT_EQ(h.preshape("power").gcp.translation.z(), 40.0);
  EXPECT_THROW(static_cast<void>(h.preshape("pinch")), InputError);
  EXPECT_EQ(h.link_index("palm"), 0);
  EXPECT_DOUBLE_EQ(h.fingerwidth, 20.0);
  EXPECT_DOUBLE_EQ(h.handwidth, 50.0);
  EXPECT_DOUBLE_EQ(h.thresholds.pre2_max, 40.0);
  EXPECT_DOUBLE_EQ(h.thresholds.pow2_max, 80.0);
  EXPECT_DOUBLE_EQ(h.thresholds.pre1_max, 60.0);
  EXPECT_DOUBLE_EQ(h.thresholds.pow1_min, 40.0);
}

TEST(LoadHand, BuiltinThreeFinger) {
  const HandModel h = builtin_hand("three_finger");
  EXPECT_EQ(h.links.size(), 7u);
  EXPECT_EQ(h.joints.size(), 6u);
  for (std::size_t j = 0; j < h.joints.size(); ++j) EXPECT_LT(h.joints[j].parent, h.joints[j].child);
  EXPECT_EQ(h.joints_moving(h.link_index("f2_distal")).size(), 2u);
  EXPECT_THROW(builtin_hand("five_finger"), InputError);
}

TEST(LoadHand, ConfigErrors) {
  auto cycle = single_revolute_hand();
  cycle["joints"].push_back({{"name", "back"}, {"parent", "arm"}, {"child", "base"}, {"axis", {0, 0, 1}},
                             {"limits", {0, 1}}});
  expect_bad(cycle, "cyclic");

  auto no_gcp = gripper_json();
  no_gcp["preshapes"][0].erase("gcp");
  expect_bad(no_gcp, "gcp");

  auto unknown_joint = gripper_json();
  unknown_joint["preshapes"][1]["closing"]["thumb"] = 1;
  expect_bad(unknown_joint, "unknown joint 'thumb'");

  auto version = gripper_json();
  version["schema_version"] = 2;
  expect_bad(version, "schema_version");

  auto limits = gripper_json();
  limits["joints"][0]["limits"] = {10, 0};
  expect_bad(limits, "lower bound above upper");

  auto missing_power = gripper_json();
  missing_power["preshapes"].erase(1);
  expect_bad(missing_power, "power");

  EXPECT_THROW(parse_hand("{not json"), InputError);
  EXPECT_THROW(load_hand("/nonexistent/hand.json"), InputError);
}

TEST(LoadHand, MeshLinkRelativeToConfig) {
  const fs::path dir = fs::temp_directory_path() / "skelgrasp_test_hand";
  fs::create_directories(dir);
  {
    std::ofstream off(dir / "finger.off");
    write_off(shapes::box({5, 5, 30}), off);
  }
  auto j = single_revolute_hand();
  j["links"][1] = {{"name", "arm"}, {"mesh", "finger.off"}};
  std::ofstream(dir / "pendulum.json") << j.dump();
  const HandModel h = load_hand(dir / "pendulum.json");
  EXPECT_EQ(h.links[1].mesh.triangle_count(), 12u);
}

TEST(ResolveHand, BuiltinPathAndSearchPath) {
  EXPECT_EQ(resolve_hand("builtin:parallel_gripper").name, "parallel_gripper");
  const fs::path dir = fs::temp_directory_path() / "skelgrasp_hand_path";
  fs::create_directories(dir);
  std::ofstream(dir / "pendulum.json") << single_revolute_hand().dump();
  EXPECT_EQ(resolve_hand((dir / "pendulum.json").string()).name, "pendulum");
  ::setenv(kHandPathEnv, ("/nonexistent:" + dir.string()).c_str(), 1);
  EXPECT_EQ(resolve_hand("pendulum.json").name, "pendulum");
  ::unsetenv(kHandPathEnv);
  EXPECT_THROW(resolve_hand("pendulum.json"), InputError);
  EXPECT_THROW(resolve_hand("builtin:nope"), InputError);
}

TEST(ForwardKinematics, RestTransforms) {
  const HandModel h = builtin_hand("parallel_gripper");
  const std::vector<double> q(2, 0.0);
  const auto poses = forward_kinematics(h, q);
  expect_pose_near(poses[0], RigidPose());
  for (std::size_t j = 0; j < h.joints.size(); ++j) expect_pose_near(poses[h.joints[j].child], h.joints[j].origin);

  const Vec3 t(5, -7, 11);
  const auto moved = forward_kinematics(h, q, RigidPose::from_translation(t));
  for (std::size_t l = 0; l < poses.size(); ++l)
    expect_pose_near(moved[l], RigidPose(poses[l].translation + t, poses[l].rotation));
}

TEST(ForwardKinematics, RevoluteQuarterTurn) {
  const HandModel h = parse_hand(single_revolute_hand().dump());
  const std::vector<double> q{kPi / 2};
  const auto poses = forward_kinematics(h, q);
  // Arm center at (10, 0, 0) in its frame swings to (0, 10, 5).
  EXPECT_LT((poses[1].apply(Vec3(10, 0, 0)) - Vec3(0, 10, 5)).norm(), 1e-9);
  EXPECT_NEAR(poses[1].rotation.angularDistance(Quat::Identity()), kPi / 2, 1e-12);
}

TEST(ForwardKinematics, PrismaticAndClamping) {
  const HandModel h = builtin_hand("parallel_gripper");
  const std::vector<double> q{10.0, 100.0};
  const auto poses = forward_kinematics(h, q);
  EXPECT_LT((poses[1].translation - Vec3(-44, 0, 10)).norm(), 1e-12);
  EXPECT_LT((poses[2].translation - Vec3(54 - 48, 0, 10)).norm(), 1e-12);
  const std::vector<double> wrong(3, 0.0);
  EXPECT_THROW(forward_kinematics(h, wrong), InputError);
}

TEST(CloseFingers, ThirtyMillimeterBox) {
  HandModel h = builtin_hand("parallel_gripper");
  // Open to a 60 mm aperture: each jaw starts 20 mm in from its 100 mm rest.
  auto& power = h.preshapes[h.preshapes[0].name == "power" ? 0 : 1];
  power.start = {20.0, 20.0};
  const Mesh box = shapes::box({30, 30, 30});
  const auto r = close_fingers(h, centered_pose(h), "power", box);
  ASSERT_FALSE(r.initial_collision);
  // Each jaw touches a whole face. Contacts on the face rim may take the adjacent face's
  // normal; all others carry the gripped face normal.
  std::map<int, int> interior;
  for (const auto& c : r.contacts) {
    EXPECT_NEAR(std::abs(c.position.x()), 15.0, kContactTolerance);
    const bool rim = std::abs(c.position.y()) > 15.0 - kContactTolerance ||
                     std::abs(c.position.z()) > 15.0 - kContactTolerance;
    if (rim) continue;
    ++interior[c.link];
    const Vec3 face = c.link == 1 ? Vec3(-Vec3::UnitX()) : Vec3(Vec3::UnitX());
    EXPECT_GT(c.normal.dot(face), std::cos(5.0 * kPi / 180.0));
  }
  EXPECT_GE(interior[1], 1);
  EXPECT_GE(interior[2], 1);
  EXPECT_NEAR(r.joints[0], 35.0, 0.2);
  EXPECT_NEAR(r.joints[1], 35.0, 0.2);
}

TEST(CloseFingers, EmptySpaceReachesLimits) {
  const HandModel h = builtin_hand("parallel_gripper");
  const Mesh far = shapes::box({10, 10, 10}, Vec3(500, 0, 0));
  const auto r = close_fingers(h, centered_pose(h), "power", far);
  EXPECT_FALSE(r.initial_collision);
  EXPECT_TRUE(r.contacts.empty());
  EXPECT_DOUBLE_EQ(r.joints[0], h.joints[0].upper);
  EXPECT_DOUBLE_EQ(r.joints[1], h.joints[1].upper);
}

TEST(CloseFingers, InitialCollision) {
  const HandModel h = builtin_hand("parallel_gripper");
  const Mesh wide = shapes::box({150, 30, 30});
  const auto r = close_fingers(h, centered_pose(h), "power", wide);
  EXPECT_TRUE(r.initial_collision);
  EXPECT_TRUE(r.contacts.empty());
}

TEST(CloseFingers, ThreeFingerOnSphere) {
  const HandModel h = builtin_hand("three_finger");
  const Mesh sphere = shapes::icosphere(25.0, 3);
  const RigidPose pose = place_gcp(h, "power", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
  const auto r = close_fingers(h, pose, "power", sphere);
  ASSERT_FALSE(r.initial_collision);
  EXPECT_GE(r.contacts.size(), 3u);
  for (const auto& c : r.contacts) EXPECT_NEAR(c.normal.norm(), 1.0, 1e-9);
}

TEST(CloseFingers, Deterministic) {
  const HandModel h = builtin_hand("parallel_gripper");
  const Mesh cyl = shapes::cylinder(12.0, 80.0, 32);
  const RigidPose pose = place_gcp(h, "power", Vec3(0, 0, 3), Vec3::UnitX(), Vec3::UnitY());
  const auto a = close_fingers(h, pose, "power", cyl);
  const auto b = close_fingers(h, pose, "power", cyl);
  ASSERT_FALSE(a.contacts.empty());
  ASSERT_EQ(a.contacts.size(), b.contacts.size());
  for (std::size_t i = 0; i < a.contacts.size(); ++i) {
    EXPECT_EQ(a.contacts[i].position, b.contacts[i].position);
    EXPECT_EQ(a.contacts[i].normal, b.contacts[i].normal);
  }
  EXPECT_EQ(a.joints, b.joints);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(CloseFingers, RigidInvarianceOfPointContacts) {
  const HandModel h = builtin_hand("parallel_gripper");
  const Mesh sphere = shapes::icosphere(20.0, 3);
  const RigidPose pose = place_gcp(h, "power", Vec3(0.3, -0.2, 0.1), Vec3::UnitZ(), Vec3::UnitX());
  const auto a = close_fingers(h, pose, "power", sphere);
  ASSERT_EQ(a.contacts.size(), 2u);
  std::mt19937_64 rng(6);
  for (int k = 0; k < 5; ++k) {
    const RigidPose g = random_pose(rng);
    const auto c = close_fingers(h, g * pose, "power", sphere.transformed(g));
    ASSERT_EQ(c.contacts.size(), a.contacts.size());
    for (std::size_t i = 0; i < a.contacts.size(); ++i) {
      EXPECT_LT((c.contacts[i].position - g.apply(a.contacts[i].position)).norm(), 1e-6);
      EXPECT_LT((c.contacts[i].normal - g.rotation * a.contacts[i].normal).norm(), 1e-9);
    }
  }
}

TEST(CloseFingers, RigidInvarianceOfFaceContacts) {
  // Line contacts are reduced to cluster representatives, which may shift within a cluster.
  const HandModel h = builtin_hand("parallel_gripper");
  const Mesh cyl = shapes::cylinder(12.0, 80.0, 32);
  const RigidPose pose = place_gcp(h, "power", Vec3(0, 0, 3), Vec3::UnitX(), Vec3::UnitY());
  const auto a = close_fingers(h, pose, "power", cyl);
  ASSERT_FALSE(a.contacts.empty());
  auto near_any = [](const Vec3& p, const std::vector<Contact>& set, const RigidPose& g) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : set) best = std::min(best, (g.apply(c.position) - p).norm());
    return best;
  };
  std::mt19937_64 rng(7);
  for (int k = 0; k < 3; ++k) {
    const RigidPose g = random_pose(rng);
    const auto c = close_fingers(h, g * pose, "power", cyl.transformed(g));
    ASSERT_FALSE(c.contacts.empty());
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(c.joints[i], a.joints[i], 1e-6);
    for (const auto& x : c.contacts) EXPECT_LE(near_any(x.position, a.contacts, g), kContactClusterRadius);
    for (const auto& x : a.contacts)
      EXPECT_LE(near_any(g.apply(x.position), c.contacts, RigidPose()), kContactClusterRadius);
  }
}

TEST(Strategies, IdsAndPreshapes) {
  for (Strategy s : kAllStrategies) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_EQ(preshape_for(s), is_precision(s) ? "precision" : "power");
  }
  EXPECT_FALSE(parse_strategy("5").has_value());
}

TEST(PlaceGcp, PutsGcpAtPoint) {
  const HandModel h = builtin_hand("parallel_gripper");
  const Vec3 p(3, 4, 5), approach = Vec3(1, 1, 0).normalized();
  const RigidPose pose = place_gcp(h, "precision", p, approach, Vec3::UnitZ());
  const RigidPose gcp = pose * h.preshape("precision").gcp;
  EXPECT_LT((gcp.translation - p).norm(), 1e-9);
  EXPECT_LT((gcp.rotation * Vec3::UnitZ() - approach).norm(), 1e-9);
  EXPECT_LT((gcp.rotation * Vec3::UnitX() - Vec3::UnitZ()).norm(), 1e-9);
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lp_oracle.hpp"
#include "skelgrasp/errors.hpp"
#include "skelgrasp/grasp_quality.hpp"
#include "skelgrasp/primitives.hpp"

using namespace skelgrasp;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

/// Contacts on a sphere of radius 50 with outward normals.
std::vector<Contact> sphere_contacts(std::mt19937_64& rng, int k) {
  std::vector<Contact> cs;
  for (int i = 0; i < k; ++i) {
    const Vec3 p = random_unit(rng);
    cs.push_back({50.0 * p, p, i});
  }
  return cs;
}

std::vector<Wrench> cross_polytope() {
  std::vector<Wrench> w;
  for (int j = 0; j < 6; ++j)
    for (double s : {1.0, -1.0}) {
      Wrench x = Wrench::Zero();
      x(j) = s;
      w.push_back(x);
    }
  return w;
}

}  // namespace

TEST(BuildWrenches, SingleContactCone) {
  const std::vector<Contact> c = {{Vec3(0, 0, 10), Vec3::UnitZ(), 0}};
  const double mu = 0.3;
  const auto set = build_wrenches(c, mu, 4, Vec3::Zero(), 10.0);
  ASSERT_EQ(set.wrenches.size(), 4u);
  for (const auto& w : set.wrenches) {
    // Forces push into the object, against the outward normal.
    EXPECT_NEAR(w(2), -1.0 / std::sqrt(1.0 + mu * mu), 1e-12);
    EXPECT_NEAR(w.head<3>().norm(), 1.0, 1e-12);
    EXPECT_NEAR(w.head<2>().norm() / -w(2), mu, 1e-12);
    const Vec3 torque = Vec3(0, 0, 10).cross(Vec3(w.head<3>())) / 10.0;
    EXPECT_LT((w.tail<3>() - torque).norm(), 1e-12);
  }
}

TEST(BuildWrenches, ContactAtCentroidHasZeroTorque) {
  const Vec3 c(1, 2, 3);
  const std::vector<Contact> contacts = {{c, Vec3(1, 1, 0).normalized(), 0}};
  for (const auto& w : build_wrenches(contacts, 0.5, 8, c, 7.0).wrenches) EXPECT_EQ(w.tail<3>(), Vec3::Zero());
}

TEST(BuildWrenches, MinimumEdgesAndErrors) {
  const std::vector<Contact> two = {{Vec3::Zero(), Vec3::UnitX(), 0}, {Vec3::UnitX(), -Vec3::UnitX(), 1}};
  EXPECT_EQ(build_wrenches(two, 0.3, 3, Vec3::Zero(), 1.0).wrenches.size(), 6u);
  EXPECT_THROW(build_wrenches({}, 0.3, 8, Vec3::Zero(), 1.0), InputError);
  EXPECT_THROW(build_wrenches(two, 0.0, 8, Vec3::Zero(), 1.0), InputError);
  EXPECT_THROW(build_wrenches(two, 0.3, 2, Vec3::Zero(), 1.0), InputError);
  EXPECT_THROW(build_wrenches(two, 0.3, 8, Vec3::Zero(), 0.0), InputError);
  const std::vector<Contact> zero = {{Vec3::Zero(), Vec3::Zero(), 0}};
  EXPECT_THROW(build_wrenches(zero, 0.3, 8, Vec3::Zero(), 1.0), InputError);
}

TEST(Evaluate, SingleContactIsNotForceClosure) {
  std::mt19937_64 rng(1);
  for (double mu : {0.2, 0.5, 1.0}) {
    const auto set = build_wrenches(sphere_contacts(rng, 1), mu, 8, Vec3::Zero(), 50.0);
    const auto q = evaluate(set);
    EXPECT_FALSE(q.force_closure);
    EXPECT_EQ(q.epsilon, 0.0);
    EXPECT_FALSE(oracle::force_closure_oracle_lp(set.wrenches));
  }
}

TEST(Evaluate, AntipodalSphereAgreesWithOracle) {
  // Two point contacts cannot resist a torque about the line through them: every wrench
  // has zero moment about that axis, so both methods report no force closure.
  const std::vector<Contact> c = {{Vec3(20, 0, 0), Vec3::UnitX(), 0}, {Vec3(-20, 0, 0), -Vec3::UnitX(), 1}};
  const auto set = build_wrenches(c, 0.3, 8, Vec3::Zero(), 20.0);
  for (const auto& w : set.wrenches) EXPECT_NEAR(w(3), 0.0, 1e-12);
  EXPECT_EQ(evaluate(set).force_closure, oracle::force_closure_oracle_lp(set.wrenches));
  EXPECT_FALSE(evaluate(set).force_closure);

  // A third contact off the axis restores closure.
  auto three = c;
  three.push_back({Vec3(0, 20, 0), Vec3::UnitY(), 2});
  three.push_back({Vec3(0, -20, 0), -Vec3::UnitY(), 3});
  const auto set4 = build_wrenches(three, 0.3, 8, Vec3::Zero(), 20.0);
  EXPECT_TRUE(evaluate(set4).force_closure);
  EXPECT_TRUE(oracle::force_closure_oracle_lp(set4.wrenches));
}

TEST(Evaluate, SimplexOfSevenWrenches) {
  // Vertices of a 6-simplex centered on the origin.
  std::vector<Wrench> w;
  for (int i = 0; i < 6; ++i) {
    Wrench e = Wrench::Zero();
    e(i) = 1.0;
    w.push_back(e);
  }
  Wrench last = Wrench::Constant(-1.0);
  w.push_back(last);
  const auto q = evaluate(w);
  EXPECT_TRUE(q.force_closure);
  EXPECT_TRUE(oracle::force_closure_oracle_lp(w));
  // Facet opposite e1 lies on -6 x1 + x2 + ... + x6 = 1, the closest one.
  EXPECT_NEAR(q.epsilon, 1.0 / std::sqrt(41.0), 1e-9);

  for (auto& x : w) x += Wrench::Constant(1.5);
  EXPECT_FALSE(evaluate(w).force_closure);
  EXPECT_FALSE(oracle::force_closure_oracle_lp(w));
}

TEST(Evaluate, CrossPolytopeEpsilon) {
  const auto q = evaluate(cross_polytope());
  EXPECT_TRUE(q.force_closure);
  EXPECT_NEAR(q.epsilon, 1.0 / std::sqrt(6.0), 1e-12);
}

TEST(Evaluate, DegenerateSetsAreNotForceClosure) {
  auto w = cross_polytope();
  w.resize(10);  // drops both directions of the sixth axis
  EXPECT_FALSE(evaluate(w).force_closure);
  EXPECT_FALSE(evaluate(std::vector<Wrench>{}).force_closure);
}

TEST(Evaluate, AgreesWithLpOracle) {
  std::mt19937_64 rng(2024);
  int disagreements = 0, closures = 0, cases = 0;
  for (int k = 2; k <= 5; ++k)
    for (double mu : {0.2, 0.3, 0.5})
      for (int m : {4, 8})
        for (int rep = 0; rep < 42; ++rep) {
          if (cases == 1000) break;
          ++cases;
          const auto set = build_wrenches(sphere_contacts(rng, k), mu, m, Vec3::Zero(), 50.0);
          const auto q = evaluate(set);
          const bool lp = oracle::force_closure_oracle_lp(set.wrenches);
          closures += lp;
          if (q.force_closure != lp) {
            ++disagreements;
            ADD_FAILURE() << "k=" << k << " mu=" << mu << " m=" << m << " eps=" << q.epsilon << " lp=" << lp;
          }
          EXPECT_EQ(q.force_closure, q.epsilon > kEpsilonTolerance);
          EXPECT_GE(q.epsilon, 0.0);
        }
  EXPECT_EQ(cases, 1000);
  EXPECT_EQ(disagreements, 0);
  EXPECT_GT(closures, 100);
  EXPECT_LT(closures, 900);
}

TEST(Evaluate, EpsilonMonotoneUnderSuperset) {
  std::mt19937_64 rng(77);
  int strict = 0;
  for (int i = 0; i < 100; ++i) {
    const auto cs = sphere_contacts(rng, 3 + i % 3);
    const auto base = build_wrenches(cs, 0.4, 8, Vec3::Zero(), 50.0);
    auto more = cs;
    more.push_back(sphere_contacts(rng, 1)[0]);
    const auto bigger = build_wrenches(more, 0.4, 8, Vec3::Zero(), 50.0);
    const double e0 = evaluate(base).epsilon, e1 = evaluate(bigger).epsilon;
    EXPECT_LE(e0, e1 + 1e-12) << "case " << i;
    strict += e1 > e0 + 1e-9;
  }
  EXPECT_GT(strict, 10);
}

TEST(Evaluate, BlockRotationInvariance) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto set = build_wrenches(sphere_contacts(rng, 4), 0.5, 8, Vec3::Zero(), 50.0);
    const auto q = evaluate(set);
    const Mat3 r = Eigen::AngleAxisd(1.0 + i, random_unit(rng)).toRotationMatrix();
    std::vector<Wrench> rotated;
    for (const auto& w : set.wrenches) {
      Wrench x;
      x.head<3>() = r * w.head<3>();
      x.tail<3>() = r * w.tail<3>();
      rotated.push_back(x);
    }
    const auto qr = evaluate(rotated);
    EXPECT_EQ(qr.force_closure, q.force_closure);
    if (q.force_closure) {
      EXPECT_LT(std::abs(qr.epsilon - q.epsilon) / q.epsilon, 1e-6);
    }
  }
}

TEST(BuildWrenches, ScaleLeavesWrenchesUnchanged) {
  std::mt19937_64 rng(9);
  const auto cs = sphere_contacts(rng, 3);
  const auto base = build_wrenches(cs, 0.3, 8, Vec3(1, 2, 3), 50.0);
  // Powers of two scale exactly; other factors agree to rounding.
  for (double c : {0.25, 4.0, 3.0}) {
    auto scaled = cs;
    for (auto& x : scaled) x.position *= c;
    const auto s = build_wrenches(scaled, 0.3, 8, Vec3(c, 2 * c, 3 * c), 50.0 * c);
    for (std::size_t i = 0; i < s.wrenches.size(); ++i) {
      if (c != 3.0) {
        EXPECT_EQ(s.wrenches[i], base.wrenches[i]);
      } else {
        EXPECT_LT((s.wrenches[i] - base.wrenches[i]).norm(), 1e-14);
      }
    }
  }
}

TEST(HullContacts, DropsInteriorCoplanarContacts) {
  std::vector<Contact> face;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4; ++j) face.push_back({Vec3(-10.0 + 5 * i, -10.0 + 5 * j, 10), Vec3::UnitZ(), 1});
  face.push_back({Vec3(0, 0, -10), -Vec3::UnitZ(), 2});
  const auto reduced = hull_contacts(face);
  // Four corners, eight edge midpoints are collinear and dropped, plus the lone contact.
  EXPECT_LE(reduced.size(), 4u + 12u + 1u);
  EXPECT_GE(reduced.size(), 5u);
  for (const auto& c : reduced)
    if (c.normal.z() > 0) {
      EXPECT_TRUE(std::abs(c.position.x()) == 10.0 || std::abs(c.position.y()) == 10.0);
    }

  const auto full = build_wrenches(face, 0.3, 8, Vec3::Zero(), 20.0);
  const auto small = build_wrenches(reduced, 0.3, 8, Vec3::Zero(), 20.0);
  EXPECT_EQ(evaluate(full).force_closure, evaluate(small).force_closure);
  EXPECT_NEAR(evaluate(full).epsilon, evaluate(small).epsilon, 1e-9);
}

TEST(GraspQuality, BoxSqueezeIsForceClosure) {
  const Mesh box = shapes::box({30, 30, 30});
  std::vector<Contact> c;
  for (double s : {-1.0, 1.0})
    for (double y : {-8.0, 8.0})
      for (double z : {-8.0, 8.0}) c.push_back({Vec3(15 * s, y, z), Vec3(s, 0, 0), s > 0 ? 2 : 1});
  const auto q = grasp_quality(c, box);
  EXPECT_TRUE(q.force_closure);
  EXPECT_GT(q.epsilon, 0.0);
  EXPECT_NEAR(torque_scale(box, Vec3::Zero()), 15.0 * std::sqrt(3.0), 1e-9);
}

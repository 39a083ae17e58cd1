#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "skelgrasp/local_shape.hpp"
#include "skelgrasp/primitives.hpp"

using namespace skelgrasp;

namespace {

Skeleton chain(const std::vector<Vec3>& points) {
  Skeleton s;
  for (const auto& p : points) s.vertices.push_back({p, {}, VertexKind::Connecting});
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    s.edges.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i + 1));
  classify_vertices(s);
  return s;
}

Skeleton straight_chain(int n, double spacing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(i * spacing, 0.0, 0.0);
  return chain(pts);
}

std::vector<Vec3> circle_points(double r, int n, double z = 0.0) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    pts.emplace_back(r * std::cos(a), r * std::sin(a), z);
  }
  return pts;
}

std::vector<Vec3> filled_rectangle(double w, double h, int nx, int ny) {
  std::vector<Vec3> pts;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      pts.emplace_back(-w / 2 + w * (i + 0.5) / nx, -h / 2 + h * (j + 0.5) / ny, 0.0);
  return pts;
}

}  // namespace

TEST(Curvature, CollinearIsZero) {
  EXPECT_EQ(curvature(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)), 0.0);
  EXPECT_EQ(curvature(Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(3, 3, 3)), 0.0);
}

TEST(Curvature, CircleRadius50) {
  std::vector<Vec3> pts;
  for (int deg = 0; deg <= 180; deg += 5) {
    const double a = deg * kPi / 180.0;
    pts.emplace_back(50.0 * std::cos(a), 50.0 * std::sin(a), 0.0);
  }
  const Skeleton s = chain(pts);
  for (std::int32_t v = 1; v + 1 < static_cast<std::int32_t>(s.size()); ++v) {
    const double k = curvature(s, v);
    EXPECT_LT(std::abs(k - 0.02) / 0.02, 0.02) << "vertex " << v << " kappa " << k;
  }
}

TEST(Curvature, NonUniformSpacingOnCircle) {
  const double r = 20.0;
  auto at = [&](double deg) {
    const double a = deg * kPi / 180.0;
    return Vec3(r * std::cos(a), r * std::sin(a), 0.0);
  };
  EXPECT_NEAR(curvature(at(0), at(4), at(12)), 1.0 / r, 0.02 / r);
}

TEST(Curvature, EndpointIsZero) {
  const Skeleton s = straight_chain(5, 1.0);
  EXPECT_EQ(curvature(s, 0), 0.0);
  EXPECT_EQ(curvature(s, 4), 0.0);
}

TEST(GraspingInterval, EndpointHasOnePath) {
  const Skeleton s = straight_chain(10, 1.0);
  const auto gi = grasping_interval(s, 0, 5.0);
  ASSERT_EQ(gi.paths.size(), 1u);
  EXPECT_NEAR(gi.paths[0].length, 5.0, 1e-12);
}

TEST(GraspingInterval, ConnectingMidChain) {
  const Skeleton s = straight_chain(21, 1.0);
  const auto gi = grasping_interval(s, 10, 5.0);
  ASSERT_EQ(gi.paths.size(), 2u);
  for (const auto& p : gi.paths) {
    EXPECT_EQ(p.vertices.size(), 6u);
    EXPECT_EQ(p.vertices.front(), 10);
    EXPECT_NEAR(p.length, 5.0, 1e-12);
  }
  EXPECT_EQ(gi.vertices().size(), 11u);
  EXPECT_NEAR(gi.shortest(), 5.0, 1e-12);
}

TEST(GraspingInterval, StopsAtDelimiter) {
  const Skeleton s = straight_chain(6, 1.0);
  const auto gi = grasping_interval(s, 2, 50.0);
  ASSERT_EQ(gi.paths.size(), 2u);
  EXPECT_NEAR(gi.paths[0].length + gi.paths[1].length, 5.0, 1e-12);
}

TEST(GraspingInterval, CutAtElbow) {
  // Straight for 3 mm, then a right angle.
  std::vector<Vec3> pts;
  for (int i = 0; i <= 3; ++i) pts.emplace_back(i, 0, 0);
  for (int i = 1; i <= 6; ++i) pts.emplace_back(3, i, 0);
  const Skeleton s = chain(pts);
  ASSERT_GT(curvature(s, 3), 0.2);
  const auto gi = grasping_interval(s, 0, 20.0, 0.2);
  ASSERT_EQ(gi.paths.size(), 1u);
  EXPECT_EQ(gi.paths[0].vertices.back(), 3);
  EXPECT_NEAR(gi.paths[0].length, 3.0, 1e-12);
}

TEST(GraspingInterval, LengthBoundedByOneEdge) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> step(0.2, 3.0);
  std::vector<Vec3> pts{Vec3::Zero()};
  for (int i = 0; i < 60; ++i) pts.push_back(pts.back() + Vec3(step(rng), 0, 0));
  const Skeleton s = chain(pts);
  double longest_edge = 0.0;
  for (const auto& e : s.edges) longest_edge = std::max(longest_edge, s.edge_length(e));
  for (double max_len : {1.0, 4.0, 10.0}) {
    for (std::int32_t v = 0; v < static_cast<std::int32_t>(s.size()); ++v) {
      for (const auto& p : grasping_interval(s, v, max_len).paths) EXPECT_LE(p.length, max_len + longest_edge);
    }
  }
}

TEST(PlanarShape, CircleIsRound) {
  const double r = 10.0;
  const auto pts = circle_points(r, 720);
  const auto shape = planar_shape(pts, Vec3::Zero(), Vec3::UnitZ());
  EXPECT_EQ(shape.shape, ShapeKind::Round);
  EXPECT_LT(shape.ratio(), 1.2);
  EXPECT_NEAR(shape.lambda2, r * r / 2.0, 0.05 * r * r / 2.0);
  EXPECT_GE(shape.lambda1, shape.lambda2);
  EXPECT_NEAR(shape.ev1.dot(shape.ev2), 0.0, 1e-6);
  EXPECT_NEAR(shape.ev1.dot(shape.normal), 0.0, 1e-9);
}

TEST(PlanarShape, CircleConstantByBruteForce) {
  // Independent check of r^2 / 2: random points on the circle, plain sample variance.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  double sx = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sx += std::pow(10.0 * std::cos(u(rng)), 2);
  EXPECT_NEAR(sx / n, 50.0, 0.5);
}

TEST(PlanarShape, FilledRectangleRatio16) {
  const auto pts = filled_rectangle(40.0, 10.0, 200, 50);
  const auto shape = planar_shape(pts, Vec3::Zero(), Vec3::UnitZ());
  EXPECT_EQ(shape.shape, ShapeKind::Rectangular);
  EXPECT_NEAR(shape.ratio(), 16.0, 0.01);
  EXPECT_NEAR(std::abs(shape.ev1.dot(Vec3::UnitX())), 1.0, 1e-9);
}

TEST(PlanarShape, RatioAtThresholdIsRectangular) {
  // Four points at (+-a, 0) and (0, +-b) give lambda1 / lambda2 = a^2 / b^2.
  const double b = 1.0, a = std::sqrt(1.5);
  const std::vector<Vec3> pts = {{a, 0, 0}, {-a, 0, 0}, {0, b, 0}, {0, -b, 0}};
  const auto shape = planar_shape(pts, Vec3::Zero(), Vec3::UnitZ(), 1.5);
  ASSERT_NEAR(shape.ratio(), 1.5, 1e-12);
  EXPECT_EQ(planar_shape(pts, Vec3::Zero(), Vec3::UnitZ(), shape.ratio()).shape, ShapeKind::Rectangular);
  EXPECT_EQ(planar_shape(pts, Vec3::Zero(), Vec3::UnitZ(), std::nextafter(shape.ratio(), 10.0)).shape,
            ShapeKind::Round);
}

TEST(PlanarShape, ScaleInvariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(7.0 * n(rng), 2.0 * n(rng), n(rng));
  const auto base = planar_shape(pts, Vec3::Zero(), Vec3::UnitZ());
  for (double c : {0.01, 3.0, 1000.0}) {
    std::vector<Vec3> scaled;
    for (const auto& p : pts) scaled.push_back(c * p);
    const auto s = planar_shape(scaled, Vec3::Zero(), Vec3::UnitZ());
    EXPECT_LT(std::abs(s.ratio() - base.ratio()) / base.ratio(), 1e-9) << "scale " << c;
    EXPECT_LT(std::abs(s.lambda1 - c * c * base.lambda1) / (c * c * base.lambda1), 1e-9);
    EXPECT_EQ(s.shape, base.shape);
  }
}

TEST(PlanarShape, RotationInvariance) {
  const auto pts = filled_rectangle(30.0, 12.0, 30, 12);
  const auto base = planar_shape(pts, Vec3::Zero(), Vec3::UnitZ());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const Mat3 r = Quat(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
    const Vec3 t(n(rng) * 50, n(rng) * 50, n(rng) * 50);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(r * p + t);
    const auto s = planar_shape(moved, t, r * Vec3::UnitZ());
    EXPECT_LT(std::abs(s.lambda1 - base.lambda1) / base.lambda1, 1e-6);
    EXPECT_LT(std::abs(s.lambda2 - base.lambda2) / base.lambda2, 1e-6);
    EXPECT_EQ(s.shape, base.shape);
    EXPECT_NEAR(std::abs(s.ev1.dot(r * base.ev1)), 1.0, 1e-6);
  }
}

TEST(PlanarShape, EigenvectorSignConvention) {
  const auto pts = filled_rectangle(40.0, 10.0, 20, 5);
  for (const Vec3& n : {Vec3(0, 0, 1), Vec3(0, 0, -1)}) {
    const auto s = planar_shape(pts, Vec3::Zero(), n);
    EXPECT_GE(s.ev1.x(), 0.0);
  }
  const Mat3 r = Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()).toRotationMatrix();
  std::vector<Vec3> turned;
  for (const auto& p : pts) turned.push_back(r * p);
  const auto s = planar_shape(turned, Vec3::Zero(), Vec3::UnitZ());
  EXPECT_NEAR(s.ev1.x(), 0.0, 1e-9);
  EXPECT_GT(s.ev1.y(), 0.0);
}

TEST(PlanarShape, Degenerate) {
  const std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(planar_shape(two, Vec3::Zero(), Vec3::UnitZ()), DegenerateShapeError);
  const std::vector<Vec3> same = {{1, 1, 0}, {1, 1, 5}, {1, 1, -3}};
  EXPECT_THROW(planar_shape(same, Vec3::Zero(), Vec3::UnitZ()), DegenerateShapeError);
  EXPECT_THROW(planar_shape(circle_points(1, 8), Vec3::Zero(), Vec3::Zero()), DegenerateShapeError);
}

TEST(SurfaceShape, FixtureCrossSections) {
  const Mesh cyl = shapes::cylinder(10.0, 100.0, 48);
  const Skeleton cs = skeletonize(cyl);
  const Mesh flat = shapes::box({40, 10, 120}, Vec3::Zero(), 2.0);
  const Skeleton fs = skeletonize(flat);
  for (const auto* pair : {&cs, &fs}) {
    const Skeleton& s = *pair;
    const Mesh& m = pair == &cs ? cyl : flat;
    // Vertex closest to the middle of the long axis.
    std::int32_t mid = 0;
    for (std::int32_t v = 0; v < static_cast<std::int32_t>(s.size()); ++v)
      if (s.vertices[v].position.norm() < s.vertices[mid].position.norm()) mid = v;
    ASSERT_EQ(s.vertices[mid].kind, VertexKind::Connecting);
    const auto gi = grasping_interval(s, mid, 10.0);
    const auto shape = surface_shape(m, s, mid, gi);
    EXPECT_NEAR(std::abs(shape.normal.z()), 1.0, 0.05);
    if (pair == &cs) {
      EXPECT_EQ(shape.shape, ShapeKind::Round) << shape.ratio();
      EXPECT_NEAR(shape.lambda2, 50.0, 2.5);
    } else {
      EXPECT_EQ(shape.shape, ShapeKind::Rectangular) << shape.ratio();
      EXPECT_NEAR(std::abs(shape.ev1.x()), 1.0, 0.05);
    }
  }
}

TEST(SurfaceShape, GraspingPlaneExport) {
  const auto pts = circle_points(5.0, 12);
  const auto shape = planar_shape(pts, Vec3::Zero(), Vec3::UnitZ());
  std::ostringstream out;
  write_grasping_plane(shape, pts, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("shape round"), std::string::npos);
  EXPECT_NE(text.find("points 12"), std::string::npos);
}

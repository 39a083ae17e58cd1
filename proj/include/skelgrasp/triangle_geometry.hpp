#pragma once

#include <array>

#include "skelgrasp/geometry.hpp"

namespace skelgrasp {

using TriangleCorners = std::array<Vec3, 3>;

/// Closest point to `p` on the (closed) triangle abc.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct SegmentPair {
  Vec3 on_first;
  Vec3 on_second;
};

/// Closest points between segments [p1,q1] and [p2,q2].
SegmentPair closest_points_on_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2);

/// Intersection of segment [p,q] with triangle abc; writes the hit point.
bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c,
                           Vec3* hit = nullptr);

struct TrianglePairDistance {
  double distance = 0.0;
  Vec3 on_first = Vec3::Zero();
  Vec3 on_second = Vec3::Zero();
};

/// Exact Euclidean distance between two solid triangles (0 when they intersect).
TrianglePairDistance triangle_distance(const TriangleCorners& t1, const TriangleCorners& t2);

}  // namespace skelgrasp

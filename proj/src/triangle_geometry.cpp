#include "skelgrasp/triangle_geometry.hpp"

#include <algorithm>
#include <limits>

namespace skelgrasp {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

SegmentPair closest_points_on_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  constexpr double kEps = 1e-300;
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;

  if (a <= kEps && e <= kEps) return {p1, p2};
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 1e-14 * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return {p1 + d1 * s, p2 + d2 * t};
}

bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c,
                           Vec3* hit) {
  const Vec3 dir = q - p;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  const double scale = e1.norm() * e2.norm() * dir.norm();
  if (std::abs(det) <= 1e-12 * scale) return false;  // parallel; handled by distance terms
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = s.cross(e1);
  const double v = inv * dir.dot(qv);
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = inv * e2.dot(qv);
  if (t < 0.0 || t > 1.0) return false;
  if (hit != nullptr) *hit = p + t * dir;
  return true;
}

TrianglePairDistance triangle_distance(const TriangleCorners& t1, const TriangleCorners& t2) {
  TrianglePairDistance best;
  Vec3 hit;
  for (int i = 0; i < 3; ++i) {
    if (segment_hits_triangle(t1[i], t1[(i + 1) % 3], t2[0], t2[1], t2[2], &hit) ||
        segment_hits_triangle(t2[i], t2[(i + 1) % 3], t1[0], t1[1], t1[2], &hit)) {
      best.distance = 0.0;
      best.on_first = hit;
      best.on_second = hit;
      return best;
    }
  }

  double best_sq = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec3& x, const Vec3& y) {
    const double d = (x - y).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best.on_first = x;
      best.on_second = y;
    }
  };
  for (int i = 0; i < 3; ++i) {
    consider(t1[i], closest_point_on_triangle(t1[i], t2[0], t2[1], t2[2]));
    consider(closest_point_on_triangle(t2[i], t1[0], t1[1], t1[2]), t2[i]);
    for (int j = 0; j < 3; ++j) {
      const auto sp = closest_points_on_segments(t1[i], t1[(i + 1) % 3], t2[j], t2[(j + 1) % 3]);
      consider(sp.on_first, sp.on_second);
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

}  // namespace skelgrasp

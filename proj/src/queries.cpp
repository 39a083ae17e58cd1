#include "skelgrasp/queries.hpp"

#include <algorithm>
#include <tuple>

#include "skelgrasp/bvh.hpp"
#include "skelgrasp/triangle_geometry.hpp"

namespace skelgrasp {

namespace {

double box_distance_sq(const Aabb& b, const Vec3& p) {
  const Vec3 d = (b.min - p).cwiseMax(p - b.max).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

// Conservative box of `b` after mapping through `pose`.
Aabb transform_box(const Aabb& b, const RigidPose& pose, const Mat3& abs_rot) {
  const Vec3 c = pose.apply(b.center());
  const Vec3 e = abs_rot * (0.5 * b.extent());
  return {c - e, c + e};
}

bool ray_hits_box(const Vec3& origin, const Vec3& inv_dir, const Aabb& b) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    double t1 = (b.min[k] - origin[k]) * inv_dir[k];
    double t2 = (b.max[k] - origin[k]) * inv_dir[k];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  return tmin <= tmax;
}

bool ray_hits_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-14 * e1.norm() * e2.norm()) return false;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  const double v = inv * dir.dot(q);
  if (v < 0.0 || u + v > 1.0) return false;
  return inv * e2.dot(q) > 0.0;
}

int ray_parity(const Mesh& mesh, const Vec3& origin, const Vec3& dir) {
  const auto& nodes = mesh.bvh().nodes();
  if (nodes.empty()) return 0;
  const Vec3 inv_dir = dir.cwiseInverse();
  int crossings = 0;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const auto& node = nodes[stack.back()];
    stack.pop_back();
    if (!ray_hits_box(origin, inv_dir, node.box)) continue;
    if (node.leaf()) {
      for (auto t : mesh.bvh().leaf_triangles(node)) {
        const auto c = mesh.corners(t);
        if (ray_hits_triangle(origin, dir, c[0], c[1], c[2])) ++crossings;
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return crossings & 1;
}

// Calls visit(ta, tb, corners_b_in_a) for each triangle pair whose boxes are within tol.
// Stops early when visit returns true; returns whether it did.
template <typename Visit>
bool for_each_near_pair(const Mesh& a, const RigidPose& pose_a, const Mesh& b, const RigidPose& pose_b,
                        double tol, Visit&& visit) {
  const auto& na = a.bvh().nodes();
  const auto& nb = b.bvh().nodes();
  if (na.empty() || nb.empty()) return false;
  const RigidPose b_in_a = pose_a.inverse() * pose_b;
  const Mat3 abs_rot = b_in_a.matrix().cwiseAbs();

  std::vector<std::pair<std::int32_t, std::int32_t>> stack{{0, 0}};
  auto corners_b = [&](std::int32_t t) {
    const auto c = b.corners(t);
    return TriangleCorners{b_in_a.apply(c[0]), b_in_a.apply(c[1]), b_in_a.apply(c[2])};
  };

  while (!stack.empty()) {
    const auto [ia, ib] = stack.back();
    stack.pop_back();
    const auto& A = na[ia];
    const auto& B = nb[ib];
    if (!A.box.inflated(tol).overlaps(transform_box(B.box, b_in_a, abs_rot))) continue;
    if (A.leaf() && B.leaf()) {
      for (auto ta : a.bvh().leaf_triangles(A)) {
        for (auto tb : b.bvh().leaf_triangles(B)) {
          if (visit(ta, tb, corners_b(tb))) return true;
        }
      }
      continue;
    }
    const bool split_a = !A.leaf() && (B.leaf() || A.box.extent().norm() >= B.box.extent().norm());
    if (split_a) {
      stack.emplace_back(A.right, ib);
      stack.emplace_back(A.left, ib);
    } else {
      stack.emplace_back(ia, B.right);
      stack.emplace_back(ia, B.left);
    }
  }
  return false;
}

}  // namespace

ClosestPoint closest_point(const Mesh& mesh, const Vec3& p) {
  ClosestPoint best;
  const auto& nodes = mesh.bvh().nodes();
  if (nodes.empty()) return best;
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const auto& node = nodes[stack.back()];
    stack.pop_back();
    if (box_distance_sq(node.box, p) > best_sq) continue;
    if (node.leaf()) {
      for (auto t : mesh.bvh().leaf_triangles(node)) {
        const auto c = mesh.corners(t);
        const Vec3 q = closest_point_on_triangle(p, c[0], c[1], c[2]);
        const double d = (q - p).squaredNorm();
        if (d < best_sq) {
          best_sq = d;
          best.point = q;
          best.triangle = t;
        }
      }
    } else {
      const double dl = box_distance_sq(nodes[node.left].box, p);
      const double dr = box_distance_sq(nodes[node.right].box, p);
      if (dl < dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

bool contains(const Mesh& mesh, const Vec3& p) {
  if (mesh.empty() || !mesh.bounds().inflated(1e-9).overlaps(Aabb{p, p})) return false;
  static const std::array<Vec3, 3> dirs = {Vec3(0.5773, 0.5814, 0.5734).normalized(),
                                           Vec3(-0.6211, 0.3347, -0.7085).normalized(),
                                           Vec3(0.2113, -0.8771, 0.4311).normalized()};
  int votes = 0;
  for (const auto& d : dirs) votes += ray_parity(mesh, p, d);
  return votes >= 2;
}

bool surfaces_within(const Mesh& a, const RigidPose& pose_a, const Mesh& b, const RigidPose& pose_b,
                     double tol) {
  return for_each_near_pair(a, pose_a, b, pose_b, tol,
                            [&](std::int32_t ta, std::int32_t, const TriangleCorners& cb) {
                              return triangle_distance(a.corners(ta), cb).distance <= tol;
                            });
}

bool collide(const Mesh& a, const RigidPose& pose_a, const Mesh& b, const RigidPose& pose_b, double tol) {
  if (a.empty() || b.empty()) return false;
  if (surfaces_within(a, pose_a, b, pose_b, tol)) return true;
  // Disjoint surfaces: either nested or apart. One vertex decides.
  if (b.watertight() && contains(b, pose_b.inverse().apply(pose_a.apply(a.vertex(0))))) return true;
  if (a.watertight() && contains(a, pose_a.inverse().apply(pose_b.apply(b.vertex(0))))) return true;
  return false;
}

std::vector<Contact> extract_contacts(const Mesh& link, const RigidPose& link_pose, const Mesh& object,
                                      int link_id, double tol, double cluster_radius) {
  struct Candidate {
    double distance;
    Vec3 position;
    Vec3 normal;
    std::int32_t triangle;
  };
  // The contact normal is that of the face in a face-to-feature contact: the object
  // face if it is touched in its interior, else the link face if that is. Edge-to-edge
  // contacts keep the object face normal.
  auto interior = [](const Vec3& q, const TriangleCorners& t) {
    const Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]);
    const double a2 = n.squaredNorm();
    if (a2 <= 0.0) return false;
    constexpr double margin = 1e-6;
    for (int i = 0; i < 3; ++i) {
      const Vec3& u = t[(i + 1) % 3];
      const Vec3& w = t[(i + 2) % 3];
      if ((w - u).cross(q - u).dot(n) / a2 <= margin) return false;
    }
    return true;
  };
  std::vector<Candidate> candidates;
  for_each_near_pair(object, RigidPose::identity(), link, link_pose, tol,
                     [&](std::int32_t to, std::int32_t, const TriangleCorners& cl) {
                       const auto co = object.corners(to);
                       const auto d = triangle_distance(co, cl);
                       if (d.distance > tol) return false;
                       const Vec3& object_normal = object.normal(to);
                       Vec3 link_normal = (cl[1] - cl[0]).cross(cl[2] - cl[0]);
                       link_normal = link_normal.squaredNorm() > 0.0 ? Vec3(-link_normal.normalized()) : object_normal;
                       auto normal_at = [&](const Vec3& q, const Vec3& p) {
                         return interior(q, co) || !interior(p, cl) ? object_normal : link_normal;
                       };
                       candidates.push_back({d.distance, d.on_first, normal_at(d.on_first, d.on_second), to});
                       // Corners spread candidates over line and patch contacts.
                       for (const auto& p : cl) {
                         const Vec3 q = closest_point_on_triangle(p, co[0], co[1], co[2]);
                         const double dq = (q - p).norm();
                         if (dq <= tol) candidates.push_back({dq, q, object_normal, to});
                       }
                       for (const auto& q : co) {
                         const Vec3 p = closest_point_on_triangle(q, cl[0], cl[1], cl[2]);
                         const double dq = (q - p).norm();
                         if (dq <= tol) candidates.push_back({dq, q, normal_at(q, p), to});
                       }
                       return false;
                     });

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(x.distance, x.position.x(), x.position.y(), x.position.z(), x.triangle) <
           std::tie(y.distance, y.position.x(), y.position.y(), y.position.z(), y.triangle);
  });
  std::vector<Contact> contacts;
  const double r_sq = cluster_radius * cluster_radius;
  for (const auto& c : candidates) {
    const bool absorbed = std::any_of(contacts.begin(), contacts.end(), [&](const Contact& k) {
      return (k.position - c.position).squaredNorm() <= r_sq;
    });
    if (absorbed) continue;
    contacts.push_back({c.position, c.normal, link_id});
  }
  return contacts;
}

}  // namespace skelgrasp

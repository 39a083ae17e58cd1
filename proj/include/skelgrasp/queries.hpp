#pragma once

#include <vector>

#include "skelgrasp/geometry.hpp"
#include "skelgrasp/mesh.hpp"

namespace skelgrasp {

/// Two surfaces closer than this count as touching (mm).
inline constexpr double kContactTolerance = 0.5;
/// Contacts of one link are kept at least this far apart (mm).
inline constexpr double kContactClusterRadius = 5.0;

struct Contact {
  Vec3 position = Vec3::Zero();  ///< on the object surface, mm
  Vec3 normal = Vec3::UnitZ();   ///< unit, pointing out of the object
  int link = -1;                 ///< index of the hand link making contact
};

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  std::int32_t triangle = -1;
  double distance = std::numeric_limits<double>::infinity();
};

ClosestPoint closest_point(const Mesh& mesh, const Vec3& p);

/// Point-in-solid test for closed meshes (majority vote over three ray parities).
bool contains(const Mesh& mesh, const Vec3& p);

/// True iff some triangle of `a` and some triangle of `b` are within `tol` (BVH accelerated).
bool surfaces_within(const Mesh& a, const RigidPose& pose_a, const Mesh& b, const RigidPose& pose_b,
                     double tol = kContactTolerance);

/// Surface proximity, or one closed mesh lying entirely inside the other.
bool collide(const Mesh& a, const RigidPose& pose_a, const Mesh& b, const RigidPose& pose_b,
             double tol = kContactTolerance);

/// Contacts between a posed link mesh and an object mesh given in world coordinates.
/// Candidates come from every triangle pair within `tol`; they are clustered greedily
/// closest-first so that kept contacts are more than `cluster_radius` apart. A contact
/// takes the object face normal unless it lies on an object edge or vertex inside a
/// link face; then it takes that link face's reversed normal.
std::vector<Contact> extract_contacts(const Mesh& link, const RigidPose& link_pose, const Mesh& object,
                                      int link_id = -1, double tol = kContactTolerance,
                                      double cluster_radius = kContactClusterRadius);

}  // namespace skelgrasp

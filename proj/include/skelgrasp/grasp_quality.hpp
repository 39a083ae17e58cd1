#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "skelgrasp/mesh.hpp"
#include "skelgrasp/queries.hpp"

namespace skelgrasp {

using Wrench = Eigen::Matrix<double, 6, 1>;

constexpr double kDefaultFriction = 0.3;
constexpr int kDefaultConeEdges = 8;
/// Origin distances at or below this count as on the hull boundary.
constexpr double kEpsilonTolerance = 1e-6;

struct WrenchSet {
  std::vector<Wrench> wrenches;  ///< force part unit length, torque part divided by rho
  double mu = kDefaultFriction;
  int m = kDefaultConeEdges;
  Vec3 centroid = Vec3::Zero();
  double rho = 1.0;
};

struct QualityResult {
  bool force_closure = false;
  double epsilon = 0.0;
};

/// Torque scale: largest distance from `centroid` to the object surface.
double torque_scale(const Mesh& object, const Vec3& centroid);

/// Discretizes each contact's Coulomb cone, pointing into the object, into `m` unit edges.
/// Throws InputError for an empty contact list, mu <= 0, m < 3, rho <= 0 or a zero normal.
WrenchSet build_wrenches(std::span<const Contact> contacts, double mu, int m, const Vec3& centroid, double rho);

/// Origin containment and distance to the boundary of the 6-D convex hull of the wrenches.
QualityResult evaluate(std::span<const Wrench> wrenches);
inline QualityResult evaluate(const WrenchSet& set) { return evaluate(set.wrenches); }

/// Drops contacts lying inside the convex hull of coplanar contacts with the same normal;
/// the wrench hull is unchanged.
std::vector<Contact> hull_contacts(std::span<const Contact> contacts);

/// Contacts against an object: wrenches about its centroid scaled by torque_scale.
QualityResult grasp_quality(std::span<const Contact> contacts, const Mesh& object,
                            double mu = kDefaultFriction, int m = kDefaultConeEdges);

}  // namespace skelgrasp

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "skelgrasp/mesh.hpp"

namespace skelgrasp::shapes {

/// Axis-aligned box; each face split into a grid of roughly `cell`-sized squares
/// (cell <= 0 gives the plain 12-triangle box).
Mesh box(const Vec3& size, const Vec3& center = Vec3::Zero(), double cell = 0.0);

/// Geodesic sphere: an icosahedron subdivided `subdivisions` times (20 * 4^n faces).
Mesh icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());

/// Closed cylinder along +z, centered at the origin. `segments` around the axis;
/// rings along the barrel are spaced to keep triangles near-isotropic.
Mesh cylinder(double radius, double length, int segments = 48);

/// Cylinder of the given barrel length capped by hemispheres, along +z.
Mesh capsule(double radius, double barrel_length, int segments = 48);

using SignedDistance = std::function<double(const Vec3&)>;

/// Zero level set of `sdf` (negative inside) by marching tetrahedra on a grid of
/// spacing `cell` covering `bounds`.
Mesh from_signed_distance(const SignedDistance& sdf, const Aabb& bounds, double cell);

/// Three capped tubes of `radius` leaving the origin in the xy-plane 120 degrees apart.
Mesh y_tube(double radius = 8.0, double arm_length = 50.0, double cell = 2.0);

/// Two balls joined by a bar, along x.
Mesh dumbbell(double ball_radius = 18.0, double bar_radius = 7.0, double bar_length = 80.0, double cell = 2.0);

struct NamedMesh {
  std::string name;
  Mesh mesh;
};

/// The five-shape desk corpus: cylinder, box, y_tube, dumbbell, capsule.
std::vector<NamedMesh> fixture_corpus();

}  // namespace skelgrasp::shapes

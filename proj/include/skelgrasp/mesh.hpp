#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skelgrasp/geometry.hpp"

namespace skelgrasp {

class Bvh;

struct CleanupOptions {
  double merge_tolerance = 1e-6;  ///< mm
  double min_triangle_area = 1e-9;  ///< mm^2
};

using Edge = std::pair<std::int32_t, std::int32_t>;

/// Indexed triangle surface with per-triangle outward normals and a BVH.
///
/// Construction cleans the input: near-duplicate vertices are merged, degenerate
/// triangles dropped, unreferenced vertices removed. If the result is closed the
/// winding is made consistent with a positive enclosed volume. Immutable afterwards.
class Mesh {
 public:
  Mesh();
  Mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles, const CleanupOptions& opts = {});
  Mesh(const Mesh&);
  Mesh(Mesh&&) noexcept;
  Mesh& operator=(const Mesh&);
  Mesh& operator=(Mesh&&) noexcept;
  ~Mesh();

  [[nodiscard]] std::span<const Vec3> vertices() const { return vertices_; }
  [[nodiscard]] std::span<const Triangle> triangles() const { return triangles_; }
  [[nodiscard]] std::span<const Vec3> normals() const { return normals_; }
  [[nodiscard]] std::size_t vertex_count() const { return vertices_.size(); }
  [[nodiscard]] std::size_t triangle_count() const { return triangles_.size(); }
  [[nodiscard]] bool empty() const { return triangles_.empty(); }

  [[nodiscard]] const Vec3& vertex(std::size_t i) const { return vertices_[i]; }
  [[nodiscard]] const Triangle& triangle(std::size_t i) const { return triangles_[i]; }
  [[nodiscard]] const Vec3& normal(std::size_t i) const { return normals_[i]; }
  [[nodiscard]] std::array<Vec3, 3> corners(std::size_t tri) const {
    const auto& t = triangles_[tri];
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  /// Every edge shared by exactly two triangles.
  [[nodiscard]] bool watertight() const { return open_edges_.empty(); }
  /// Edges not shared by exactly two triangles (boundary or non-manifold).
  [[nodiscard]] std::span<const Edge> open_edges() const { return open_edges_; }
  [[nodiscard]] std::size_t removed_degenerate() const { return removed_degenerate_; }
  [[nodiscard]] std::size_t merged_vertices() const { return merged_vertices_; }

  [[nodiscard]] double surface_area() const;
  /// Signed enclosed volume (positive for a closed, outward-oriented mesh).
  [[nodiscard]] double volume() const;
  /// Volume centroid for closed meshes, area-weighted centroid otherwise.
  [[nodiscard]] Vec3 centroid() const;
  [[nodiscard]] const Aabb& bounds() const { return bounds_; }
  /// Number of connected components over shared vertices.
  [[nodiscard]] std::size_t component_count() const;
  /// Vertex adjacency lists, sorted ascending.
  [[nodiscard]] std::vector<std::vector<std::int32_t>> vertex_neighbors() const;

  [[nodiscard]] const Bvh& bvh() const { return *bvh_; }

  /// Copy with every vertex transformed by `pose`.
  [[nodiscard]] Mesh transformed(const RigidPose& pose) const;

 private:
  void finalize(const CleanupOptions& opts);

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> normals_;
  std::vector<Edge> open_edges_;
  Aabb bounds_;
  std::size_t removed_degenerate_ = 0;
  std::size_t merged_vertices_ = 0;
  std::unique_ptr<Bvh> bvh_;
};

/// Reads OFF, OBJ or STL (ASCII or binary), chosen by extension, and multiplies
/// coordinates by `scale` (to millimeters). Throws InputError on failure.
Mesh load_mesh(const std::filesystem::path& path, double scale = 1.0);

/// Same, but also rejects meshes that are not closed.
Mesh load_watertight_mesh(const std::filesystem::path& path, double scale = 1.0);

void write_off(const Mesh& mesh, std::ostream& out);
void write_off(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace skelgrasp

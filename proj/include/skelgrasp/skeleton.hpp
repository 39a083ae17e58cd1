#pragma once

#include <array>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "skelgrasp/mesh.hpp"

namespace skelgrasp {

enum class VertexKind { Branching, Endpoint, Connecting };

std::string_view to_string(VertexKind kind);

struct SkeletonVertex {
  Vec3 position = Vec3::Zero();          ///< skeleton point, mm
  std::vector<std::int32_t> points;      ///< owned surface-point (mesh vertex) indices, sorted
  VertexKind kind = VertexKind::Connecting;
};

/// Curve skeleton: vertices own disjoint sets of surface points that together cover
/// the whole source mesh.
struct Skeleton {
  std::vector<SkeletonVertex> vertices;
  std::vector<Edge> edges;  ///< (a, b) with a < b, sorted, unique

  [[nodiscard]] std::size_t size() const { return vertices.size(); }
  [[nodiscard]] std::vector<std::vector<std::int32_t>> adjacency() const;
  [[nodiscard]] std::vector<int> degrees() const;
  [[nodiscard]] double edge_length(const Edge& e) const {
    return (vertices[e.first].position - vertices[e.second].position).norm();
  }
  [[nodiscard]] std::size_t associated_point_count() const;
};

/// Tuning for the contraction pipeline. Non-positive lengths/weights mean "derive
/// from the mesh".
struct ContractionParams {
  int max_iterations = 20;
  double area_ratio = 1e-4;          ///< converged once area < ratio * original area
  double max_edge_length = 0.0;      ///< default 2% of the bounding-box diagonal
  double contraction_weight = 0.0;   ///< initial Laplacian weight (default 10)
  double contraction_growth = 2.0;   ///< Laplacian weight factor per iteration
  double attraction_weight = 1.0;    ///< positional constraint weight, held fixed
};

struct SkeletonizeStats {
  int iterations = 0;
  double final_area_ratio = 1.0;
  std::size_t collapsed_vertices = 0;
};

/// Contracts `mesh` by implicit Laplacian smoothing against positional attraction,
/// collapses the contracted surface into a curve graph, and carries the surface
/// association through every merge. Throws InputError for open or disconnected meshes
/// and AlgorithmError if contraction does not converge.
Skeleton skeletonize(const Mesh& mesh, const ContractionParams& params = {}, SkeletonizeStats* stats = nullptr);

/// Labels by degree: >2 branching, 1 endpoint, 2 connecting. Throws on isolated vertices.
void classify_vertices(Skeleton& skeleton);

/// Maximal chain of connecting vertices between two delimiting (endpoint or
/// branching) vertices. A skeleton that is a bare cycle yields one segment whose
/// delimiters are both its lowest-index vertex.
struct Segment {
  std::vector<std::int32_t> interior;   ///< in path order from ends[0] to ends[1]
  std::array<std::int32_t, 2> ends{-1, -1};
};

std::vector<Segment> segment_skeleton(const Skeleton& skeleton);

/// Kind of the owning skeleton vertex for each mesh vertex.
std::vector<VertexKind> surface_partition(const Skeleton& skeleton, const Mesh& mesh);

/// Visualization colors: branching blue, endpoint red, connecting yellow.
std::array<std::uint8_t, 3> kind_color(VertexKind kind);

/// Text export: header, vertex table (id x y z kind count ids...), edge list.
void write_skeleton(const Skeleton& skeleton, std::ostream& out);
Skeleton read_skeleton(std::istream& in);

/// ASCII PLY of the mesh with per-vertex colors from surface_partition.
void write_partition_ply(const Skeleton& skeleton, const Mesh& mesh, std::ostream& out);

void write_segments(const Skeleton& skeleton, const std::vector<Segment>& segments, std::ostream& out);

}  // namespace skelgrasp

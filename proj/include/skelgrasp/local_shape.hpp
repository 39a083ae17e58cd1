#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "skelgrasp/errors.hpp"
#include "skelgrasp/skeleton.hpp"

namespace skelgrasp {

constexpr double kDefaultRoundRatio = 1.2;     ///< t_r
constexpr double kDefaultMaxCurvature = 0.1;   ///< 1/mm

/// Too few or coincident surface points to describe a cross-section.
class DegenerateShapeError : public AlgorithmError {
 public:
  using AlgorithmError::AlgorithmError;
};

/// Outgoing sub-graphs of a skeleton vertex, one per incident edge.
struct GraspingInterval {
  struct Path {
    std::vector<std::int32_t> vertices;  ///< starts at the query vertex
    double length = 0.0;                 ///< accumulated arc length, mm
  };
  std::vector<Path> paths;

  /// Distinct vertices over all paths, sorted.
  [[nodiscard]] std::vector<std::int32_t> vertices() const;
  [[nodiscard]] double shortest() const;
};

enum class ShapeKind { Round, Rectangular };
std::string_view to_string(ShapeKind kind);

/// How eigenvalues are turned into the sizes compared against strategy thresholds.
enum class ThicknessMode {
  DerivedLength,  ///< 2 * sqrt(lambda), mm
  Eigenvalue,     ///< lambda itself, mm^2
};

struct LocalSurfaceShape {
  double lambda1 = 0.0;  ///< mm^2, lambda1 >= lambda2
  double lambda2 = 0.0;
  Vec3 ev1 = Vec3::UnitX();
  Vec3 ev2 = Vec3::UnitY();
  ShapeKind shape = ShapeKind::Round;
  Vec3 origin = Vec3::Zero();  ///< plane point (skeleton point)
  Vec3 normal = Vec3::UnitZ(); ///< plane normal (skeleton tangent)
  std::size_t point_count = 0;

  [[nodiscard]] double ratio() const;
  [[nodiscard]] double thickness(ThicknessMode mode) const;  ///< from lambda2
  [[nodiscard]] double length(ThicknessMode mode) const;     ///< from lambda1
};

/// Curvature |s' x s''| / |s'|^3 from three consecutive points with non-uniform spacing.
double curvature(const Vec3& prev, const Vec3& point, const Vec3& next);

/// Curvature at a skeleton vertex; 0 unless the vertex has exactly two neighbors.
double curvature(const Skeleton& skeleton, std::int32_t v);

/// Unit tangent: central difference on connecting vertices, outward along the single
/// edge at endpoints, mean of the most collinear edge pair at branching vertices.
Vec3 skeleton_tangent(const Skeleton& skeleton, std::int32_t v);

/// Walks every incident edge until a non-connecting vertex, an accumulated length of
/// at least `max_len`, or a vertex with curvature above `max_curvature`; the stopping
/// vertex is part of the path.
GraspingInterval grasping_interval(const Skeleton& skeleton, std::int32_t v, double max_len,
                                   double max_curvature = kDefaultMaxCurvature);

/// PCA of points projected onto the plane through `origin` with normal `normal`.
LocalSurfaceShape planar_shape(std::span<const Vec3> points, const Vec3& origin, const Vec3& normal,
                               double round_ratio = kDefaultRoundRatio);

/// Local surface shape from all surface points owned by the interval's vertices.
LocalSurfaceShape surface_shape(const Mesh& mesh, const Skeleton& skeleton, std::int32_t v,
                                const GraspingInterval& interval, double round_ratio = kDefaultRoundRatio);

/// Grasping plane and projected points as text (plane, eigen-decomposition, 2-D points).
void write_grasping_plane(const LocalSurfaceShape& shape, std::span<const Vec3> points, std::ostream& out);

}  // namespace skelgrasp

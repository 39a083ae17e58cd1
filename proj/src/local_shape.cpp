#include "skelgrasp/local_shape.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <set>

#include <Eigen/Eigenvalues>

namespace skelgrasp {

std::vector<std::int32_t> GraspingInterval::vertices() const {
  std::set<std::int32_t> all;
  for (const auto& p : paths) all.insert(p.vertices.begin(), p.vertices.end());
  return {all.begin(), all.end()};
}

double GraspingInterval::shortest() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : paths) best = std::min(best, p.length);
  return paths.empty() ? 0.0 : best;
}

std::string_view to_string(ShapeKind kind) { return kind == ShapeKind::Round ? "round" : "rectangular"; }

double LocalSurfaceShape::ratio() const {
  if (lambda2 > 0.0) return lambda1 / lambda2;
  return lambda1 > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

double LocalSurfaceShape::thickness(ThicknessMode mode) const {
  return mode == ThicknessMode::Eigenvalue ? lambda2 : 2.0 * std::sqrt(lambda2);
}

double LocalSurfaceShape::length(ThicknessMode mode) const {
  return mode == ThicknessMode::Eigenvalue ? lambda1 : 2.0 * std::sqrt(lambda1);
}

double curvature(const Vec3& prev, const Vec3& point, const Vec3& next) {
  const double h1 = (point - prev).norm();
  const double h2 = (next - point).norm();
  if (h1 <= 0.0 || h2 <= 0.0) return 0.0;
  // Second-order finite differences on a non-uniform grid, parameterized by chord length.
  const double denom = h1 * h2 * (h1 + h2);
  const Vec3 d1 = (h1 * h1 * (next - point) + h2 * h2 * (point - prev)) / denom;
  const Vec3 d2 = 2.0 * (h1 * next - (h1 + h2) * point + h2 * prev) / denom;
  const double speed = d1.norm();
  if (speed <= 0.0) return 0.0;
  return d1.cross(d2).norm() / (speed * speed * speed);
}

namespace {

std::vector<std::int32_t> neighbors_of(const Skeleton& s, std::int32_t v) {
  std::vector<std::int32_t> nb;
  for (const auto& [a, b] : s.edges) {
    if (a == v) nb.push_back(b);
    if (b == v) nb.push_back(a);
  }
  std::sort(nb.begin(), nb.end());
  return nb;
}

void check_vertex(const Skeleton& s, std::int32_t v) {
  if (v < 0 || static_cast<std::size_t>(v) >= s.size()) {
    throw InputError("skeleton vertex " + std::to_string(v) + " out of range");
  }
}

// Deterministic sign: non-negative along +x, then +y, then +z.
Vec3 canonical_sign(const Vec3& v) {
  constexpr double kTie = 1e-12;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(v[k]) > kTie) return v[k] < 0.0 ? Vec3(-v) : v;
  }
  return v;
}

}  // namespace

double curvature(const Skeleton& skeleton, std::int32_t v) {
  check_vertex(skeleton, v);
  const auto nb = neighbors_of(skeleton, v);
  if (nb.size() != 2) return 0.0;
  return curvature(skeleton.vertices[nb[0]].position, skeleton.vertices[v].position,
                   skeleton.vertices[nb[1]].position);
}

Vec3 skeleton_tangent(const Skeleton& skeleton, std::int32_t v) {
  check_vertex(skeleton, v);
  const auto nb = neighbors_of(skeleton, v);
  const Vec3 p = skeleton.vertices[v].position;
  if (nb.empty()) throw AlgorithmError("isolated skeleton vertex has no tangent");
  if (nb.size() == 1) {
    const Vec3 t = p - skeleton.vertices[nb[0]].position;
    if (t.norm() <= 0.0) throw AlgorithmError("zero-length skeleton edge");
    return t.normalized();
  }
  if (nb.size() == 2) {
    const Vec3 prev = skeleton.vertices[nb[0]].position;
    const Vec3 next = skeleton.vertices[nb[1]].position;
    const double h1 = (p - prev).norm();
    const double h2 = (next - p).norm();
    const Vec3 d1 = h1 > 0 && h2 > 0 ? Vec3(h1 * h1 * (next - p) + h2 * h2 * (p - prev)) : Vec3(next - prev);
    if (d1.norm() <= 0.0) throw AlgorithmError("zero-length skeleton edge");
    return d1.normalized();
  }
  // Branching: the pair of incident edges closest to a straight line.
  std::vector<Vec3> dirs;
  for (auto n : nb) dirs.push_back((skeleton.vertices[n].position - p).normalized());
  std::size_t bi = 0, bj = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      const double d = dirs[i].dot(dirs[j]);
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  const Vec3 t = dirs[bi] - dirs[bj];
  if (t.norm() <= 0.0) throw AlgorithmError("degenerate branching tangent");
  return canonical_sign(t.normalized());
}

GraspingInterval grasping_interval(const Skeleton& skeleton, std::int32_t v, double max_len, double max_curvature) {
  check_vertex(skeleton, v);
  constexpr double kLengthTolerance = 1e-9;
  const auto adj = skeleton.adjacency();
  GraspingInterval interval;
  for (auto first : adj[v]) {
    GraspingInterval::Path path;
    path.vertices = {v, first};
    path.length = (skeleton.vertices[first].position - skeleton.vertices[v].position).norm();
    std::int32_t prev = v;
    std::int32_t cur = first;
    while (cur != v && skeleton.vertices[cur].kind == VertexKind::Connecting &&
           path.length < max_len - kLengthTolerance && curvature(skeleton, cur) <= max_curvature &&
           adj[cur].size() == 2) {
      const std::int32_t next = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
      path.length += (skeleton.vertices[next].position - skeleton.vertices[cur].position).norm();
      path.vertices.push_back(next);
      prev = cur;
      cur = next;
    }
    interval.paths.push_back(std::move(path));
  }
  return interval;
}

LocalSurfaceShape planar_shape(std::span<const Vec3> points, const Vec3& origin, const Vec3& normal,
                               double round_ratio) {
  if (points.size() < 3) {
    throw DegenerateShapeError("local shape needs at least 3 surface points, got " + std::to_string(points.size()));
  }
  if (normal.norm() <= 0.0) throw DegenerateShapeError("grasping plane normal is zero");
  LocalSurfaceShape shape;
  shape.origin = origin;
  shape.normal = normal.normalized();
  shape.point_count = points.size();
  const Vec3 u = any_perpendicular(shape.normal);
  const Vec3 w = shape.normal.cross(u);

  std::vector<Vec2> flat;
  flat.reserve(points.size());
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - origin;
    flat.emplace_back(d.dot(u), d.dot(w));
    mean += flat.back();
  }
  mean /= static_cast<double>(flat.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& q : flat) cov += (q - mean) * (q - mean).transpose();
  cov /= static_cast<double>(flat.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  shape.lambda1 = std::max(0.0, es.eigenvalues()[1]);
  shape.lambda2 = std::max(0.0, es.eigenvalues()[0]);
  if (shape.lambda1 <= 0.0) throw DegenerateShapeError("projected surface points coincide");
  const Vec2 e1 = es.eigenvectors().col(1);
  shape.ev1 = canonical_sign((e1.x() * u + e1.y() * w).normalized());
  shape.ev2 = shape.normal.cross(shape.ev1).normalized();
  shape.shape = shape.ratio() < round_ratio ? ShapeKind::Round : ShapeKind::Rectangular;
  return shape;
}

LocalSurfaceShape surface_shape(const Mesh& mesh, const Skeleton& skeleton, std::int32_t v,
                                const GraspingInterval& interval, double round_ratio) {
  check_vertex(skeleton, v);
  std::vector<Vec3> pts;
  auto ids = interval.vertices();
  if (ids.empty()) ids.push_back(v);
  for (auto id : ids) {
    for (auto p : skeleton.vertices[id].points) pts.push_back(mesh.vertex(p));
  }
  return planar_shape(pts, skeleton.vertices[v].position, skeleton_tangent(skeleton, v), round_ratio);
}

void write_grasping_plane(const LocalSurfaceShape& shape, std::span<const Vec3> points, std::ostream& out) {
  out.precision(12);
  out << "origin " << shape.origin.transpose() << '\n';
  out << "normal " << shape.normal.transpose() << '\n';
  out << "lambda " << shape.lambda1 << ' ' << shape.lambda2 << '\n';
  out << "ev1 " << shape.ev1.transpose() << '\n';
  out << "ev2 " << shape.ev2.transpose() << '\n';
  out << "shape " << to_string(shape.shape) << '\n';
  out << "points " << points.size() << '\n';
  for (const auto& p : points) {
    const Vec3 d = p - shape.origin;
    out << d.dot(shape.ev1) << ' ' << d.dot(shape.ev2) << '\n';
  }
}

}  // namespace skelgrasp

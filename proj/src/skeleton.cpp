#include "skelgrasp/skeleton.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "skelgrasp/errors.hpp"
#include "skelgrasp/queries.hpp"

namespace skelgrasp {

std::string_view to_string(VertexKind kind) {
  switch (kind) {
    case VertexKind::Branching: return "branching";
    case VertexKind::Endpoint: return "endpoint";
    case VertexKind::Connecting: return "connecting";
  }
  return "connecting";
}

std::vector<std::vector<std::int32_t>> Skeleton::adjacency() const {
  std::vector<std::vector<std::int32_t>> adj(vertices.size());
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

std::vector<int> Skeleton::degrees() const {
  std::vector<int> deg(vertices.size(), 0);
  for (const auto& [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

std::size_t Skeleton::associated_point_count() const {
  std::size_t n = 0;
  for (const auto& v : vertices) n += v.points.size();
  return n;
}

namespace {

using Points = std::vector<Vec3>;

constexpr double kDefaultContractionWeight = 10.0;

double surface_area(const Points& x, std::span<const Triangle> tris) {
  double a = 0.0;
  for (const auto& t : tris) a += triangle_area(x[t[0]], x[t[1]], x[t[2]]);
  return a;
}

using Cotangents = std::vector<std::array<double, 3>>;  // per triangle, at corner k

// Refreshes the corner cotangents of triangles that are still well shaped; collapsed
// triangles keep the last reliable values.
void update_cotangents(const Points& x, std::span<const Triangle> tris, Cotangents& cots, bool first) {
  constexpr double kMinShape = 1e-2;  // twice area over squared longest edge
  cots.resize(tris.size());
  for (std::size_t f = 0; f < tris.size(); ++f) {
    const auto& t = tris[f];
    double longest = 0.0;
    for (int k = 0; k < 3; ++k) longest = std::max(longest, (x[t[(k + 1) % 3]] - x[t[k]]).squaredNorm());
    const double twice_area = (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
    if (!first && twice_area < kMinShape * longest) continue;
    for (int k = 0; k < 3; ++k) {
      const Vec3 u = x[t[(k + 1) % 3]] - x[t[k]];
      const Vec3 v = x[t[(k + 2) % 3]] - x[t[k]];
      const double cross = u.cross(v).norm();
      cots[f][k] = cross > 0.0 ? u.dot(v) / cross : 0.0;
    }
  }
}

// Cotangent Laplacian. Edge weights are clamped to [0, kMaxWeight]; a row whose
// weights all vanish falls back to uniform weights.
Eigen::SparseMatrix<double> cotangent_laplacian(const Cotangents& cots, std::span<const Triangle> tris,
                                                std::size_t vertex_count) {
  constexpr double kMaxWeight = 100.0;
  std::map<Edge, double> weight;
  for (std::size_t f = 0; f < tris.size(); ++f) {
    const auto& t = tris[f];
    for (int k = 0; k < 3; ++k) weight[std::minmax(t[(k + 1) % 3], t[(k + 2) % 3])] += 0.5 * cots[f][k];
  }
  std::vector<std::vector<std::pair<std::int32_t, double>>> rows(vertex_count);
  for (const auto& [e, w0] : weight) {
    const double w = std::clamp(w0, 0.0, kMaxWeight);
    rows[e.first].emplace_back(e.second, w);
    rows[e.second].emplace_back(e.first, w);
  }
  const auto n = static_cast<Eigen::Index>(vertex_count);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& row = rows[i];
    double total = 0.0;
    for (const auto& [j, w] : row) total += w;
    if (total <= 1e-12) {
      for (auto& [j, w] : row) w = 1.0;
      total = static_cast<double>(row.size());
    }
    for (const auto& [j, w] : row) trip.emplace_back(i, j, w);
    trip.emplace_back(i, i, -total);
  }
  Eigen::SparseMatrix<double> lap(n, n);
  lap.setFromTriplets(trip.begin(), trip.end());
  return lap;
}

// ---------------------------------------------------------------------------
// Connectivity surgery: collapse edges of the contracted surface until no face remains.

class SurfaceCollapse {
 public:
  SurfaceCollapse(const Points& positions, std::span<const Triangle> tris)
      : pos_(positions), alive_(positions.size(), 1), version_(positions.size(), 0) {
    const std::size_t n = positions.size();
    faces_.assign(tris.begin(), tris.end());
    face_alive_.assign(faces_.size(), 1);
    vfaces_.resize(n);
    nbrs_.resize(n);
    points_.resize(n);
    for (std::size_t i = 0; i < n; ++i) points_[i] = {static_cast<std::int32_t>(i)};
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      for (int k = 0; k < 3; ++k) {
        vfaces_[faces_[f][k]].insert(static_cast<std::int32_t>(f));
        nbrs_[faces_[f][k]].insert(faces_[f][(k + 1) % 3]);
        nbrs_[faces_[f][(k + 1) % 3]].insert(faces_[f][k]);
      }
    }
  }

  void run() {
    for (std::size_t a = 0; a < pos_.size(); ++a) {
      for (auto b : nbrs_[a]) {
        if (static_cast<std::int32_t>(a) < b) push(static_cast<std::int32_t>(a), b);
      }
    }
    while (!queue_.empty()) {
      const Entry e = queue_.top();
      queue_.pop();
      if (!alive_[e.a] || !alive_[e.b] || version_[e.a] != e.va || version_[e.b] != e.vb) continue;
      if (!nbrs_[e.a].contains(e.b) || !has_face(e.a, e.b)) continue;
      collapse(e.a, e.b);
      ++collapses_;
    }
  }

  [[nodiscard]] std::size_t collapses() const { return collapses_; }
  [[nodiscard]] bool any_face_left() const {
    return std::any_of(face_alive_.begin(), face_alive_.end(), [](char c) { return c != 0; });
  }
  const std::vector<char>& alive() const { return alive_; }
  const Points& positions() const { return pos_; }
  const std::vector<std::set<std::int32_t>>& neighbors() const { return nbrs_; }
  const std::vector<std::vector<std::int32_t>>& points() const { return points_; }

 private:
  struct Entry {
    double cost;
    std::int32_t a, b;
    std::uint32_t va, vb;
    bool operator<(const Entry& o) const {
      // std::priority_queue pops the largest; invert for shortest-first with index ties.
      if (cost != o.cost) return cost > o.cost;
      if (a != o.a) return a > o.a;
      return b > o.b;
    }
  };

  void push(std::int32_t a, std::int32_t b) {
    if (a > b) std::swap(a, b);
    if (!has_face(a, b)) return;
    queue_.push({(pos_[a] - pos_[b]).norm(), a, b, version_[a], version_[b]});
  }

  bool has_face(std::int32_t a, std::int32_t b) const {
    const auto& fa = vfaces_[a];
    const auto& fb = vfaces_[b];
    const auto& small = fa.size() < fb.size() ? fa : fb;
    const auto& large = fa.size() < fb.size() ? fb : fa;
    return std::any_of(small.begin(), small.end(), [&](std::int32_t f) { return large.contains(f); });
  }

  void kill_face(std::int32_t f) {
    face_alive_[f] = 0;
    for (auto v : faces_[f]) vfaces_[v].erase(f);
  }

  void collapse(std::int32_t a, std::int32_t b) {
    // Survivor keeps the larger surface share; lower index on ties.
    std::int32_t keep = a, gone = b;
    if (points_[b].size() > points_[a].size()) std::swap(keep, gone);
    const double wk = static_cast<double>(points_[keep].size());
    const double wg = static_cast<double>(points_[gone].size());
    pos_[keep] = (wk * pos_[keep] + wg * pos_[gone]) / (wk + wg);
    points_[keep].insert(points_[keep].end(), points_[gone].begin(), points_[gone].end());
    points_[gone].clear();

    const std::vector<std::int32_t> gone_faces(vfaces_[gone].begin(), vfaces_[gone].end());
    for (auto f : gone_faces) {
      auto& face = faces_[f];
      if (std::find(face.begin(), face.end(), keep) != face.end()) {
        kill_face(f);
        continue;
      }
      for (auto& v : face) {
        if (v == gone) v = keep;
      }
      vfaces_[gone].erase(f);
      // Drop the face if an identical one already exists.
      auto key = face;
      std::sort(key.begin(), key.end());
      bool duplicate = false;
      for (auto g : vfaces_[keep]) {
        auto other = faces_[g];
        std::sort(other.begin(), other.end());
        if (other == key) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) {
        face_alive_[f] = 0;
        for (auto v : face) {
          if (v != keep) vfaces_[v].erase(f);
        }
      } else {
        vfaces_[keep].insert(f);
      }
    }
    vfaces_[gone].clear();

    for (auto c : nbrs_[gone]) {
      nbrs_[c].erase(gone);
      if (c != keep) {
        nbrs_[c].insert(keep);
        nbrs_[keep].insert(c);
      }
    }
    nbrs_[gone].clear();
    nbrs_[keep].erase(gone);
    alive_[gone] = 0;
    ++version_[keep];
    for (auto c : nbrs_[keep]) push(keep, c);
  }

  Points pos_;
  std::vector<Triangle> faces_;
  std::vector<char> face_alive_;
  std::vector<std::set<std::int32_t>> vfaces_;
  std::vector<std::set<std::int32_t>> nbrs_;
  std::vector<std::vector<std::int32_t>> points_;
  std::vector<char> alive_;
  std::vector<std::uint32_t> version_;
  std::priority_queue<Entry> queue_;
  std::size_t collapses_ = 0;
};

// ---------------------------------------------------------------------------
// Mutable curve graph used for clean-up after the surgery.

class CurveGraph {
 public:
  struct Node {
    Vec3 pos;
    Vec3 core;  ///< contracted position
    std::vector<std::int32_t> points;
    std::set<std::int32_t> nbrs;
    bool alive = true;
  };

  std::vector<Node> nodes;

  [[nodiscard]] int degree(std::int32_t i) const { return static_cast<int>(nodes[i].nbrs.size()); }

  [[nodiscard]] std::vector<std::int32_t> alive_ids() const {
    std::vector<std::int32_t> ids;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].alive) ids.push_back(static_cast<std::int32_t>(i));
    }
    return ids;
  }

  // `keep` absorbs `gone`: surface points and edges; position becomes the point-weighted mean.
  void merge(std::int32_t keep, std::int32_t gone) {
    auto& k = nodes[keep];
    auto& g = nodes[gone];
    const double nk = static_cast<double>(k.points.size());
    const double ng = static_cast<double>(g.points.size());
    if (nk + ng > 0) {
      k.pos = (nk * k.pos + ng * g.pos) / (nk + ng);
      k.core = (nk * k.core + ng * g.core) / (nk + ng);
    }
    k.points.insert(k.points.end(), g.points.begin(), g.points.end());
    g.points.clear();
    for (auto c : g.nbrs) {
      nodes[c].nbrs.erase(gone);
      if (c != keep) {
        nodes[c].nbrs.insert(keep);
        k.nbrs.insert(c);
      }
    }
    g.nbrs.clear();
    k.nbrs.erase(gone);
    g.alive = false;
  }

  [[nodiscard]] double length(std::int32_t a, std::int32_t b) const {
    return (nodes[a].pos - nodes[b].pos).norm();
  }

  // Walks from `start` through `next` along degree-2 nodes until a node of other degree.
  [[nodiscard]] std::vector<std::int32_t> walk(std::int32_t start, std::int32_t next) const {
    std::vector<std::int32_t> path{start, next};
    while (degree(path.back()) == 2 && path.back() != start) {
      const auto& nb = nodes[path.back()].nbrs;
      const std::int32_t prev = path[path.size() - 2];
      const std::int32_t step = *nb.begin() == prev ? *nb.rbegin() : *nb.begin();
      path.push_back(step);
    }
    return path;
  }

  [[nodiscard]] double path_length(const std::vector<std::int32_t>& path) const {
    double l = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) l += length(path[i - 1], path[i]);
    return l;
  }
};

Vec3 centroid_of(const std::vector<std::int32_t>& ids, std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (auto i : ids) c += pts[i];
  return c / static_cast<double>(ids.size());
}

// Removes endpoint branches shorter than `min_len` and fuses branching nodes joined by
// short chains. Repeats until stable.
void prune(CurveGraph& g, double min_len) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto i : g.alive_ids()) {
      if (!g.nodes[i].alive || g.degree(i) != 1) continue;
      const auto path = g.walk(i, *g.nodes[i].nbrs.begin());
      const auto junction = path.back();
      if (g.degree(junction) < 3 || g.path_length(path) >= min_len) continue;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) g.merge(junction, path[k]);
      changed = true;
    }
    for (auto i : g.alive_ids()) {
      if (!g.nodes[i].alive || g.degree(i) < 3) continue;
      const std::vector<std::int32_t> nb(g.nodes[i].nbrs.begin(), g.nodes[i].nbrs.end());
      for (auto n : nb) {
        if (!g.nodes[i].alive || !g.nodes[n].alive || !g.nodes[i].nbrs.contains(n)) continue;
        const auto path = g.walk(i, n);
        const auto other = path.back();
        if (other == i || g.degree(other) < 3 || g.path_length(path) >= min_len) continue;
        for (std::size_t k = 1; k < path.size(); ++k) g.merge(i, path[k]);
        changed = true;
      }
    }
  }
}

// Merges runs of degree-2 nodes so consecutive kept nodes are at least `spacing` apart.
void regularize_chains(CurveGraph& g, double spacing) {
  for (auto i : g.alive_ids()) {
    if (!g.nodes[i].alive || g.degree(i) == 2) continue;
    const std::vector<std::int32_t> nb(g.nodes[i].nbrs.begin(), g.nodes[i].nbrs.end());
    for (auto n : nb) {
      if (!g.nodes[n].alive || !g.nodes[i].nbrs.contains(n) || g.degree(n) != 2) continue;
      const auto path = g.walk(i, n);
      std::int32_t anchor = path[0];
      for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        if (g.length(anchor, path[k]) < spacing) {
          g.merge(anchor, path[k]);
        } else {
          anchor = path[k];
        }
      }
    }
  }
}

Skeleton to_skeleton(const CurveGraph& g) {
  Skeleton s;
  std::vector<std::int32_t> remap(g.nodes.size(), -1);
  for (auto i : g.alive_ids()) {
    remap[i] = static_cast<std::int32_t>(s.vertices.size());
    SkeletonVertex v;
    v.position = g.nodes[i].pos;
    v.points = g.nodes[i].points;
    std::sort(v.points.begin(), v.points.end());
    s.vertices.push_back(std::move(v));
  }
  for (auto i : g.alive_ids()) {
    for (auto j : g.nodes[i].nbrs) {
      if (i < j) s.edges.emplace_back(remap[i], remap[j]);
    }
  }
  for (auto& e : s.edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(s.edges.begin(), s.edges.end());
  return s;
}

// Two vertices along the largest principal axis through the centroid.
Skeleton minimal_skeleton(const Mesh& mesh, double half_length) {
  const auto pts = mesh.vertices();
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  Vec3 axis = es.eigenvectors().col(2);
  if (axis.x() < 0 || (axis.x() == 0 && axis.y() < 0)) axis = -axis;
  Skeleton s;
  s.vertices.resize(2);
  s.vertices[0].position = c - half_length * axis;
  s.vertices[1].position = c + half_length * axis;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s.vertices[(pts[i] - c).dot(axis) >= 0.0 ? 1 : 0].points.push_back(static_cast<std::int32_t>(i));
  }
  if (s.vertices[0].points.empty() || s.vertices[1].points.empty()) {
    // Split by rank instead; needed only for pathological inputs.
    std::vector<std::int32_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto x, auto y) { return (pts[x] - c).dot(axis) < (pts[y] - c).dot(axis); });
    s.vertices[0].points.assign(order.begin(), order.begin() + order.size() / 2);
    s.vertices[1].points.assign(order.begin() + order.size() / 2, order.end());
    std::sort(s.vertices[0].points.begin(), s.vertices[0].points.end());
    std::sort(s.vertices[1].points.begin(), s.vertices[1].points.end());
  }
  s.edges = {{0, 1}};
  return s;
}

// Splits edges longer than `max_len`, handing surface points over to the inserted
// vertices by their projection onto the edge.
void subdivide_long_edges(Skeleton& s, std::span<const Vec3> surface, double max_len) {
  std::vector<Edge> edges;
  const auto original = s.edges;
  for (const auto& e : original) {
    const Vec3 pa = s.vertices[e.first].position;
    const Vec3 pb = s.vertices[e.second].position;
    const double len = (pb - pa).norm();
    const int pieces = static_cast<int>(std::ceil(len / max_len - 1e-9));
    if (pieces <= 1) {
      edges.push_back(e);
      continue;
    }
    std::vector<std::int32_t> chain{e.first};
    for (int k = 1; k < pieces; ++k) {
      SkeletonVertex v;
      v.position = pa + (pb - pa) * (static_cast<double>(k) / pieces);
      chain.push_back(static_cast<std::int32_t>(s.vertices.size()));
      s.vertices.push_back(std::move(v));
    }
    chain.push_back(e.second);
    const Vec3 dir = pb - pa;
    for (int end = 0; end < 2; ++end) {
      const std::int32_t owner = end == 0 ? e.first : e.second;
      auto& pts = s.vertices[owner].points;
      std::vector<std::int32_t> stay;
      for (auto p : pts) {
        const double t = (surface[p] - pa).dot(dir) / dir.squaredNorm();
        const int slot = std::clamp(static_cast<int>(std::lround(t * pieces)), 0, pieces);
        const bool moves = t > 0.0 && t < 1.0 && slot != (end == 0 ? 0 : pieces);
        if (moves) {
          s.vertices[chain[slot]].points.push_back(p);
        } else {
          stay.push_back(p);
        }
      }
      pts = std::move(stay);
    }
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) edges.emplace_back(std::minmax(chain[k], chain[k + 1]));
  }
  s.edges = std::move(edges);
  std::sort(s.edges.begin(), s.edges.end());
  for (auto& v : s.vertices) std::sort(v.points.begin(), v.points.end());
}

// Removes flagged vertices and every edge touching them; indices are compacted.
void drop_vertices(Skeleton& s, const std::vector<char>& drop) {
  std::vector<std::int32_t> remap(s.size(), -1);
  std::vector<SkeletonVertex> kept;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (drop[i]) continue;
    remap[i] = static_cast<std::int32_t>(kept.size());
    kept.push_back(std::move(s.vertices[i]));
  }
  std::vector<Edge> edges;
  for (const auto& [a, b] : s.edges)
    if (remap[a] >= 0 && remap[b] >= 0) edges.emplace_back(std::minmax(remap[a], remap[b]));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  s.vertices = std::move(kept);
  s.edges = std::move(edges);
}

// Collapsing a junction blob leaves its vertex pulled into one of the arms. Each
// branching vertex moves to the least-squares meeting point of lines fitted to the
// outer two thirds of its chains, if that point is well inside the surface and within
// half the shortest chain. Chain vertices left behind the moved junction are merged
// into it.
void center_junctions(Skeleton& s, const Mesh& mesh, double margin, double spacing) {
  const auto adj = s.adjacency();
  std::vector<char> drop(s.size(), 0);
  std::vector<Edge> added;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (adj[j].size() < 3 || drop[j]) continue;
    struct Arm {
      std::vector<std::int32_t> ids;
      std::int32_t end = -1;  // delimiter reached
      Vec3 center, dir;
    };
    std::vector<Arm> arms;
    Mat3 a = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    double shortest = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (auto first : adj[j]) {
      Arm arm;
      double length = 0.0;
      auto prev = static_cast<std::int32_t>(j);
      std::int32_t cur = first;
      while (adj[cur].size() == 2 && arm.ids.size() < 40) {
        arm.ids.push_back(cur);
        length += (s.vertices[cur].position - s.vertices[prev].position).norm();
        const std::int32_t next = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
        prev = cur;
        cur = next;
      }
      arm.end = cur;
      shortest = std::min(shortest, length);
      const std::size_t skip = arm.ids.size() / 3;
      if (arm.ids.size() - skip < 2) {
        ok = false;
        break;
      }
      Vec3 c = Vec3::Zero();
      for (std::size_t i = skip; i < arm.ids.size(); ++i) c += s.vertices[arm.ids[i]].position;
      c /= static_cast<double>(arm.ids.size() - skip);
      Mat3 cov = Mat3::Zero();
      for (std::size_t i = skip; i < arm.ids.size(); ++i) {
        const Vec3 d = s.vertices[arm.ids[i]].position - c;
        cov += d * d.transpose();
      }
      arm.center = c;
      arm.dir = Eigen::SelfAdjointEigenSolver<Mat3>(cov).eigenvectors().col(2);
      const Mat3 proj = Mat3::Identity() - arm.dir * arm.dir.transpose();
      a += proj;
      b += proj * c;
      arms.push_back(std::move(arm));
    }
    if (!ok) continue;
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
    if (eig.eigenvalues()(0) < 0.1 * eig.eigenvalues()(2)) continue;
    const Vec3 x = a.ldlt().solve(b);
    if ((x - s.vertices[j].position).norm() > 0.5 * shortest) continue;
    if (!contains(mesh, x) || closest_point(mesh, x).distance < margin) continue;

    // Leading chain vertices that no longer lie ahead of the junction.
    std::vector<std::size_t> keep_from(arms.size(), 0);
    for (std::size_t k = 0; k < arms.size(); ++k) {
      auto& arm = arms[k];
      if (arm.dir.dot(arm.center - x) < 0.0) arm.dir = -arm.dir;
      double last = 0.5 * spacing;
      std::size_t i = 0;
      for (std::size_t m = 0; m < arm.ids.size(); ++m) {
        const double t = arm.dir.dot(s.vertices[arm.ids[m]].position - x);
        if (t >= last) break;
        i = m + 1;
      }
      if (i == arm.ids.size()) ok = false;
      keep_from[k] = i;
    }
    if (!ok) continue;
    s.vertices[j].position = x;
    for (std::size_t k = 0; k < arms.size(); ++k) {
      const auto& arm = arms[k];
      for (std::size_t m = 0; m < keep_from[k]; ++m) {
        auto& pts = s.vertices[arm.ids[m]].points;
        s.vertices[j].points.insert(s.vertices[j].points.end(), pts.begin(), pts.end());
        pts.clear();
        drop[arm.ids[m]] = 1;
      }
      if (keep_from[k] > 0)
        added.emplace_back(std::minmax(static_cast<std::int32_t>(j), arm.ids[keep_from[k]]));
    }
    std::sort(s.vertices[j].points.begin(), s.vertices[j].points.end());
  }
  if (added.empty()) return;
  s.edges.insert(s.edges.end(), added.begin(), added.end());
  drop_vertices(s, drop);
}

// Laplacian smoothing of connecting vertices; delimiters stay fixed. Removes the
// wobble left by patch centroids; straight runs do not shrink.
void smooth_chains(Skeleton& s, const Mesh& mesh, double margin, int rounds = 20) {
  const auto adj = s.adjacency();
  const std::size_t n = s.size();
  std::vector<Vec3> orig(n), pos(n);
  for (std::size_t i = 0; i < n; ++i) orig[i] = pos[i] = s.vertices[i].position;
  auto pass = [&](double factor) {
    std::vector<Vec3> next = pos;
    for (std::size_t i = 0; i < n; ++i) {
      if (adj[i].size() != 2) continue;
      const Vec3 avg = 0.5 * (pos[adj[i][0]] + pos[adj[i][1]]);
      next[i] = pos[i] + factor * (avg - pos[i]);
    }
    pos = std::move(next);
  };
  for (int r = 0; r < rounds; ++r) pass(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i].size() != 2) continue;
    if (contains(mesh, pos[i]) && closest_point(mesh, pos[i]).distance >= margin) s.vertices[i].position = pos[i];
    else s.vertices[i].position = orig[i];
  }
}

// Collapse order leaves patches lopsided along chains. Each round hands every surface
// point to the nearest of its owner and the owner's neighbours; no vertex is emptied.
void refine_association(Skeleton& s, std::span<const Vec3> surface, int rounds = 6) {
  const auto adj = s.adjacency();
  const std::size_t n = s.size();
  for (int r = 0; r < rounds; ++r) {
    std::vector<std::vector<std::int32_t>> next(n);
    std::vector<std::size_t> remaining(n);
    for (std::size_t v = 0; v < n; ++v) remaining[v] = s.vertices[v].points.size();
    bool moved = false;
    for (std::size_t v = 0; v < n; ++v) {
      for (auto p : s.vertices[v].points) {
        auto best = static_cast<std::int32_t>(v);
        double best_d = (surface[p] - s.vertices[v].position).squaredNorm();
        for (auto u : adj[v]) {
          const double d = (surface[p] - s.vertices[u].position).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = u;
          }
        }
        if (best != static_cast<std::int32_t>(v) && remaining[v] > 1) {
          --remaining[v];
          moved = true;
        } else {
          best = static_cast<std::int32_t>(v);
        }
        next[best].push_back(p);
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      std::sort(next[v].begin(), next[v].end());
      s.vertices[v].points = std::move(next[v]);
    }
    if (!moved) break;
  }
}

}  // namespace

Skeleton skeletonize(const Mesh& mesh, const ContractionParams& params, SkeletonizeStats* stats) {
  if (mesh.empty()) throw InputError("cannot skeletonize an empty mesh");
  if (!mesh.watertight()) {
    throw InputError("cannot skeletonize a mesh with " + std::to_string(mesh.open_edges().size()) +
                     " open edges");
  }
  if (mesh.component_count() != 1) throw InputError("cannot skeletonize a disconnected mesh");
  if (params.max_iterations < 1) throw InputError("max_iterations must be at least 1");

  const auto tris = mesh.triangles();
  const auto surface = mesh.vertices();
  const double max_edge = params.max_edge_length > 0 ? params.max_edge_length : 0.02 * mesh.bounds().diagonal();
  const double area0 = mesh.surface_area();
  const auto n = static_cast<Eigen::Index>(mesh.vertex_count());

  Points x(surface.begin(), surface.end());
  double wl = params.contraction_weight > 0 ? params.contraction_weight : kDefaultContractionWeight;
  const double wh2 = params.attraction_weight * params.attraction_weight;
  Eigen::SparseMatrix<double> attraction(n, n);
  attraction.setIdentity();
  attraction *= wh2;

  SkeletonizeStats local;
  double ratio = 1.0;
  Cotangents cots;
  while (local.iterations < params.max_iterations && ratio >= params.area_ratio) {
    update_cotangents(x, tris, cots, local.iterations == 0);
    const auto lap = cotangent_laplacian(cots, tris, x.size());
    const Eigen::SparseMatrix<double> system = (wl * wl) * Eigen::SparseMatrix<double>(lap.transpose() * lap) + attraction;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
    if (solver.info() != Eigen::Success) throw AlgorithmError("contraction system factorization failed");
    Eigen::MatrixXd rhs(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) rhs.row(i) = wh2 * x[i].transpose();
    const Eigen::MatrixXd sol = solver.solve(rhs);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = sol.row(i).transpose();
    ratio = surface_area(x, tris) / area0;
    wl *= params.contraction_growth;
    ++local.iterations;
  }
  local.final_area_ratio = ratio;
  if (ratio >= params.area_ratio) {
    throw AlgorithmError("mesh contraction did not converge after " + std::to_string(local.iterations) +
                         " iterations (area ratio " + std::to_string(ratio) + ")");
  }

  SurfaceCollapse surgery(x, tris);
  surgery.run();
  local.collapsed_vertices = surgery.collapses();
  if (stats != nullptr) *stats = local;

  CurveGraph g;
  g.nodes.resize(x.size());
  Aabb core_bounds;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& node = g.nodes[i];
    node.alive = surgery.alive()[i] != 0;
    if (!node.alive) continue;
    node.points = surgery.points()[i];
    node.nbrs = surgery.neighbors()[i];
    node.core = surgery.positions()[i];
    // The contracted position only fixes topology; the node sits in the middle of
    // the surface patch it stands for.
    node.pos = centroid_of(node.points, surface);
    core_bounds.extend(node.core);
  }

  // Everything contracted into one cluster: near-spherical input.
  if (core_bounds.diagonal() < max_edge) {
    Skeleton s = minimal_skeleton(mesh, 0.5 * max_edge);
    classify_vertices(s);
    return s;
  }

  regularize_chains(g, 0.5 * max_edge);
  prune(g, max_edge);

  // Patch centroids of caps and strongly bent regions can sit on or outside the
  // surface; slide those toward the contracted position.
  const double margin = 0.25 * max_edge;
  for (auto i : g.alive_ids()) {
    auto& node = g.nodes[i];
    const Vec3 from = node.pos;
    for (int step = 0; step <= 10; ++step) {
      const Vec3 p = from + (node.core - from) * (step / 10.0);
      if (contains(mesh, p) && closest_point(mesh, p).distance >= margin) {
        node.pos = p;
        break;
      }
      if (step == 10) node.pos = node.core;
    }
  }

  Skeleton s = to_skeleton(g);
  if (s.vertices.size() < 2) {
    s = minimal_skeleton(mesh, 0.5 * max_edge);
  } else {
    subdivide_long_edges(s, surface, max_edge);
    center_junctions(s, mesh, margin, 0.5 * max_edge);
    subdivide_long_edges(s, surface, max_edge);
    smooth_chains(s, mesh, margin);
    refine_association(s, surface);
  }
  classify_vertices(s);
  return s;
}

void classify_vertices(Skeleton& skeleton) {
  const auto deg = skeleton.degrees();
  for (std::size_t i = 0; i < skeleton.vertices.size(); ++i) {
    if (deg[i] == 0) throw AlgorithmError("skeleton malformed: vertex " + std::to_string(i) + " is isolated");
    skeleton.vertices[i].kind = deg[i] > 2 ? VertexKind::Branching
                                : deg[i] == 1 ? VertexKind::Endpoint
                                              : VertexKind::Connecting;
  }
}

std::vector<Segment> segment_skeleton(const Skeleton& skeleton) {
  const auto adj = skeleton.adjacency();
  const std::size_t n = skeleton.size();
  auto is_delimiter = [&](std::int32_t v) { return skeleton.vertices[v].kind != VertexKind::Connecting; };
  std::set<Edge> used;
  std::vector<char> seen(n, 0);
  std::vector<Segment> segments;

  for (std::size_t d = 0; d < n; ++d) {
    const auto start = static_cast<std::int32_t>(d);
    if (!is_delimiter(start)) continue;
    for (auto next : adj[start]) {
      if (used.contains(std::minmax(start, next))) continue;
      Segment seg;
      seg.ends[0] = start;
      std::int32_t prev = start;
      std::int32_t cur = next;
      used.insert(std::minmax(prev, cur));
      while (!is_delimiter(cur)) {
        seg.interior.push_back(cur);
        seen[cur] = 1;
        const std::int32_t step = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
        prev = cur;
        cur = step;
        used.insert(std::minmax(prev, cur));
      }
      seg.ends[1] = cur;
      segments.push_back(std::move(seg));
    }
  }
  // Components that are bare cycles of connecting vertices.
  for (std::size_t v = 0; v < n; ++v) {
    if (seen[v] || is_delimiter(static_cast<std::int32_t>(v))) continue;
    Segment seg;
    const auto start = static_cast<std::int32_t>(v);
    seg.ends = {start, start};
    seen[v] = 1;
    std::int32_t prev = start;
    std::int32_t cur = adj[start][0];
    while (cur != start) {
      seg.interior.push_back(cur);
      seen[cur] = 1;
      const std::int32_t step = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
      prev = cur;
      cur = step;
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<VertexKind> surface_partition(const Skeleton& skeleton, const Mesh& mesh) {
  std::vector<VertexKind> kinds(mesh.vertex_count(), VertexKind::Connecting);
  for (const auto& v : skeleton.vertices) {
    for (auto p : v.points) {
      if (p >= 0 && static_cast<std::size_t>(p) < kinds.size()) kinds[p] = v.kind;
    }
  }
  return kinds;
}

std::array<std::uint8_t, 3> kind_color(VertexKind kind) {
  switch (kind) {
    case VertexKind::Branching: return {0, 0, 255};
    case VertexKind::Endpoint: return {255, 0, 0};
    case VertexKind::Connecting: return {255, 255, 0};
  }
  return {255, 255, 0};
}

void write_skeleton(const Skeleton& skeleton, std::ostream& out) {
  out.precision(17);
  out << "skelgrasp-skeleton 1\n";
  out << "vertices " << skeleton.vertices.size() << '\n';
  for (std::size_t i = 0; i < skeleton.vertices.size(); ++i) {
    const auto& v = skeleton.vertices[i];
    out << i << ' ' << v.position.x() << ' ' << v.position.y() << ' ' << v.position.z() << ' '
        << to_string(v.kind) << ' ' << v.points.size();
    for (auto p : v.points) out << ' ' << p;
    out << '\n';
  }
  out << "edges " << skeleton.edges.size() << '\n';
  for (const auto& [a, b] : skeleton.edges) out << a << ' ' << b << '\n';
}

Skeleton read_skeleton(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "skelgrasp-skeleton" || version != 1) {
    throw InputError("not a skelgrasp skeleton file");
  }
  std::size_t nv = 0, ne = 0;
  if (!(in >> tag >> nv) || tag != "vertices") throw InputError("skeleton file: missing vertex table");
  Skeleton s;
  s.vertices.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    std::size_t id = 0, count = 0;
    std::string kind;
    auto& v = s.vertices[i];
    if (!(in >> id >> v.position.x() >> v.position.y() >> v.position.z() >> kind >> count) || id != i) {
      throw InputError("skeleton file: bad vertex row " + std::to_string(i));
    }
    v.kind = kind == "branching" ? VertexKind::Branching
             : kind == "endpoint" ? VertexKind::Endpoint
                                  : VertexKind::Connecting;
    v.points.resize(count);
    for (auto& p : v.points) {
      if (!(in >> p)) throw InputError("skeleton file: truncated point list");
    }
  }
  if (!(in >> tag >> ne) || tag != "edges") throw InputError("skeleton file: missing edge list");
  s.edges.resize(ne);
  for (auto& [a, b] : s.edges) {
    if (!(in >> a >> b) || a < 0 || b < 0 || static_cast<std::size_t>(std::max(a, b)) >= nv) {
      throw InputError("skeleton file: bad edge");
    }
  }
  return s;
}

void write_partition_ply(const Skeleton& skeleton, const Mesh& mesh, std::ostream& out) {
  const auto kinds = surface_partition(skeleton, mesh);
  out.precision(9);
  out << "ply\nformat ascii 1.0\ncomment skelgrasp segmentation\n";
  out << "element vertex " << mesh.vertex_count() << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangle_count() << '\n';
  out << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const auto& p = mesh.vertex(i);
    const auto c = kind_color(kinds[i]);
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2])
        << '\n';
  }
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_segments(const Skeleton& skeleton, const std::vector<Segment>& segments, std::ostream& out) {
  out << "skelgrasp-segments 1\n";
  out << "segments " << segments.size() << '\n';
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    out << i << ' ' << s.ends[0] << ' ' << to_string(skeleton.vertices[s.ends[0]].kind) << ' ' << s.ends[1]
        << ' ' << to_string(skeleton.vertices[s.ends[1]].kind) << ' ' << s.interior.size();
    for (auto v : s.interior) out << ' ' << v;
    out << '\n';
  }
}

}  // namespace skelgrasp

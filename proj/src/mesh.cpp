#include "skelgrasp/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "skelgrasp/bvh.hpp"
#include "skelgrasp/errors.hpp"

namespace skelgrasp {

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

std::vector<std::int32_t> merge_close_vertices(const std::vector<Vec3>& vertices, double tol,
                                               std::vector<Vec3>& merged) {
  std::vector<std::int32_t> remap(vertices.size(), -1);
  if (tol <= 0.0) {
    merged = vertices;
    for (std::size_t i = 0; i < vertices.size(); ++i) remap[i] = static_cast<std::int32_t>(i);
    return remap;
  }
  std::unordered_map<CellKey, std::vector<std::int32_t>, CellHash> grid;
  auto key_of = [tol](const Vec3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x() / tol)),
                   static_cast<std::int64_t>(std::floor(p.y() / tol)),
                   static_cast<std::int64_t>(std::floor(p.z() / tol))};
  };
  const double tol_sq = tol * tol;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec3& p = vertices[i];
    const CellKey k = key_of(p);
    std::int32_t found = -1;
    for (int dx = -1; dx <= 1 && found < 0; ++dx) {
      for (int dy = -1; dy <= 1 && found < 0; ++dy) {
        for (int dz = -1; dz <= 1 && found < 0; ++dz) {
          auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (std::int32_t rep : it->second) {
            if ((merged[rep] - p).squaredNorm() <= tol_sq) {
              found = rep;
              break;
            }
          }
        }
      }
    }
    if (found < 0) {
      found = static_cast<std::int32_t>(merged.size());
      merged.push_back(p);
      grid[k].push_back(found);
    }
    remap[i] = found;
  }
  return remap;
}

Edge make_edge(std::int32_t a, std::int32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Flips triangles so that every interior edge is traversed in opposite directions
// by its two triangles. Only meaningful for manifold meshes.
void orient_consistently(std::vector<Triangle>& tris) {
  std::map<Edge, std::vector<std::int32_t>> edge_faces;
  for (std::size_t f = 0; f < tris.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      edge_faces[make_edge(tris[f][k], tris[f][(k + 1) % 3])].push_back(static_cast<std::int32_t>(f));
    }
  }
  auto has_directed = [](const Triangle& t, std::int32_t a, std::int32_t b) {
    for (int k = 0; k < 3; ++k) {
      if (t[k] == a && t[(k + 1) % 3] == b) return true;
    }
    return false;
  };
  std::vector<char> visited(tris.size(), 0);
  for (std::size_t seed = 0; seed < tris.size(); ++seed) {
    if (visited[seed]) continue;
    visited[seed] = 1;
    std::queue<std::int32_t> q;
    q.push(static_cast<std::int32_t>(seed));
    while (!q.empty()) {
      const std::int32_t f = q.front();
      q.pop();
      for (int k = 0; k < 3; ++k) {
        const std::int32_t a = tris[f][k];
        const std::int32_t b = tris[f][(k + 1) % 3];
        const auto& faces = edge_faces[make_edge(a, b)];
        if (faces.size() != 2) continue;
        const std::int32_t g = faces[0] == f ? faces[1] : faces[0];
        if (visited[g]) continue;
        visited[g] = 1;
        if (has_directed(tris[g], a, b)) std::swap(tris[g][1], tris[g][2]);
        q.push(g);
      }
    }
  }
}

std::vector<std::vector<std::int32_t>> face_components(const std::vector<Triangle>& tris, std::size_t nv) {
  std::vector<std::int32_t> parent(nv);
  for (std::size_t i = 0; i < nv; ++i) parent[i] = static_cast<std::int32_t>(i);
  auto find = [&](std::int32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : tris) {
    for (int k = 1; k < 3; ++k) {
      const auto a = find(t[0]);
      const auto b = find(t[k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::map<std::int32_t, std::vector<std::int32_t>> groups;
  for (std::size_t f = 0; f < tris.size(); ++f) groups[find(tris[f][0])].push_back(static_cast<std::int32_t>(f));
  std::vector<std::vector<std::int32_t>> out;
  for (auto& [root, faces] : groups) out.push_back(std::move(faces));
  return out;
}

}  // namespace

Mesh::Mesh() : bvh_(std::make_unique<Bvh>()) {}

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles, const CleanupOptions& opts)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  finalize(opts);
}

Mesh::Mesh(const Mesh& o)
    : vertices_(o.vertices_),
      triangles_(o.triangles_),
      normals_(o.normals_),
      open_edges_(o.open_edges_),
      bounds_(o.bounds_),
      removed_degenerate_(o.removed_degenerate_),
      merged_vertices_(o.merged_vertices_),
      bvh_(std::make_unique<Bvh>(*o.bvh_)) {}

Mesh::Mesh(Mesh&&) noexcept = default;
Mesh& Mesh::operator=(Mesh&&) noexcept = default;
Mesh::~Mesh() = default;

Mesh& Mesh::operator=(const Mesh& o) {
  if (this != &o) {
    Mesh copy(o);
    *this = std::move(copy);
  }
  return *this;
}

void Mesh::finalize(const CleanupOptions& opts) {
  for (const auto& t : triangles_) {
    for (auto i : t) {
      if (i < 0 || static_cast<std::size_t>(i) >= vertices_.size()) {
        throw InputError("triangle references vertex " + std::to_string(i) + " but mesh has " +
                         std::to_string(vertices_.size()) + " vertices");
      }
    }
  }

  std::vector<Vec3> merged;
  const auto remap = merge_close_vertices(vertices_, opts.merge_tolerance, merged);
  merged_vertices_ = vertices_.size() - merged.size();

  std::vector<Triangle> kept;
  kept.reserve(triangles_.size());
  for (const auto& t : triangles_) {
    const Triangle r{remap[t[0]], remap[t[1]], remap[t[2]]};
    if (r[0] == r[1] || r[1] == r[2] || r[0] == r[2] ||
        triangle_area(merged[r[0]], merged[r[1]], merged[r[2]]) < opts.min_triangle_area) {
      ++removed_degenerate_;
      continue;
    }
    kept.push_back(r);
  }

  // Drop vertices no triangle references.
  std::vector<std::int32_t> compact(merged.size(), -1);
  vertices_.clear();
  for (auto& t : kept) {
    for (auto& i : t) {
      if (compact[i] < 0) {
        compact[i] = static_cast<std::int32_t>(vertices_.size());
        vertices_.push_back(merged[i]);
      }
      i = compact[i];
    }
  }
  triangles_ = std::move(kept);

  std::map<Edge, int> edge_count;
  for (const auto& t : triangles_) {
    for (int k = 0; k < 3; ++k) ++edge_count[make_edge(t[k], t[(k + 1) % 3])];
  }
  open_edges_.clear();
  for (const auto& [e, n] : edge_count) {
    if (n != 2) open_edges_.push_back(e);
  }

  if (open_edges_.empty() && !triangles_.empty()) {
    orient_consistently(triangles_);
    for (const auto& comp : face_components(triangles_, vertices_.size())) {
      double vol = 0.0;
      for (auto f : comp) {
        const auto& t = triangles_[f];
        vol += vertices_[t[0]].dot(vertices_[t[1]].cross(vertices_[t[2]]));
      }
      if (vol < 0.0) {
        for (auto f : comp) std::swap(triangles_[f][1], triangles_[f][2]);
      }
    }
  }

  normals_.resize(triangles_.size());
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto c = corners(f);
    normals_[f] = (c[1] - c[0]).cross(c[2] - c[0]).normalized();
  }
  bounds_ = Aabb{};
  for (const auto& v : vertices_) bounds_.extend(v);
  bvh_ = std::make_unique<Bvh>(vertices_, triangles_);
}

double Mesh::surface_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto c = corners(f);
    a += triangle_area(c[0], c[1], c[2]);
  }
  return a;
}

double Mesh::volume() const {
  double v = 0.0;
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto c = corners(f);
    v += c[0].dot(c[1].cross(c[2]));
  }
  return v / 6.0;
}

Vec3 Mesh::centroid() const {
  if (triangles_.empty()) return Vec3::Zero();
  if (watertight()) {
    Vec3 acc = Vec3::Zero();
    double vol = 0.0;
    for (std::size_t f = 0; f < triangles_.size(); ++f) {
      const auto c = corners(f);
      const double v = c[0].dot(c[1].cross(c[2]));
      acc += v * (c[0] + c[1] + c[2]) / 4.0;
      vol += v;
    }
    if (std::abs(vol) > 1e-12) return acc / vol;
  }
  Vec3 acc = Vec3::Zero();
  double area = 0.0;
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto c = corners(f);
    const double a = triangle_area(c[0], c[1], c[2]);
    acc += a * (c[0] + c[1] + c[2]) / 3.0;
    area += a;
  }
  return acc / area;
}

std::size_t Mesh::component_count() const {
  return face_components(triangles_, vertices_.size()).size();
}

std::vector<std::vector<std::int32_t>> Mesh::vertex_neighbors() const {
  std::vector<std::vector<std::int32_t>> adj(vertices_.size());
  for (const auto& t : triangles_) {
    for (int k = 0; k < 3; ++k) {
      adj[t[k]].push_back(t[(k + 1) % 3]);
      adj[t[(k + 1) % 3]].push_back(t[k]);
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

Mesh Mesh::transformed(const RigidPose& pose) const {
  std::vector<Vec3> v(vertices_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = pose.apply(vertices_[i]);
  CleanupOptions none;
  none.merge_tolerance = 0.0;
  none.min_triangle_area = 0.0;
  return Mesh(std::move(v), triangles_, none);
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

void read_off(std::istream& in, std::vector<Vec3>& verts, std::vector<Triangle>& tris) {
  // OFF puts one record per line, and vertex lines may carry colors; parse line-wise.
  std::vector<std::string> lines;
  {
    std::string line;
    while (std::getline(in, line)) {
      if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
    }
  }
  if (lines.empty()) throw InputError("empty OFF file");
  std::size_t li = 0;
  std::istringstream header(lines[li++]);
  std::string magic;
  header >> magic;
  if (magic.size() < 3 || magic.substr(magic.size() - 3) != "OFF") throw InputError("missing OFF header");
  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv >> nf)) {
    if (li >= lines.size()) throw InputError("truncated OFF header");
    std::istringstream counts(lines[li++]);
    if (!(counts >> nv >> nf)) throw InputError("bad OFF counts");
    counts >> ne;
  }
  if (nv < 0 || nf < 0) throw InputError("bad OFF counts");
  verts.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    if (li >= lines.size()) throw InputError("truncated OFF vertex list");
    std::istringstream ls(lines[li++]);
    double x, y, z;
    if (!(ls >> x >> y >> z)) throw InputError("bad OFF vertex line");
    verts.emplace_back(x, y, z);
  }
  for (long i = 0; i < nf; ++i) {
    if (li >= lines.size()) throw InputError("truncated OFF face list");
    std::istringstream ls(lines[li++]);
    int n;
    if (!(ls >> n) || n < 3) throw InputError("bad OFF face line");
    std::vector<std::int32_t> idx(n);
    for (int k = 0; k < n; ++k) {
      if (!(ls >> idx[k])) throw InputError("bad OFF face index");
    }
    for (int k = 1; k + 1 < n; ++k) tris.push_back({idx[0], idx[k], idx[k + 1]});
  }
}

void read_obj(std::istream& in, std::vector<Vec3>& verts, std::vector<Triangle>& tris) {
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw InputError("bad OBJ vertex line");
      verts.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::int32_t> idx;
      std::string tok;
      while (ls >> tok) {
        const long raw = std::stol(tok.substr(0, tok.find('/')));
        const long i = raw < 0 ? static_cast<long>(verts.size()) + raw : raw - 1;
        idx.push_back(static_cast<std::int32_t>(i));
      }
      if (idx.size() < 3) throw InputError("OBJ face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) tris.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
}

void read_stl(const std::filesystem::path& path, std::vector<Vec3>& verts, std::vector<Triangle>& tris) {
  std::ifstream in(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto push_tri = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    const auto base = static_cast<std::int32_t>(verts.size());
    verts.push_back(a);
    verts.push_back(b);
    verts.push_back(c);
    tris.push_back({base, base + 1, base + 2});
  };
  if (data.size() >= 84) {
    std::uint32_t n = 0;
    std::memcpy(&n, data.data() + 80, 4);
    if (data.size() == 84 + 50ull * n) {
      for (std::uint32_t i = 0; i < n; ++i) {
        const char* rec = data.data() + 84 + 50ull * i;
        std::array<Vec3, 3> c;
        for (int k = 0; k < 3; ++k) {
          float xyz[3];
          std::memcpy(xyz, rec + 12 + 12 * k, 12);
          c[k] = Vec3(xyz[0], xyz[1], xyz[2]);
        }
        push_tri(c[0], c[1], c[2]);
      }
      return;
    }
  }
  std::istringstream ss(data);
  std::string tok;
  std::vector<Vec3> pending;
  bool solid = false;
  while (ss >> tok) {
    if (tok == "solid") solid = true;
    if (tok == "vertex") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw InputError("bad STL vertex");
      pending.emplace_back(x, y, z);
      if (pending.size() == 3) {
        push_tri(pending[0], pending[1], pending[2]);
        pending.clear();
      }
    }
  }
  if (!solid) throw InputError("unrecognized STL file");
}

}  // namespace

Mesh load_mesh(const std::filesystem::path& path, double scale) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("cannot read mesh file: " + path.string());
  if (!(scale > 0.0)) throw InputError("mesh scale must be positive");
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  const std::string ext = lower_ext(path);
  try {
    if (ext == ".off") {
      std::ifstream in(path);
      read_off(in, verts, tris);
    } else if (ext == ".obj") {
      std::ifstream in(path);
      read_obj(in, verts, tris);
    } else if (ext == ".stl") {
      read_stl(path, verts, tris);
    } else {
      throw InputError("unsupported mesh format '" + ext + "' (expected .off, .obj or .stl)");
    }
  } catch (const std::invalid_argument&) {
    throw InputError("malformed mesh file: " + path.string());
  } catch (const std::out_of_range&) {
    throw InputError("malformed mesh file: " + path.string());
  }
  for (auto& v : verts) v *= scale;
  Mesh mesh(std::move(verts), std::move(tris));
  if (mesh.empty()) throw InputError("mesh is empty after cleanup: " + path.string());
  return mesh;
}

Mesh load_watertight_mesh(const std::filesystem::path& path, double scale) {
  Mesh mesh = load_mesh(path, scale);
  if (!mesh.watertight()) {
    std::ostringstream msg;
    msg << "mesh is not watertight: " << mesh.open_edges().size() << " open or non-manifold edges";
    const auto edges = mesh.open_edges();
    for (std::size_t i = 0; i < std::min<std::size_t>(edges.size(), 5); ++i) {
      msg << (i == 0 ? " (" : ", ") << edges[i].first << "-" << edges[i].second;
    }
    if (!edges.empty()) msg << (edges.size() > 5 ? ", ...)" : ")");
    throw InputError(msg.str());
  }
  return mesh;
}

void write_off(const Mesh& mesh, std::ostream& out) {
  out.precision(17);
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << " 0\n";
  for (const auto& v : mesh.vertices()) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_off(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_off(mesh, out);
}

}  // namespace skelgrasp

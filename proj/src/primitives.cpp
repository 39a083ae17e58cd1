#include "skelgrasp/primitives.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace skelgrasp::shapes {

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Mesh box(const Vec3& size, const Vec3& center, double cell) {
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  const Vec3 h = 0.5 * size;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    const int nu = cell > 0 ? std::max(1, static_cast<int>(std::ceil(size[u] / cell))) : 1;
    const int nv = cell > 0 ? std::max(1, static_cast<int>(std::ceil(size[v] / cell))) : 1;
    for (int sgn : {-1, 1}) {
      const auto base = static_cast<std::int32_t>(verts.size());
      for (int j = 0; j <= nv; ++j) {
        for (int i = 0; i <= nu; ++i) {
          Vec3 p;
          p[axis] = sgn * h[axis];
          p[u] = -h[u] + size[u] * i / nu;
          p[v] = -h[v] + size[v] * j / nv;
          verts.push_back(center + p);
        }
      }
      for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
          const std::int32_t a = base + j * (nu + 1) + i;
          const std::int32_t b = a + 1;
          const std::int32_t c = a + (nu + 1);
          const std::int32_t d = c + 1;
          tris.push_back({a, b, d});
          tris.push_back({a, d, c});
        }
      }
    }
  }
  // Winding is fixed up by the Mesh constructor (closed meshes get positive volume).
  return Mesh(std::move(verts), std::move(tris));
}

Mesh icosphere(double radius, int subdivisions, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, std::int32_t> mid;
    auto midpoint = [&](std::int32_t a, std::int32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const auto idx = static_cast<std::int32_t>(verts.size());
      verts.push_back((verts[a] + verts[b]).normalized());
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& tr : tris) {
      const auto ab = midpoint(tr[0], tr[1]);
      const auto bc = midpoint(tr[1], tr[2]);
      const auto ca = midpoint(tr[2], tr[0]);
      next.push_back({tr[0], ab, ca});
      next.push_back({tr[1], bc, ab});
      next.push_back({tr[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  for (auto& v : verts) v = center + radius * v;
  return Mesh(std::move(verts), std::move(tris));
}

namespace {

// Surface of revolution about z from a profile of (radius, z) samples running from
// the bottom pole/cap center to the top. Zero radius at an end closes it with a single vertex.
Mesh revolve(const std::vector<std::pair<double, double>>& profile, int segments) {
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  std::vector<std::int32_t> ring_start;
  for (const auto& [r, z] : profile) {
    ring_start.push_back(static_cast<std::int32_t>(verts.size()));
    if (r <= 0.0) {
      verts.emplace_back(0.0, 0.0, z);
      continue;
    }
    for (int k = 0; k < segments; ++k) {
      const double a = 2.0 * kPi * k / segments;
      verts.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
  }
  for (std::size_t i = 0; i + 1 < profile.size(); ++i) {
    const bool pole0 = profile[i].first <= 0.0;
    const bool pole1 = profile[i + 1].first <= 0.0;
    const auto s0 = ring_start[i];
    const auto s1 = ring_start[i + 1];
    for (int k = 0; k < segments; ++k) {
      const int k1 = (k + 1) % segments;
      if (pole0 && pole1) continue;
      if (pole0) {
        tris.push_back({s0, s1 + k1, s1 + k});
      } else if (pole1) {
        tris.push_back({s0 + k, s0 + k1, s1});
      } else {
        tris.push_back({s0 + k, s0 + k1, s1 + k1});
        tris.push_back({s0 + k, s1 + k1, s1 + k});
      }
    }
  }
  return Mesh(std::move(verts), std::move(tris));
}

}  // namespace

Mesh cylinder(double radius, double length, int segments) {
  const double edge = 2.0 * kPi * radius / segments;
  const int rings = std::max(1, static_cast<int>(std::round(length / edge)));
  const int cap_rings = std::max(1, static_cast<int>(std::round(radius / edge)));
  std::vector<std::pair<double, double>> profile;
  const double z0 = -0.5 * length;
  for (int j = 0; j < cap_rings; ++j) profile.emplace_back(radius * j / cap_rings, z0);
  for (int i = 0; i <= rings; ++i) profile.emplace_back(radius, z0 + length * i / rings);
  for (int j = cap_rings - 1; j >= 0; --j) profile.emplace_back(radius * j / cap_rings, -z0);
  return revolve(profile, segments);
}

Mesh capsule(double radius, double barrel_length, int segments) {
  const double edge = 2.0 * kPi * radius / segments;
  const int rings = std::max(1, static_cast<int>(std::round(barrel_length / edge)));
  const int lat = std::max(2, static_cast<int>(std::round(0.5 * kPi * radius / edge)));
  std::vector<std::pair<double, double>> profile;
  const double z0 = -0.5 * barrel_length;
  for (int j = 0; j < lat; ++j) {
    const double a = 0.5 * kPi * j / lat;  // from the pole
    profile.emplace_back(radius * std::sin(a), z0 - radius * std::cos(a));
  }
  for (int i = 0; i <= rings; ++i) profile.emplace_back(radius, z0 + barrel_length * i / rings);
  for (int j = lat - 1; j >= 0; --j) {
    const double a = 0.5 * kPi * j / lat;
    profile.emplace_back(radius * std::sin(a), -z0 + radius * std::cos(a));
  }
  return revolve(profile, segments);
}

Mesh from_signed_distance(const SignedDistance& sdf, const Aabb& bounds, double cell) {
  const Aabb box = bounds.inflated(2.0 * cell);
  const Vec3 ext = box.extent();
  const int nx = static_cast<int>(std::ceil(ext.x() / cell)) + 1;
  const int ny = static_cast<int>(std::ceil(ext.y() / cell)) + 1;
  const int nz = static_cast<int>(std::ceil(ext.z() / cell)) + 1;
  auto index = [&](int i, int j, int k) { return (static_cast<std::int64_t>(k) * ny + j) * nx + i; };
  auto position = [&](int i, int j, int k) -> Vec3 { return box.min + cell * Vec3(i, j, k); };

  std::vector<double> value(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double v = sdf(position(i, j, k));
        // Keep the surface off grid points so no vertex is shared by unrelated edges.
        if (std::abs(v) < 1e-9 * cell) v = 1e-9 * cell;
        value[index(i, j, k)] = v;
      }
    }
  }

  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  std::unordered_map<std::int64_t, std::unordered_map<std::int64_t, std::int32_t>> edge_vertex;
  auto vertex_on_edge = [&](std::int64_t a, const Vec3& pa, std::int64_t b, const Vec3& pb) {
    if (a > b) return std::int32_t(-1);  // callers pass ordered pairs
    auto& inner = edge_vertex[a];
    auto it = inner.find(b);
    if (it != inner.end()) return it->second;
    const double va = value[a];
    const double vb = value[b];
    const double t = std::clamp(va / (va - vb), 0.02, 0.98);
    const auto id = static_cast<std::int32_t>(verts.size());
    verts.push_back(pa + t * (pb - pa));
    inner.emplace(b, id);
    return id;
  };

  // Freudenthal split of each cube into six tetrahedra sharing a main diagonal. The
  // split is mirrored by cube parity so no diagonal is preferred; shared faces still match.
  static const int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                                  {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        std::int64_t id[8];
        Vec3 pos[8];
        for (int c = 0; c < 8; ++c) {
          const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
          id[c] = index(i + di, j + dj, k + dk);
          pos[c] = position(i + di, j + dj, k + dk);
        }
        const int flip = (i & 1) | ((j & 1) << 1) | ((k & 1) << 2);
        for (const auto& tet : kTets) {
          std::vector<int> inside, outside;
          for (int c : tet) (value[id[c ^ flip]] < 0.0 ? inside : outside).push_back(c ^ flip);
          if (inside.empty() || outside.empty()) continue;
          auto cut = [&](int u, int v) {
            return id[u] < id[v] ? vertex_on_edge(id[u], pos[u], id[v], pos[v])
                                 : vertex_on_edge(id[v], pos[v], id[u], pos[u]);
          };
          Vec3 in_c = Vec3::Zero(), out_c = Vec3::Zero();
          for (int c : inside) in_c += pos[c];
          for (int c : outside) out_c += pos[c];
          const Vec3 outward = out_c / outside.size() - in_c / inside.size();
          auto emit = [&](std::int32_t a, std::int32_t b, std::int32_t c) {
            const Vec3 n = (verts[b] - verts[a]).cross(verts[c] - verts[a]);
            if (n.dot(outward) < 0.0) std::swap(b, c);
            tris.push_back({a, b, c});
          };
          if (inside.size() == 1 || outside.size() == 1) {
            const auto& lone = inside.size() == 1 ? inside : outside;
            const auto& rest = inside.size() == 1 ? outside : inside;
            emit(cut(lone[0], rest[0]), cut(lone[0], rest[1]), cut(lone[0], rest[2]));
          } else {
            const auto a = cut(inside[0], outside[0]);
            const auto b = cut(inside[0], outside[1]);
            const auto c = cut(inside[1], outside[1]);
            const auto d = cut(inside[1], outside[0]);
            emit(a, b, c);
            emit(a, c, d);
          }
        }
      }
    }
  }
  // Relax the marching-tetrahedra vertices tangentially and project them back onto
  // the level set; raw output is full of slivers.
  Mesh raw(std::move(verts), std::move(tris));
  std::vector<Vec3> pts(raw.vertices().begin(), raw.vertices().end());
  const auto adj = raw.vertex_neighbors();
  auto project = [&](Vec3 p) {
    for (int it = 0; it < 3; ++it) {
      const double h = 1e-3 * cell;
      const double f = sdf(p);
      const Vec3 g((sdf(p + h * Vec3::UnitX()) - sdf(p - h * Vec3::UnitX())) / (2 * h),
                   (sdf(p + h * Vec3::UnitY()) - sdf(p - h * Vec3::UnitY())) / (2 * h),
                   (sdf(p + h * Vec3::UnitZ()) - sdf(p - h * Vec3::UnitZ())) / (2 * h));
      const double gn = g.squaredNorm();
      if (gn < 1e-12) break;
      p -= f * g / gn;
    }
    return p;
  };
  for (int iter = 0; iter < 6; ++iter) {
    std::vector<Vec3> next(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Vec3 avg = Vec3::Zero();
      for (auto j : adj[i]) avg += pts[j];
      avg /= static_cast<double>(adj[i].size());
      next[i] = project(0.5 * pts[i] + 0.5 * avg);
    }
    pts = std::move(next);
  }
  return Mesh(std::move(pts), std::vector<Triangle>(raw.triangles().begin(), raw.triangles().end()));
}

Mesh y_tube(double radius, double arm_length, double cell) {
  std::array<Vec3, 3> tips;
  for (int i = 0; i < 3; ++i) {
    const double a = kPi / 2.0 + 2.0 * kPi * i / 3.0;
    tips[i] = arm_length * Vec3(std::cos(a), std::sin(a), 0.0);
  }
  auto sdf = [tips, radius](const Vec3& p) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& t : tips) d = std::min(d, segment_distance(p, Vec3::Zero(), t) - radius);
    return d;
  };
  Aabb b;
  for (const auto& t : tips) b.extend(t);
  b.extend(Vec3::Zero());
  return from_signed_distance(sdf, b.inflated(radius), cell);
}

Mesh dumbbell(double ball_radius, double bar_radius, double bar_length, double cell) {
  const Vec3 a(-0.5 * bar_length, 0, 0);
  const Vec3 b(0.5 * bar_length, 0, 0);
  auto sdf = [=](const Vec3& p) {
    const double balls = std::min((p - a).norm(), (p - b).norm()) - ball_radius;
    return std::min(balls, segment_distance(p, a, b) - bar_radius);
  };
  Aabb box;
  box.extend(a);
  box.extend(b);
  return from_signed_distance(sdf, box.inflated(ball_radius), cell);
}

std::vector<NamedMesh> fixture_corpus() {
  std::vector<NamedMesh> out;
  out.push_back({"cylinder", cylinder(10.0, 100.0, 48)});
  out.push_back({"box", box(Vec3(30.0, 30.0, 120.0), Vec3::Zero(), 3.0)});
  out.push_back({"y_tube", y_tube()});
  out.push_back({"dumbbell", dumbbell(18.0, 7.0, 80.0, 2.2)});
  out.push_back({"capsule", capsule(12.0, 80.0, 48)});
  return out;
}

}  // namespace skelgrasp::shapes

#include "skelgrasp/grasp_quality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <unordered_map>

#include "skelgrasp/errors.hpp"

namespace skelgrasp {

double torque_scale(const Mesh& object, const Vec3& centroid) {
  double r = 0.0;
  for (const auto& v : object.vertices()) r = std::max(r, (v - centroid).norm());
  return r;
}

WrenchSet build_wrenches(std::span<const Contact> contacts, double mu, int m, const Vec3& centroid, double rho) {
  if (contacts.empty()) throw InputError("build_wrenches: no contacts");
  if (!(mu > 0.0)) throw InputError("build_wrenches: friction coefficient must be positive");
  if (m < 3) throw InputError("build_wrenches: cone needs at least 3 edges");
  if (!(rho > 0.0)) throw InputError("build_wrenches: torque scale must be positive");

  WrenchSet set;
  set.mu = mu;
  set.m = m;
  set.centroid = centroid;
  set.rho = rho;
  set.wrenches.reserve(contacts.size() * static_cast<std::size_t>(m));
  const double scale = 1.0 / std::sqrt(1.0 + mu * mu);
  for (const auto& c : contacts) {
    const double len = c.normal.norm();
    if (!(len > 1e-12)) throw InputError("build_wrenches: contact with zero normal");
    const Vec3 inward = -c.normal / len;
    const Vec3 t1 = any_perpendicular(inward);
    const Vec3 t2 = inward.cross(t1);
    const Vec3 arm = c.position - centroid;
    for (int j = 0; j < m; ++j) {
      const double a = 2.0 * kPi * j / m;
      const Vec3 f = scale * (inward + mu * (std::cos(a) * t1 + std::sin(a) * t2));
      Wrench w;
      w.head<3>() = f;
      w.tail<3>() = arm.cross(f) / rho;
      set.wrenches.push_back(w);
    }
  }
  return set;
}

namespace {

constexpr int kDim = 6;
using Ridge = std::array<int, kDim - 1>;

struct RidgeHash {
  std::size_t operator()(const Ridge& r) const {
    std::size_t h = 0;
    for (int v : r) h = h * 1000003u + static_cast<std::size_t>(v);
    return h;
  }
};

/// Incremental (quickhull style) convex hull in 6-D. Facets keep outward unit normals
/// and offsets so that n.x <= b holds for every hull point.
class Hull6 {
 public:
  explicit Hull6(std::span<const Wrench> pts) : pts_(pts) {
    double s = 0.0;
    for (const auto& p : pts_) s = std::max(s, p.cwiseAbs().maxCoeff());
    eps_ = 1e-10 * std::max(s, 1.0);
  }

  /// False when the points do not span 6-D.
  bool build() {
    std::array<int, kDim + 1> simplex{};
    if (!initial_simplex(simplex)) return false;
    interior_.setZero();
    for (int i : simplex) interior_ += pts_[i];
    interior_ /= kDim + 1;

    for (int k = 0; k <= kDim; ++k) {
      Facet f;
      int pos = 0;
      for (int j = 0; j <= kDim; ++j)
        if (j != k) f.v[pos++] = simplex[j];
      if (!plane(f)) return false;
      facets_.push_back(f);
    }
    // Facet k omits simplex[k]; it meets facet j across the ridge that also omits simplex[j].
    for (int k = 0; k <= kDim; ++k)
      for (int pos = 0; pos < kDim; ++pos) {
        const int j = static_cast<int>(std::find(simplex.begin(), simplex.end(), facets_[k].v[pos]) - simplex.begin());
        facets_[k].nb[pos] = j;
      }

    std::vector<char> used(pts_.size(), 0);
    for (int i : simplex) used[i] = 1;
    std::vector<int> rest;
    for (std::size_t i = 0; i < pts_.size(); ++i)
      if (!used[i]) rest.push_back(static_cast<int>(i));
    std::vector<int> all(facets_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    assign(rest, all);

    while (!pending_.empty()) {
      const int fi = pending_.back();
      pending_.pop_back();
      if (facets_[fi].alive && !facets_[fi].outside.empty()) add_point(fi);
    }
    return true;
  }

  /// True iff no point lies more than `tol` outside a facet.
  [[nodiscard]] bool valid(double tol) const {
    for (const auto& f : facets_) {
      if (!f.alive) continue;
      for (std::size_t i = 0; i < pts_.size(); ++i)
        if (height(f, static_cast<int>(i)) > tol) return false;
    }
    return true;
  }

  /// Smallest facet offset; positive iff the origin is strictly inside.
  [[nodiscard]] double min_offset() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& f : facets_)
      if (f.alive) m = std::min(m, f.b);
    return m;
  }

 private:
  struct Facet {
    std::array<int, kDim> v{};
    std::array<int, kDim> nb{};  ///< neighbor across the ridge without v[k]
    Wrench n = Wrench::Zero();
    double b = 0.0;
    std::vector<int> outside;
    bool alive = true;
    int seen = 0;
    int visible = 0;
  };

  [[nodiscard]] double height(const Facet& f, int p) const { return f.n.dot(pts_[p]) - f.b; }

  bool initial_simplex(std::array<int, kDim + 1>& out) const {
    Wrench mean = Wrench::Zero();
    for (const auto& p : pts_) mean += p;
    mean /= static_cast<double>(pts_.size());
    int first = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const double d = (pts_[i] - mean).squaredNorm();
      if (d > best) best = d, first = static_cast<int>(i);
    }
    out[0] = first;
    std::vector<Wrench> basis;
    for (int k = 1; k <= kDim; ++k) {
      int pick = -1;
      double far = 0.0;
      for (std::size_t i = 0; i < pts_.size(); ++i) {
        Wrench d = pts_[i] - pts_[first];
        for (const auto& b : basis) d -= d.dot(b) * b;
        const double len = d.norm();
        if (len > far) far = len, pick = static_cast<int>(i);
      }
      if (pick < 0 || far < 1e3 * eps_) return false;
      Wrench d = pts_[pick] - pts_[first];
      for (const auto& b : basis) d -= d.dot(b) * b;
      basis.push_back(d.normalized());
      out[k] = pick;
    }
    return true;
  }

  bool plane(Facet& f) const {
    // Orthonormalize the edge vectors (Gram-Schmidt, two passes), then take the unit
    // axis least covered by their span and keep its residual as the normal.
    std::array<Wrench, kDim - 1> e;
    double smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kDim - 1; ++i) {
      Wrench d = pts_[f.v[i + 1]] - pts_[f.v[0]];
      const double len0 = d.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k < i; ++k) d -= d.dot(e[k]) * e[k];
      const double len = d.norm();
      smallest = std::min(smallest, len0 > 0.0 ? len / len0 : 0.0);
      e[i] = len > 0.0 ? Wrench(d / len) : Wrench::Zero();
    }
    int axis = 0;
    double cover = std::numeric_limits<double>::infinity();
    for (int a = 0; a < kDim; ++a) {
      double c = 0.0;
      for (const auto& b : e) c += b(a) * b(a);
      if (c < cover) cover = c, axis = a;
    }
    Wrench n = Wrench::Unit(axis);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : e) n -= n.dot(b) * b;
    f.n = n.normalized();
    f.b = f.n.dot(pts_[f.v[0]]);
    if (f.n.dot(interior_) > f.b) {
      f.n = -f.n;
      f.b = -f.b;
    }
    return smallest > 1e-12;
  }

  void assign(const std::vector<int>& points, const std::vector<int>& candidates) {
    for (int p : points) {
      int best = -1;
      double hb = eps_;
      for (int fi : candidates) {
        const double h = height(facets_[fi], p);
        if (h > hb) hb = h, best = fi;
      }
      if (best < 0) continue;
      if (facets_[best].outside.empty()) pending_.push_back(best);
      facets_[best].outside.push_back(p);
    }
  }

  void add_point(int start) {
    auto& sf = facets_[start];
    int eye = sf.outside.front();
    double hmax = height(sf, eye);
    for (int p : sf.outside) {
      const double h = height(sf, p);
      if (h > hmax) hmax = h, eye = p;
    }

    ++stamp_;
    std::vector<int> visible{start};
    facets_[start].seen = facets_[start].visible = stamp_;
    for (std::size_t q = 0; q < visible.size(); ++q) {
      for (int g : facets_[visible[q]].nb) {
        if (facets_[g].seen == stamp_) continue;
        facets_[g].seen = stamp_;
        if (height(facets_[g], eye) > eps_) {
          facets_[g].visible = stamp_;
          visible.push_back(g);
        }
      }
    }

    std::vector<int> orphans;
    for (int fi : visible) {
      for (int p : facets_[fi].outside)
        if (p != eye) orphans.push_back(p);
      facets_[fi].outside.clear();
    }

    std::vector<int> created;
    std::unordered_map<Ridge, std::pair<int, int>, RidgeHash> open;
    for (int fi : visible) {
      for (int k = 0; k < kDim; ++k) {
        const int g = facets_[fi].nb[k];
        if (facets_[g].visible == stamp_) continue;
        Facet nf;
        nf.v = facets_[fi].v;
        nf.v[k] = eye;
        plane(nf);
        nf.nb[k] = g;
        const int id = static_cast<int>(facets_.size());
        for (int& back : facets_[g].nb)
          if (back == fi) back = id;
        for (int i = 0; i < kDim; ++i) {
          if (i == k) continue;
          Ridge r{};
          int pos = 0;
          for (int j = 0; j < kDim; ++j)
            if (j != i) r[pos++] = nf.v[j];
          std::sort(r.begin(), r.end());
          auto it = open.find(r);
          if (it == open.end()) {
            open.emplace(r, std::make_pair(id, i));
          } else {
            nf.nb[i] = it->second.first;
            facets_[it->second.first].nb[it->second.second] = id;
            open.erase(it);
          }
        }
        facets_.push_back(std::move(nf));
        created.push_back(id);
      }
    }
    for (int fi : visible) facets_[fi].alive = false;
    assign(orphans, created);
  }

  std::span<const Wrench> pts_;
  std::vector<Facet> facets_;
  std::vector<int> pending_;
  int stamp_ = 0;
  Wrench interior_ = Wrench::Zero();
  double eps_ = 1e-10;
};

}  // namespace

QualityResult evaluate(std::span<const Wrench> wrenches) {
  if (wrenches.size() < kDim + 1) return {};
  double scale = 1.0;
  for (const auto& w : wrenches) scale = std::max(scale, w.cwiseAbs().maxCoeff());
  // Symmetric grasps give many coplanar wrenches and can fold the hull. A fold shows up
  // as points outside a facet; rebuild on slightly joggled points until none remain.
  std::vector<Wrench> joggled;
  std::mt19937_64 rng(0x6a09e667f3bcc908ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int attempt = 0; attempt <= 7; ++attempt) {
    const double joggle = attempt == 0 ? 0.0 : 1e-10 * scale * std::pow(10.0, attempt - 1);
    std::span<const Wrench> pts = wrenches;
    if (joggle > 0.0) {
      joggled.assign(wrenches.begin(), wrenches.end());
      for (auto& w : joggled)
        for (int k = 0; k < kDim; ++k) w(k) += joggle * unit(rng);
      pts = joggled;
    }
    Hull6 hull(pts);
    if (!hull.build()) return {};
    if (!hull.valid(1e-9 * scale + 2.0 * joggle)) continue;
    const double eps = hull.min_offset() - joggle;
    if (!(eps > kEpsilonTolerance)) return {};
    return {true, eps};
  }
  throw AlgorithmError("wrench hull construction failed on degenerate input");
}

std::vector<Contact> hull_contacts(std::span<const Contact> contacts) {
  // For a fixed force the wrench is affine in the position, so a contact inside the convex
  // hull of coplanar contacts sharing its normal only adds interior wrenches.
  std::vector<Contact> out;
  std::vector<char> done(contacts.size(), 0);
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    if (done[i]) continue;
    const Vec3 n = contacts[i].normal.normalized();
    const double off = n.dot(contacts[i].position);
    std::vector<std::size_t> group;
    for (std::size_t j = i; j < contacts.size(); ++j) {
      if (done[j]) continue;
      const Vec3 nj = contacts[j].normal.normalized();
      if ((nj - n).norm() < 1e-9 && std::abs(n.dot(contacts[j].position) - off) < 1e-6) {
        group.push_back(j);
        done[j] = 1;
      }
    }
    if (group.size() <= 2) {
      for (auto g : group) out.push_back(contacts[g]);
      continue;
    }
    const Vec3 u = any_perpendicular(n);
    const Vec3 v = n.cross(u);
    auto coords = [&](std::size_t g) { return Vec2(contacts[g].position.dot(u), contacts[g].position.dot(v)); };
    std::sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
      const Vec2 pa = coords(a), pb = coords(b);
      return pa.x() < pb.x() || (pa.x() == pb.x() && (pa.y() < pb.y() || (pa.y() == pb.y() && a < b)));
    });
    auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
      const Vec2 po = coords(o), pa = coords(a) - po, pb = coords(b) - po;
      return pa.x() * pb.y() - pa.y() * pb.x();
    };
    // Andrew's monotone chain; collinear points are dropped.
    std::vector<std::size_t> hull(2 * group.size());
    std::size_t k = 0;
    for (std::size_t g : group) {
      while (k >= 2 && cross(hull[k - 2], hull[k - 1], g) <= 1e-9) --k;
      hull[k++] = g;
    }
    for (std::size_t t = group.size() - 1, lower = k + 1; t-- > 0;) {
      while (k >= lower && cross(hull[k - 2], hull[k - 1], group[t]) <= 1e-9) --k;
      hull[k++] = group[t];
    }
    hull.resize(k > 1 ? k - 1 : k);
    std::sort(hull.begin(), hull.end());
    for (auto g : hull) out.push_back(contacts[g]);
  }
  return out;
}

QualityResult grasp_quality(std::span<const Contact> contacts, const Mesh& object, double mu, int m) {
  if (contacts.empty()) return {};
  const Vec3 c = object.centroid();
  const double rho = torque_scale(object, c);
  if (!(rho > 0.0)) return {};
  const auto reduced = hull_contacts(contacts);
  return evaluate(build_wrenches(reduced, mu, m, c, rho));
}

}  // namespace skelgrasp

#pragma once

#include <span>
#include <vector>

#include "skelgrasp/geometry.hpp"

namespace skelgrasp {

/// Static AABB tree over triangles, built by median split on the longest axis.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::int32_t left = -1;   ///< child index, -1 for leaves
    std::int32_t right = -1;
    std::int32_t first = 0;   ///< into primitive order, leaves only
    std::int32_t count = 0;
    [[nodiscard]] bool leaf() const { return left < 0; }
  };

  Bvh() = default;
  Bvh(std::span<const Vec3> vertices, std::span<const Triangle> triangles, int leaf_size = 4);

  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] std::span<const std::int32_t> leaf_triangles(const Node& n) const {
    return std::span<const std::int32_t>(order_).subspan(n.first, n.count);
  }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }

 private:
  std::int32_t build(std::vector<Aabb>& boxes, std::vector<Vec3>& centers, int first, int count, int leaf_size);

  std::vector<Node> nodes_;
  std::vector<std::int32_t> order_;
};

}  // namespace skelgrasp

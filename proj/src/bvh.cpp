#include "skelgrasp/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace skelgrasp {

Bvh::Bvh(std::span<const Vec3> vertices, std::span<const Triangle> triangles, int leaf_size) {
  if (triangles.empty()) return;
  std::vector<Aabb> boxes(triangles.size());
  std::vector<Vec3> centers(triangles.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (int k = 0; k < 3; ++k) boxes[i].extend(vertices[triangles[i][k]]);
    centers[i] = boxes[i].center();
  }
  order_.resize(triangles.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * triangles.size() / std::max(1, leaf_size) + 1);
  build(boxes, centers, 0, static_cast<int>(triangles.size()), std::max(1, leaf_size));
}

std::int32_t Bvh::build(std::vector<Aabb>& boxes, std::vector<Vec3>& centers, int first, int count,
                        int leaf_size) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centroid_box;
  for (int i = first; i < first + count; ++i) {
    box.extend(boxes[order_[i]]);
    centroid_box.extend(centers[order_[i]]);
  }
  nodes_[index].box = box;
  if (count <= leaf_size) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.extent().maxCoeff(&axis);
  const int mid = first + count / 2;
  // Ties broken by triangle index so the tree is deterministic.
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::int32_t a, std::int32_t b) {
                     const double ca = centers[a][axis];
                     const double cb = centers[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::int32_t left = build(boxes, centers, first, mid - first, leaf_size);
  const std::int32_t right = build(boxes, centers, mid, first + count - mid, leaf_size);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

}  // namespace skelgrasp

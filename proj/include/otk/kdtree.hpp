/* otk/kdtree.hpp
 *
 * 3-d tree over physical (z, y, x) coordinates in micrometers, used for
 * the border distance transform, branch adjacency assignment, marker
 * deduplication, flow anchor queries, and label propagation.
 *
 * Queries are deterministic: exact distance ties resolve by an optional
 * caller-supplied rank, then by point index, and subtree pruning uses <=
 * so equidistant candidates are always visited.
 */

#ifndef OTK_KDTREE_HPP
#define OTK_KDTREE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace otk {

class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(std::vector<Eigen::Vector3d> points)
      : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(points_.size());
    if (!points_.empty())
      root_ = build(0, static_cast<int>(points_.size()), 0);
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::Vector3d& point(int i) const { return points_[i]; }

  struct Hit {
    int index = -1;
    double dist2 = std::numeric_limits<double>::infinity();
  };

  // Nearest point; ties prefer lower rank[i] (when given), then lower index.
  Hit nearest(const Eigen::Vector3d& q,
              std::span<const std::uint32_t> rank = {}) const {
    Hit best;
    if (root_ >= 0) search_nearest(root_, q, rank, best);
    return best;
  }

  // Indices of all points with |p - q| <= r, ascending.
  std::vector<int> radius(const Eigen::Vector3d& q, double r) const {
    return radius2(q, r * r);
  }

  // Same with an exact squared radius (needed where the boundary matters,
  // e.g. the inclusive sqrt(3) voxel neighborhood).
  std::vector<int> radius2(const Eigen::Vector3d& q, double r2) const {
    std::vector<int> out;
    if (root_ >= 0) search_radius(root_, q, r2, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    int point = -1;
    int left = -1;
    int right = -1;
    int axis = 0;
  };

  int build(int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid,
                     order_.begin() + hi, [&](int a, int b) {
                       if (points_[a][axis] != points_[b][axis])
                         return points_[a][axis] < points_[b][axis];
                       return a < b;
                     });
    Node n;
    n.point = order_[mid];
    n.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  bool better(int cand, double d2, std::span<const std::uint32_t> rank,
              const Hit& best) const {
    if (d2 != best.dist2) return d2 < best.dist2;
    if (best.index < 0) return true;
    if (!rank.empty() && rank[cand] != rank[best.index])
      return rank[cand] < rank[best.index];
    return cand < best.index;
  }

  void search_nearest(int node, const Eigen::Vector3d& q,
                      std::span<const std::uint32_t> rank, Hit& best) const {
    const Node& n = nodes_[node];
    const Eigen::Vector3d& p = points_[n.point];
    const double d2 = (p - q).squaredNorm();
    if (better(n.point, d2, rank, best)) {
      best.index = n.point;
      best.dist2 = d2;
    }
    const double delta = q[n.axis] - p[n.axis];
    const int near = delta < 0 ? n.left : n.right;
    const int far = delta < 0 ? n.right : n.left;
    if (near >= 0) search_nearest(near, q, rank, best);
    if (far >= 0 && delta * delta <= best.dist2)
      search_nearest(far, q, rank, best);
  }

  void search_radius(int node, const Eigen::Vector3d& q, double r2,
                     std::vector<int>& out) const {
    const Node& n = nodes_[node];
    const Eigen::Vector3d& p = points_[n.point];
    if ((p - q).squaredNorm() <= r2) out.push_back(n.point);
    const double delta = q[n.axis] - p[n.axis];
    const int near = delta < 0 ? n.left : n.right;
    const int far = delta < 0 ? n.right : n.left;
    if (near >= 0) search_radius(near, q, r2, out);
    if (far >= 0 && delta * delta <= r2) search_radius(far, q, r2, out);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace otk

#endif  // OTK_KDTREE_HPP

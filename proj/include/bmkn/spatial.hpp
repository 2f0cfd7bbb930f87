#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bmkn {

/// Static kd-tree over 3D points. Deterministic: splits use (coordinate,
/// index) ordering and nearest() breaks distance ties by smaller index, so
/// results match a brute-force scan exactly.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points) {
    points_.assign(points.begin(), points.end());
    index_.resize(points_.size());
    for (size_t i = 0; i < index_.size(); ++i) index_[i] = int(i);
    if (!points_.empty()) root_ = build(0, int(points_.size()), 0);
  }

  bool empty() const { return points_.empty(); }

  /// Index and squared distance of the nearest point.
  std::pair<int, double> nearest(const Eigen::Vector3d& q) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, q, best, best_d2);
    return {best, best_d2};
  }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(index_.begin() + lo, index_.begin() + mid,
                     index_.begin() + hi, [&](int a, int b) {
                       const double ca = points_[a][axis], cb = points_[b][axis];
                       return ca != cb ? ca < cb : a < b;
                     });
    Node n;
    n.point = index_[mid];
    n.axis = axis;
    const int self = int(nodes_.size());
    nodes_.push_back(n);
    const int left = build(lo, mid, depth + 1);
    const int right = build(mid + 1, hi, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(int node, const Eigen::Vector3d& q, int& best,
              double& best_d2) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Eigen::Vector3d& p = points_[n.point];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
      best_d2 = d2;
      best = n.point;
    }
    const double diff = q[n.axis] - p[n.axis];
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best, best_d2);
    if (diff * diff <= best_d2) search(far, q, best, best_d2);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace bmkn

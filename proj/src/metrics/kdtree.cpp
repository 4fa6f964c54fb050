#include "tdcrflow/metrics/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/simd/kernels.hpp"

namespace tdcr::metrics {

namespace {
constexpr std::size_t kChunk = 32;
}

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : leaf_size_(std::clamp<std::size_t>(leaf_size, 1, kChunk)) {
  TDCR_REQUIRE(!points.empty(), "KdTree: empty point set");
  TDCR_REQUIRE(points.size() < std::numeric_limits<std::uint32_t>::max(), "KdTree: too many points");
  std::vector<Point3> pts(points.begin(), points.end());
  ids_.resize(pts.size());
  std::iota(ids_.begin(), ids_.end(), 0u);
  build(0, static_cast<std::uint32_t>(pts.size()), pts);
  xs_.resize(pts.size());
  ys_.resize(pts.size());
  zs_.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    xs_[i] = pts[i][0];
    ys_[i] = pts[i][1];
    zs_[i] = pts[i][2];
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::vector<Point3>& pts) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Point3 lo = pts[begin], hi = pts[begin];
  for (std::uint32_t i = begin; i < end; ++i)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], pts[i][a]);
      hi[a] = std::max(hi[a], pts[i][a]);
    }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  // Sort a permutation so points and ids move together.
  std::vector<std::uint32_t> perm(end - begin);
  std::iota(perm.begin(), perm.end(), begin);
  const std::uint32_t mid = (end - begin) / 2;
  std::nth_element(perm.begin(), perm.begin() + mid, perm.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return pts[a][axis] < pts[b][axis]; });
  std::vector<Point3> tmp_p(perm.size());
  std::vector<std::uint32_t> tmp_i(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    tmp_p[k] = pts[perm[k]];
    tmp_i[k] = ids_[perm[k]];
  }
  std::copy(tmp_p.begin(), tmp_p.end(), pts.begin() + begin);
  std::copy(tmp_i.begin(), tmp_i.end(), ids_.begin() + begin);

  nodes_[id].axis = static_cast<std::uint8_t>(axis);
  nodes_[id].split = pts[begin + mid][axis];
  const std::int32_t l = build(begin, begin + mid, pts);
  const std::int32_t r = build(begin + mid, end, pts);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

void KdTree::search(std::int32_t node_id, const Point3& q, double& best, std::size_t& arg) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    // Leaves of coincident points can exceed the leaf size; scan in chunks.
    double d[kChunk];
    for (std::size_t b = node.begin; b < node.end; b += kChunk) {
      const std::size_t n = std::min<std::size_t>(kChunk, node.end - b);
      simd::kernels().sq_dist_row(q.data(), xs_.data() + b, ys_.data() + b, zs_.data() + b, n, d);
      for (std::size_t k = 0; k < n; ++k)
        if (d[k] < best) {
          best = d[k];
          arg = b + k;
        }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, best, arg);
  // Rounded |q - p| along the axis is never below rounded |q - split| for a
  // point on the far side, so this prune cannot drop the true minimum.
  if (diff * diff <= best) search(far, q, best, arg);
}

double KdTree::nearest_sq(const Point3& q) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  search(0, q, best, arg);
  return best;
}

std::size_t KdTree::nearest_index(const Point3& q) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  search(0, q, best, arg);
  return ids_[arg];
}

}  // namespace tdcr::metrics

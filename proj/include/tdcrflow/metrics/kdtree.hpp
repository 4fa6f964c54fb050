#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tdcr::metrics {

using Point3 = std::array<double, 3>;

// Static 3-d tree for exact nearest-neighbour queries. Leaves keep their
// points in structure-of-arrays form so the distance kernel can scan them.
// Queries are const and safe to run concurrently.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 12);

  // Smallest squared distance from q to any stored point, computed as
  // dx*dx + dy*dy + dz*dz (the same expression a brute-force scan uses).
  double nearest_sq(const Point3& q) const;
  // Index of a point attaining nearest_sq(q).
  std::size_t nearest_index(const Point3& q) const;

  std::size_t size() const { return xs_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;   // slice of the permuted arrays
    std::int32_t left = -1, right = -1;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Point3>& pts);
  void search(std::int32_t node, const Point3& q, double& best, std::size_t& arg) const;

  std::vector<Node> nodes_;
  std::vector<double> xs_, ys_, zs_;
  std::vector<std::uint32_t> ids_;
  std::size_t leaf_size_;
};

}  // namespace tdcr::metrics

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tdcrflow/metrics/kdtree.hpp"
#include "tdcrflow/pointcloud/point_cloud.hpp"

namespace tdcr::metrics {

inline constexpr std::size_t kExactEmdCap = 1024;

// XYZ channels of a cloud; colors are ignored by every metric.
std::vector<Point3> xyz_of(const pc::PointCloud& cloud);

// Squared-L2 chamfer: mean nearest squared distance P->Q plus Q->P.
double chamfer(std::span<const Point3> p, std::span<const Point3> q);
double chamfer(const pc::PointCloud& p, const pc::PointCloud& q);

// Mean Euclidean cost of the optimal bijection, by the Hungarian method.
// Requires |P| == |Q| <= cap; larger inputs are refused with a pointer to
// emd_approx.
double emd_exact(std::span<const Point3> p, std::span<const Point3> q, std::size_t cap = kExactEmdCap);

// Optimal assignment for a dense n x n cost matrix (row-major). Returns
// col_of_row.
std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n);

struct AuctionResult {
  double emd = 0.0;          // mean cost of the final assignment
  double epsilon = 0.0;      // final bidding increment
  std::size_t bids = 0;
  std::vector<std::size_t> assignment;  // col_of_row
};

// Epsilon-scaling forward auction. The final assignment's total cost is
// within n * epsilon of optimal, so the mean is within epsilon. Costs are
// recomputed on the fly, so memory stays O(n).
AuctionResult emd_auction(std::span<const Point3> p, std::span<const Point3> q, double epsilon,
                          std::size_t max_bids = 0);
double emd_approx(std::span<const Point3> p, std::span<const Point3> q, double epsilon);

}  // namespace tdcr::metrics

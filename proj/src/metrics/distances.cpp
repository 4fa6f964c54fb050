#include "tdcrflow/metrics/distances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/simd/kernels.hpp"

namespace tdcr::metrics {
namespace {

double directed(std::span<const Point3> from, const KdTree& to) {
  double acc = 0.0;
  for (const auto& p : from) acc += to.nearest_sq(p);
  return acc / static_cast<double>(from.size());
}

struct Soa {
  std::vector<double> x, y, z;
  explicit Soa(std::span<const Point3> pts) : x(pts.size()), y(pts.size()), z(pts.size()) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      x[i] = pts[i][0];
      y[i] = pts[i][1];
      z[i] = pts[i][2];
    }
  }
};

}  // namespace

std::vector<Point3> xyz_of(const pc::PointCloud& cloud) {
  std::vector<Point3> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = {cloud(i, 0), cloud(i, 1), cloud(i, 2)};
  return out;
}

double chamfer(std::span<const Point3> p, std::span<const Point3> q) {
  TDCR_REQUIRE(!p.empty() && !q.empty(), "chamfer: empty point set");
  const KdTree tp(p), tq(q);
  return directed(p, tq) + directed(q, tp);
}

double chamfer(const pc::PointCloud& p, const pc::PointCloud& q) {
  return chamfer(xyz_of(p), xyz_of(q));
}

std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n) {
  TDCR_REQUIRE(cost.size() == n * n, "hungarian: cost matrix is not n x n");
  // Shortest augmenting paths with row/column potentials; 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* row = cost.data() + (i0 - 1) * n;
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[match[j] - 1] = j - 1;
  return col_of_row;
}

double emd_exact(std::span<const Point3> p, std::span<const Point3> q, std::size_t cap) {
  TDCR_REQUIRE(p.size() == q.size(), "emd_exact: point sets differ in size");
  TDCR_REQUIRE(!p.empty(), "emd_exact: empty point set");
  if (p.size() > cap)
    throw ContractViolation("emd_exact: n = " + std::to_string(p.size()) + " exceeds the exact cap of " +
                            std::to_string(cap) + "; use emd_approx");
  const std::size_t n = p.size();
  const Soa qs(q);
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    simd::kernels().dist_row(p[i].data(), qs.x.data(), qs.y.data(), qs.z.data(), n, cost.data() + i * n);
  const auto assign = hungarian(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + assign[i]];
  return total / static_cast<double>(n);
}

AuctionResult emd_auction(std::span<const Point3> p, std::span<const Point3> q, double epsilon,
                          std::size_t max_bids) {
  TDCR_REQUIRE(p.size() == q.size(), "emd_approx: point sets differ in size");
  TDCR_REQUIRE(!p.empty(), "emd_approx: empty point set");
  TDCR_REQUIRE(epsilon > 0.0 && std::isfinite(epsilon), "emd_approx: epsilon must be positive");
  const std::size_t n = p.size();
  if (max_bids == 0) max_bids = std::max<std::size_t>(200'000'000 / n, 64 * n);
  const Soa qs(q);
  const auto& k = simd::kernels();

  // Largest cost bounds the useful starting increment.
  double lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = hi[a] = p[0][a];
    for (const auto* set : {&p, &q})
      for (const auto& pt : *set) {
        lo[a] = std::min(lo[a], pt[a]);
        hi[a] = std::max(hi[a], pt[a]);
      }
  }
  const double diag = std::sqrt((hi[0] - lo[0]) * (hi[0] - lo[0]) + (hi[1] - lo[1]) * (hi[1] - lo[1]) +
                                (hi[2] - lo[2]) * (hi[2] - lo[2]));

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> price(n, 0.0), row(n);
  std::vector<std::size_t> owner(n, kNone), col_of_row(n, kNone);
  std::vector<std::size_t> queue;
  AuctionResult res;
  double eps = std::max(epsilon, diag / 4.0);
  for (;;) {
    std::fill(owner.begin(), owner.end(), kNone);
    std::fill(col_of_row.begin(), col_of_row.end(), kNone);
    queue.resize(n);
    for (std::size_t i = 0; i < n; ++i) queue[i] = n - 1 - i;
    while (!queue.empty()) {
      if (++res.bids > max_bids) {
        std::ostringstream msg;
        msg << "emd_approx: auction did not converge after " << max_bids << " bids (n = " << n
            << ", epsilon = " << eps << ", unassigned = " << queue.size() << ")";
        throw NumericError(msg.str());
      }
      const std::size_t i = queue.back();
      queue.pop_back();
      k.dist_row(p[i].data(), qs.x.data(), qs.y.data(), qs.z.data(), n, row.data());
      // Minimize cost + price: best and second best.
      double best = std::numeric_limits<double>::infinity(), second = best;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double c = row[j] + price[j];
        if (c < best) {
          second = best;
          best = c;
          arg = j;
        } else if (c < second) {
          second = c;
        }
      }
      const double gap = n == 1 ? 0.0 : second - best;
      price[arg] += gap + eps;
      if (owner[arg] != kNone) {
        col_of_row[owner[arg]] = kNone;
        queue.push_back(owner[arg]);
      }
      owner[arg] = i;
      col_of_row[i] = arg;
    }
    if (eps <= epsilon) break;
    eps = std::max(epsilon, eps / 5.0);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p[i];
    const auto& b = q[col_of_row[i]];
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    total += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  res.emd = total / static_cast<double>(n);
  res.epsilon = epsilon;
  res.assignment = std::move(col_of_row);
  return res;
}

double emd_approx(std::span<const Point3> p, std::span<const Point3> q, double epsilon) {
  return emd_auction(p, q, epsilon).emd;
}

}  // namespace tdcr::metrics

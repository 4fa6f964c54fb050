#include <algorithm>
#include <cmath>
#include <numeric>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/nets/velocity.hpp"

namespace tdcr::nets {
namespace {

// Rows sorted by (key, x, y, z) so accumulation order does not depend on
// the input row order.
std::vector<std::uint32_t> canonical_order(const num::Tensor& x, const std::vector<std::int64_t>& key) {
  std::vector<std::uint32_t> order(key.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (key[a] != key[b]) return key[a] < key[b];
    for (std::size_t c = 0; c < x.cols(); ++c)
      if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
    return false;
  });
  return order;
}

}  // namespace

VoxelAssignment assign_voxels(const FlowInput& in, std::size_t resolution, double bound) {
  TDCR_REQUIRE(in.batch() >= 1 && in.points >= 1, "context: empty cloud");
  const std::size_t n = in.x.rows();
  const auto r = static_cast<std::int64_t>(resolution);
  const double cells_per_unit = static_cast<double>(resolution) / (2.0 * bound);
  auto key_of = [r](std::int64_t sample, std::int64_t cx, std::int64_t cy, std::int64_t cz) {
    return ((sample * r + cx) * r + cy) * r + cz;
  };

  std::vector<std::int64_t> key(n);
  std::vector<std::array<double, 3>> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto sample = static_cast<std::int64_t>(i / in.points);
    std::int64_t cell[3];
    for (int a = 0; a < 3; ++a) {
      const double u = (in.x(i, a) + bound) * cells_per_unit;
      grid[i][a] = u;
      // Points outside the cube land in the boundary cells.
      cell[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(u)), 0, r - 1);
    }
    key[i] = key_of(sample, cell[0], cell[1], cell[2]);
  }

  VoxelAssignment va;
  std::vector<std::int64_t> occupied = key;
  std::sort(occupied.begin(), occupied.end());
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
  va.voxels = occupied.size();
  auto lookup = [&occupied](std::int64_t k) -> std::int32_t {
    auto it = std::lower_bound(occupied.begin(), occupied.end(), k);
    return it != occupied.end() && *it == k ? static_cast<std::int32_t>(it - occupied.begin()) : -1;
  };
  va.voxel_of_row.resize(n);
  for (std::size_t i = 0; i < n; ++i) va.voxel_of_row[i] = lookup(key[i]);
  va.sample_of_voxel.resize(va.voxels);
  for (std::size_t v = 0; v < va.voxels; ++v)
    va.sample_of_voxel[v] = static_cast<std::int32_t>(occupied[v] / (r * r * r));
  va.order = canonical_order(in.x, key);

  // Trilinear weights over the 8 surrounding cell centres; empty cells are
  // skipped and the rest renormalized. The point's own cell always carries
  // at least 1/8 of the weight, so the sum never vanishes.
  va.neighbors.assign(8 * n, -1);
  va.weights.assign(8 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto sample = static_cast<std::int64_t>(i / in.points);
    std::int64_t base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double g = std::clamp(grid[i][a] - 0.5, 0.0, static_cast<double>(r - 1));
      base[a] = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(g)), r - 2);
      frac[a] = g - static_cast<double>(base[a]);
    }
    double total = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
      const std::int32_t id = lookup(key_of(sample, base[0] + dx, base[1] + dy, base[2] + dz));
      if (id < 0) continue;
      const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                       (dz ? frac[2] : 1.0 - frac[2]);
      va.neighbors[8 * i + corner] = id;
      va.weights[8 * i + corner] = w;
      total += w;
    }
    for (int corner = 0; corner < 8; ++corner) va.weights[8 * i + corner] /= total;
  }
  return va;
}

HybridVelocityNet::HybridVelocityNet(NetConfig cfg, std::uint64_t seed) : VelocityNet(std::move(cfg)) {
  cfg_.validate();
  TDCR_REQUIRE(cfg_.arch == "hybrid", "HybridVelocityNet needs arch = hybrid");
  Rng rng(seed);
  const std::size_t dc = cfg_.context_width;
  embed_ = Embedding::make(params_, cfg_, rng);
  point_x_ = Linear::make(params_, "context.point.x", cfg_.channels, dc, rng, 1.0, false, false);
  point_e_ = Linear::make(params_, "context.point.e", cfg_.embed_width, dc, rng);
  for (std::size_t s = 0; s < cfg_.resolutions.size(); ++s)
    voxel_blocks_.push_back(FilmBlock::make(params_, "context.voxel" + std::to_string(s), dc, cfg_.embed_width,
                                            cfg_.ln_eps, rng));
  local_proj_ = Linear::make(params_, "context.local", dc * cfg_.resolutions.size(), dc, rng);
  global_proj_ = Linear::make(params_, "context.global", dc, dc, rng);
  lift_x_ = Linear::make(params_, "lift.x", cfg_.channels, cfg_.width, rng, 1.0, false, false);
  lift_e_ = Linear::make(params_, "lift.e", cfg_.embed_width, cfg_.width, rng);
  lift_c_ = Linear::make(params_, "lift.c", dc, cfg_.width, rng, 1.0, false, false);
  for (std::size_t i = 0; i < cfg_.blocks; ++i)
    blocks_.push_back(FilmBlock::make(params_, "block" + std::to_string(i), cfg_.width, cfg_.embed_width,
                                      cfg_.ln_eps, rng));
  head_ = Linear::make(params_, "head", cfg_.width, cfg_.channels, rng, 1.0, true);
}

HybridVelocityNet::Context HybridVelocityNet::context(num::Graph& g, const FlowInput& in, num::Var e,
                                                      num::Weights w) {
  const ParamView pv = view(w);
  const auto rows_of = in.sample_of_rows();
  num::Var x = g.constant(in.x);
  num::Var feat = num::silu(num::add(point_x_(g, pv, x), num::gather_rows(point_e_(g, pv, e), rows_of)));

  std::vector<num::Var> scales;
  for (std::size_t s = 0; s < cfg_.resolutions.size(); ++s) {
    const auto va = assign_voxels(in, cfg_.resolutions[s], cfg_.cube_bound);
    num::Var vox = num::scatter_mean(feat, va.voxel_of_row, va.voxels, va.order);
    vox = voxel_blocks_[s](g, pv, vox, e, va.sample_of_voxel);
    scales.push_back(num::weighted_gather(vox, va.neighbors, va.weights, 8));
  }

  Context ctx;
  ctx.local = local_proj_(g, pv, num::concat_cols(scales));

  std::vector<std::int64_t> sample_key(rows_of.begin(), rows_of.end());
  const auto order = canonical_order(in.x, sample_key);
  num::Var pooled = num::scatter_mean(feat, rows_of, in.batch(), order);
  ctx.global = num::gather_rows(global_proj_(g, pv, pooled), rows_of);

  ctx.gate.resize(rows_of.size());
  for (std::size_t i = 0; i < rows_of.size(); ++i)
    ctx.gate[i] = time_gate(in.t[static_cast<std::size_t>(rows_of[i])], cfg_.gate_k, cfg_.gate_tau);
  return ctx;
}

num::Var HybridVelocityNet::forward(num::Graph& g, const FlowInput& in, num::Weights w) {
  in.validate(cfg_.channels, cfg_.condition_width);
  const ParamView pv = view(w);
  const auto rows_of = in.sample_of_rows();
  num::Var e = embed_(g, pv, in.t, in.c);
  const Context ctx = context(g, in, e, w);
  std::vector<double> rest(ctx.gate.size());
  for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = 1.0 - ctx.gate[i];
  num::Var c = num::add(num::scale_rows(ctx.local, ctx.gate), num::scale_rows(ctx.global, rest));

  num::Var h = num::add(num::add(lift_x_(g, pv, g.constant(in.x)), lift_c_(g, pv, c)),
                        num::gather_rows(lift_e_(g, pv, e), rows_of));
  for (const auto& b : blocks_) h = b(g, pv, h, e, rows_of);
  return head_(g, pv, num::silu(h));
}

}  // namespace tdcr::nets

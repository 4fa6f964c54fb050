#include "tdcrflow/synthgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/common/parallel.hpp"
#include "tdcrflow/common/rng.hpp"

namespace tdcr::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void push_point(std::vector<double>& out, const Vec3& p, bool color, double ramp) {
  out.insert(out.end(), p.begin(), p.end());
  if (color) {
    const auto c = ramp_color(ramp);
    out.insert(out.end(), c.begin(), c.end());
  }
}

Vec3 offset(const Frame& f, double x, double y, double z) {
  const Vec3 d = apply(f.rotation, {x, y, z});
  return {f.position[0] + d[0], f.position[1] + d[1], f.position[2] + d[2]};
}

}  // namespace

std::array<double, 3> ramp_color(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return {u, 1.0 - std::abs(2.0 * u - 1.0), 1.0 - u};
}

pc::PointCloud sample_surface(std::span<const ModuleArc> arcs, const RobotSpec& spec, std::size_t n_raw,
                              std::uint64_t seed, const SurfaceOptions& opts) {
  spec.validate();
  TDCR_REQUIRE(n_raw >= 1, "sample_surface: n_raw must be >= 1");
  TDCR_REQUIRE(arcs.size() == static_cast<std::size_t>(spec.modules), "sample_surface: arc count mismatch");
  const auto bases = module_bases(arcs);
  const auto stations = arcs_to_backbone(arcs, spec);
  const std::size_t modules = arcs.size();
  const std::size_t discs = stations.size() - 1;
  const double tube_area = kTwoPi * spec.tube_radius * spec.module_length * static_cast<double>(modules);
  const double rim_area = kTwoPi * spec.disc_radius * kDiscThickness * static_cast<double>(discs);
  const double tube_share = tube_area / (tube_area + rim_area);
  const std::size_t channels = opts.color ? 6 : 3;
  const auto disc_ramp = [discs](std::size_t k) {
    return discs <= 1 ? 0.0 : static_cast<double>(k - 1) / static_cast<double>(discs - 1);
  };

  std::vector<double> data;
  data.reserve(n_raw * channels);
  Rng rng(seed);
  for (std::size_t n = 0; n < n_raw; ++n) {
    if (rng.uniform() < tube_share) {
      const auto i = static_cast<std::size_t>(rng.below(modules));
      const double s = rng.uniform();
      const double a = kTwoPi * rng.uniform();
      const Frame f = compose(bases[i], arc_frame(arcs[i], s));
      // Disc at the distal end of this tube segment.
      const auto seg = std::min<std::size_t>(static_cast<std::size_t>(s * spec.discs_per_module),
                                             static_cast<std::size_t>(spec.discs_per_module) - 1);
      const std::size_t disc = i * static_cast<std::size_t>(spec.discs_per_module) + seg + 1;
      push_point(data, offset(f, spec.tube_radius * std::cos(a), spec.tube_radius * std::sin(a), 0.0),
                 opts.color, disc_ramp(disc));
    } else {
      const std::size_t k = 1 + static_cast<std::size_t>(rng.below(discs));
      const double a = kTwoPi * rng.uniform();
      const double w = (rng.uniform() - 0.5) * kDiscThickness;
      push_point(data,
                 offset(stations[k], spec.disc_radius * std::cos(a), spec.disc_radius * std::sin(a), w),
                 opts.color, disc_ramp(k));
    }
  }

  if (opts.include_base) {
    const double radius = 2.0 * spec.disc_radius;
    const double side = kTwoPi * radius * kBaseHeight;
    const double top = std::numbers::pi * radius * radius;
    const double robot_area = tube_area + rim_area;
    const auto n_base = static_cast<std::size_t>(std::llround(static_cast<double>(n_raw) * (side + top) / robot_area));
    Rng base_rng = Rng::stream(seed, 0xba5e);
    for (std::size_t n = 0; n < n_base; ++n) {
      const double a = kTwoPi * base_rng.uniform();
      Vec3 p;
      if (base_rng.uniform() < side / (side + top)) {
        const double z = -kBaseHeight * base_rng.uniform();
        p = {radius * std::cos(a), radius * std::sin(a), z};
      } else {
        const double r = radius * std::sqrt(base_rng.uniform());
        p = {r * std::cos(a), r * std::sin(a), 0.0};
      }
      push_point(data, p, opts.color, 0.0);
    }
  }
  return pc::PointCloud(channels, std::move(data), "base");
}

std::size_t GenConfig::raw_points() const { return std::max<std::size_t>(4 * points, 16384); }

Split split_indices(std::size_t count) {
  Split s;
  const std::size_t n_train = count * 8 / 10;
  const std::size_t n_val = count / 10;
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_train)
      s.train.push_back(i);
    else if (i < n_train + n_val)
      s.val.push_back(i);
    else
      s.test.push_back(i);
  }
  return s;
}

pc::PointCloud settle_cloud(const RobotSpec& spec, const GenConfig& cfg, std::span<const double> commands,
                            double payload, std::uint64_t seed) {
  const auto arcs = apply_payload(motors_to_arcs(commands, spec), payload, spec);
  const auto raw = sample_surface(arcs, spec, cfg.raw_points(), seed, {cfg.include_base, cfg.color});
  return pc::resample_to_count(pc::voxel_downsample(raw, cfg.voxel), cfg.points,
                               Rng::stream(seed, 1).next_u64());
}

namespace {

std::vector<double> raw_condition(const RobotSpec& spec, const GenConfig& cfg, const SampleDraw& d) {
  auto cond = commands_to_displacements(d.commands, spec);
  if (cfg.payload_max) cond.push_back(d.payload);
  return cond;
}

// Datasets are stored as 32-bit floats; rounding here keeps in-memory and
// reloaded datasets (and the statistics derived from them) identical.
void round_to_float(std::vector<double>& v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

void fill_samples(Dataset& ds, const std::vector<SampleDraw>& draws, const std::vector<std::uint64_t>& seeds) {
  ds.clouds.resize(draws.size());
  ds.conditions.resize(draws.size());
  parallel_for(draws.size(), [&](std::size_t i) {
    ds.clouds[i] = settle_cloud(ds.spec, ds.config, draws[i].commands, draws[i].payload, seeds[i]);
    round_to_float(ds.clouds[i].data());
    ds.conditions[i] = raw_condition(ds.spec, ds.config, draws[i]);
    round_to_float(ds.conditions[i]);
  });
}

}  // namespace

Dataset generate_dataset(const RobotSpec& spec, const GenConfig& cfg) {
  spec.validate();
  TDCR_REQUIRE(cfg.samples >= 10, "generate_dataset: need at least 10 samples");
  TDCR_REQUIRE(cfg.points >= 1, "generate_dataset: point count must be >= 1");
  TDCR_REQUIRE(cfg.voxel > 0.0, "generate_dataset: voxel must be positive");
  if (cfg.payload_max)
    TDCR_REQUIRE(*cfg.payload_max > 0.0 && std::isfinite(*cfg.payload_max),
                 "generate_dataset: payload range [0, max] is degenerate");

  std::vector<SampleDraw> draws(cfg.samples);
  std::vector<std::uint64_t> seeds(cfg.samples);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    Rng rng = Rng::stream(cfg.seed, i);
    draws[i].commands.resize(spec.motor_dims());
    for (auto& c : draws[i].commands) c = rng.uniform();
    if (cfg.payload_max) {
      const bool unloaded = rng.uniform() < 0.1;
      const double p = rng.uniform(0.0, *cfg.payload_max);
      draws[i].payload = unloaded ? 0.0 : p;
    }
    seeds[i] = rng.next_u64();
  }

  Dataset ds;
  ds.spec = spec;
  ds.config = cfg;
  fill_samples(ds, draws, seeds);
  ds.split = split_indices(cfg.samples);
  ds.stats = compute_stats(ds);
  return ds;
}

Dataset dataset_from_commands(const RobotSpec& spec, const GenConfig& cfg, const std::vector<SampleDraw>& draws) {
  spec.validate();
  TDCR_REQUIRE(!draws.empty(), "dataset_from_commands: no samples");
  Dataset ds;
  ds.spec = spec;
  ds.config = cfg;
  ds.config.samples = draws.size();
  std::vector<std::uint64_t> seeds(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) seeds[i] = Rng::stream(cfg.seed, i).next_u64();
  fill_samples(ds, draws, seeds);
  for (std::size_t i = 0; i < draws.size(); ++i) ds.split.train.push_back(i);

  double scale = 0.0;
  for (const auto& c : ds.clouds)
    for (std::size_t i = 0; i < c.size(); ++i)
      for (int a = 0; a < 3; ++a) scale = std::max(scale, std::abs(c(i, a)));
  ds.stats.scale = scale;
  ds.stats.motor_min.assign(spec.motor_dims(), -spec.max_displacement);
  ds.stats.motor_max.assign(spec.motor_dims(), spec.max_displacement);
  if (cfg.payload_max) {
    ds.stats.payload_min = 0.0;
    ds.stats.payload_max = *cfg.payload_max;
  }
  ds.stats.validate();
  return ds;
}

pc::NormalizationStats compute_stats(const Dataset& ds) {
  TDCR_REQUIRE(!ds.split.train.empty(), "compute_stats: empty train split");
  pc::NormalizationStats st;
  const std::size_t dims = ds.spec.motor_dims();
  st.motor_min.assign(dims, INFINITY);
  st.motor_max.assign(dims, -INFINITY);
  double pmin = INFINITY, pmax = -INFINITY;
  double scale = 0.0;
  for (std::size_t i : ds.split.train) {
    const auto& c = ds.clouds[i];
    for (std::size_t r = 0; r < c.size(); ++r)
      for (int a = 0; a < 3; ++a) scale = std::max(scale, std::abs(c(r, a)));
    const auto& cond = ds.conditions[i];
    for (std::size_t j = 0; j < dims; ++j) {
      st.motor_min[j] = std::min(st.motor_min[j], cond[j]);
      st.motor_max[j] = std::max(st.motor_max[j], cond[j]);
    }
    if (ds.config.payload_max) {
      pmin = std::min(pmin, cond[dims]);
      pmax = std::max(pmax, cond[dims]);
    }
  }
  st.scale = scale;
  if (ds.config.payload_max) {
    st.payload_min = pmin;
    st.payload_max = pmax;
  }
  st.validate();
  return st;
}

std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) {
    if (!pts.empty()) pts.push_back(pts.front());
    return pts;
  }
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<double, 2>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  // The last point equals the first, which closes the polyline.
  hull.resize(k);
  return hull;
}

Workspace workspace_projection(const RobotSpec& spec, std::size_t sweep, std::uint64_t seed) {
  spec.validate();
  TDCR_REQUIRE(sweep >= 100, "workspace_projection: sweep count must be >= 100");
  Workspace ws;
  ws.tips.reserve(sweep);
  std::vector<double> cmd(spec.motor_dims(), 0.5);
  for (std::size_t k = 0; k < sweep; ++k) {
    if (k > 0) {
      Rng rng = Rng::stream(seed, k);
      for (auto& c : cmd) c = rng.uniform();
    }
    const Vec3 tip = tip_position(motors_to_arcs(cmd, spec));
    ws.tips.push_back({tip[1], tip[2]});
  }
  ws.boundary = convex_hull(ws.tips);
  return ws;
}

}  // namespace tdcr::synth

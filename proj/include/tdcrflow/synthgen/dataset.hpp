#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tdcrflow/pointcloud/point_cloud.hpp"
#include "tdcrflow/synthgen/robot.hpp"

namespace tdcr::synth {

struct SurfaceOptions {
  bool include_base = false;
  bool color = false;  // per-disc RGB ramp, d = 6
};

// Uniform samples on the backbone tube and the disc rims of the stations
// returned by arcs_to_backbone. The base cylinder, when requested, is drawn
// from its own stream and appended, so the robot points do not depend on it.
pc::PointCloud sample_surface(std::span<const ModuleArc> arcs, const RobotSpec& spec, std::size_t n_raw,
                              std::uint64_t seed, const SurfaceOptions& opts);

// RGB for ramp position u in [0, 1].
std::array<double, 3> ramp_color(double u);

struct GenConfig {
  std::size_t samples = 100;     // K
  std::size_t points = 2048;     // N_train
  std::uint64_t seed = 0;
  std::optional<double> payload_max;  // kg; enables payload conditioning
  bool include_base = false;
  bool color = false;
  double voxel = 0.005;  // m

  std::size_t raw_points() const;
};

struct Split {
  std::vector<std::size_t> train, val, test;
};

Split split_indices(std::size_t count);

// In-memory dataset. Clouds are in metric units; conditions are raw
// (tendon displacements in m, then payload in kg when enabled).
struct Dataset {
  RobotSpec spec;
  GenConfig config;
  std::vector<pc::PointCloud> clouds;
  std::vector<std::vector<double>> conditions;
  Split split;
  pc::NormalizationStats stats;

  std::size_t size() const { return clouds.size(); }
  std::size_t channels() const { return clouds.empty() ? (config.color ? 6 : 3) : clouds.front().channels(); }
  std::size_t condition_width() const { return spec.motor_dims() + (config.payload_max ? 1 : 0); }
};

struct SampleDraw {
  std::vector<double> commands;  // normalized, in [0, 1]
  double payload = 0.0;
};

// One settled configuration: arcs -> payload -> surface -> voxel grid ->
// fixed count.
pc::PointCloud settle_cloud(const RobotSpec& spec, const GenConfig& cfg, std::span<const double> commands,
                            double payload, std::uint64_t seed);

Dataset generate_dataset(const RobotSpec& spec, const GenConfig& cfg);

// Dataset from explicit normalized commands; every sample is in the train
// split and the condition ranges are the actuator limits.
Dataset dataset_from_commands(const RobotSpec& spec, const GenConfig& cfg,
                              const std::vector<SampleDraw>& draws);

// Train-split statistics: scale = largest |coordinate|, per-dimension
// condition ranges.
pc::NormalizationStats compute_stats(const Dataset& ds);

struct Workspace {
  std::vector<std::array<double, 2>> tips;      // (y, z)
  std::vector<std::array<double, 2>> boundary;  // closed convex hull
};

// First command is the straight pose, the rest are uniform.
Workspace workspace_projection(const RobotSpec& spec, std::size_t sweep, std::uint64_t seed);

std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts);

}  // namespace tdcr::synth

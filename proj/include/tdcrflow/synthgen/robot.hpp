#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace tdcr::synth {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

struct RobotSpec {
  int modules = 2;                 // S
  double module_length = 0.12;     // L, m
  double tendon_radius = 0.02;     // r_d, m
  double tube_radius = 0.008;      // m
  double disc_radius = 0.025;      // m
  int discs_per_module = 5;
  double max_displacement = 0.01;  // q_max, m
  double payload_compliance = 8.0; // rad per kg per module
  double gravity = 9.81;           // m/s^2

  std::size_t motor_dims() const { return 3 * static_cast<std::size_t>(modules); }
  void validate() const;

  nlohmann::json to_json() const;
  static RobotSpec from_json(const nlohmann::json& j);
};

inline constexpr double kMaxBend = 0.95 * 3.14159265358979323846;
inline constexpr double kDiscThickness = 0.004;  // rim band height, m
inline constexpr double kBaseHeight = 0.04;      // m

struct ModuleArc {
  double theta = 0.0;  // bend angle, rad, >= 0
  double phi = 0.0;    // bending-plane azimuth in (-pi, pi]
  double length = 0.0;
};

struct Frame {
  Vec3 position{};
  Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

// Normalized commands in [0, 1]^(3S) to one constant-curvature arc per
// module.
std::vector<ModuleArc> motors_to_arcs(std::span<const double> commands, const RobotSpec& spec);

// Tendon displacements (m) for normalized commands; this is the raw motor
// vector stored in datasets.
std::vector<double> commands_to_displacements(std::span<const double> commands, const RobotSpec& spec);

// Gravity-aligned tip load of `payload` kg, applied root to tip.
std::vector<ModuleArc> apply_payload(std::span<const ModuleArc> arcs, double payload, const RobotSpec& spec);

// Pose at fraction s in [0, 1] along an arc, relative to the arc's base.
Frame arc_frame(const ModuleArc& arc, double s);
Frame compose(const Frame& parent, const Frame& child);

// Base frames of every module plus the tip frame (size S + 1).
std::vector<Frame> module_bases(std::span<const ModuleArc> arcs);

// Station frames: the base (origin, tangent +Z) followed by
// discs_per_module stations per module at s = j / discs_per_module.
std::vector<Frame> arcs_to_backbone(std::span<const ModuleArc> arcs, const RobotSpec& spec);

Vec3 tip_position(std::span<const ModuleArc> arcs);

Vec3 apply(const Mat3& r, const Vec3& v);
Vec3 apply_transpose(const Mat3& r, const Vec3& v);

}  // namespace tdcr::synth

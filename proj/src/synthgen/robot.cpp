#include "tdcrflow/synthgen/robot.hpp"

#include <cmath>
#include <numbers>

#include "tdcrflow/common/error.hpp"

namespace tdcr::synth {
namespace {

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i * 3 + k] * b[k * 3 + j];
      c[i * 3 + j] = acc;
    }
  return c;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, -s, 0, s, c, 0, 0, 0, 1};
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, 0, s, 0, 1, 0, -s, 0, c};
}

// Azimuth in (-pi, pi]; atan2 can return -pi for a -0.0 second argument.
double canonical_azimuth(double y, double x) {
  double a = std::atan2(y, x);
  if (a <= -std::numbers::pi) a = std::numbers::pi;
  return a;
}

}  // namespace

void RobotSpec::validate() const {
  TDCR_REQUIRE(modules >= 1, "RobotSpec: modules must be >= 1");
  TDCR_REQUIRE(module_length > 0 && tendon_radius > 0 && tube_radius > 0 && disc_radius > 0,
               "RobotSpec: lengths must be positive");
  TDCR_REQUIRE(discs_per_module >= 2, "RobotSpec: discs_per_module must be >= 2");
  TDCR_REQUIRE(max_displacement > 0, "RobotSpec: max_displacement must be positive");
  TDCR_REQUIRE(payload_compliance >= 0, "RobotSpec: payload_compliance must be non-negative");
  TDCR_REQUIRE(gravity > 0, "RobotSpec: gravity must be positive");
}

nlohmann::json RobotSpec::to_json() const {
  return {{"modules", modules},
          {"module_length", module_length},
          {"tendon_radius", tendon_radius},
          {"tube_radius", tube_radius},
          {"disc_radius", disc_radius},
          {"discs_per_module", discs_per_module},
          {"max_displacement", max_displacement},
          {"payload_compliance", payload_compliance},
          {"gravity", gravity}};
}

RobotSpec RobotSpec::from_json(const nlohmann::json& j) {
  RobotSpec s;
  s.modules = j.at("modules").get<int>();
  s.module_length = j.at("module_length").get<double>();
  s.tendon_radius = j.at("tendon_radius").get<double>();
  s.tube_radius = j.at("tube_radius").get<double>();
  s.disc_radius = j.at("disc_radius").get<double>();
  s.discs_per_module = j.at("discs_per_module").get<int>();
  s.max_displacement = j.at("max_displacement").get<double>();
  s.payload_compliance = j.at("payload_compliance").get<double>();
  s.gravity = j.at("gravity").get<double>();
  s.validate();
  return s;
}

Vec3 apply(const Mat3& r, const Vec3& v) {
  return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2], r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
          r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

Vec3 apply_transpose(const Mat3& r, const Vec3& v) {
  return {r[0] * v[0] + r[3] * v[1] + r[6] * v[2], r[1] * v[0] + r[4] * v[1] + r[7] * v[2],
          r[2] * v[0] + r[5] * v[1] + r[8] * v[2]};
}

std::vector<double> commands_to_displacements(std::span<const double> commands, const RobotSpec& spec) {
  TDCR_REQUIRE(commands.size() == spec.motor_dims(),
               "motor vector has " + std::to_string(commands.size()) + " entries, expected " +
                   std::to_string(spec.motor_dims()));
  std::vector<double> q(commands.size());
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = (commands[k] - 0.5) * 2.0 * spec.max_displacement;
  return q;
}

std::vector<ModuleArc> motors_to_arcs(std::span<const double> commands, const RobotSpec& spec) {
  spec.validate();
  const auto q = commands_to_displacements(commands, spec);
  constexpr double psi[3] = {0.0, 2.0 * std::numbers::pi / 3.0, 4.0 * std::numbers::pi / 3.0};
  std::vector<ModuleArc> arcs(static_cast<std::size_t>(spec.modules));
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    double ax = 0.0, ay = 0.0;
    for (int k = 0; k < 3; ++k) {
      ax += q[3 * i + k] * std::cos(psi[k]);
      ay += q[3 * i + k] * std::sin(psi[k]);
    }
    ModuleArc& a = arcs[i];
    a.length = spec.module_length;
    a.theta = std::min(2.0 / (3.0 * spec.tendon_radius) * std::hypot(ax, ay), kMaxBend);
    a.phi = a.theta == 0.0 ? 0.0 : canonical_azimuth(-ay, -ax);
  }
  return arcs;
}

Frame arc_frame(const ModuleArc& arc, double s) {
  Frame f;
  const double bend = arc.theta * s;
  if (arc.theta == 0.0) {
    f.position = {0.0, 0.0, arc.length * s};
    return f;
  }
  const double radius = arc.length / arc.theta;
  const double radial = radius * (1.0 - std::cos(bend));
  f.position = {std::cos(arc.phi) * radial, std::sin(arc.phi) * radial, radius * std::sin(bend)};
  f.rotation = mat_mul(mat_mul(rot_z(arc.phi), rot_y(bend)), rot_z(-arc.phi));
  return f;
}

Frame compose(const Frame& parent, const Frame& child) {
  Frame f;
  const Vec3 off = apply(parent.rotation, child.position);
  for (int a = 0; a < 3; ++a) f.position[a] = parent.position[a] + off[a];
  f.rotation = mat_mul(parent.rotation, child.rotation);
  return f;
}

std::vector<Frame> module_bases(std::span<const ModuleArc> arcs) {
  std::vector<Frame> bases{Frame{}};
  for (const auto& arc : arcs) bases.push_back(compose(bases.back(), arc_frame(arc, 1.0)));
  return bases;
}

Vec3 tip_position(std::span<const ModuleArc> arcs) { return module_bases(arcs).back().position; }

std::vector<ModuleArc> apply_payload(std::span<const ModuleArc> arcs, double payload, const RobotSpec& spec) {
  TDCR_REQUIRE(payload >= 0.0 && std::isfinite(payload), "apply_payload: payload must be >= 0");
  std::vector<ModuleArc> out(arcs.begin(), arcs.end());
  if (payload == 0.0 || spec.payload_compliance == 0.0) return out;
  const auto count = out.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto bases = module_bases(out);
    const Frame& base = bases[i];
    // Gravity seen from the module base; its in-plane part is the bend
    // direction. A vertical base has none, so fall back to the horizontal
    // direction the downstream chain already leans towards, then +x.
    Vec3 dir = apply_transpose(base.rotation, {0.0, 0.0, -1.0});
    if (std::hypot(dir[0], dir[1]) < 1e-12) {
      const Vec3& tip = bases.back().position;
      const Vec3 lean = {tip[0] - base.position[0], tip[1] - base.position[1], 0.0};
      dir = apply_transpose(base.rotation, lean);
      if (std::hypot(dir[0], dir[1]) < 1e-12) dir = {1.0, 0.0, 0.0};
    }
    const double norm = std::hypot(dir[0], dir[1]);
    const double magnitude = spec.payload_compliance * payload * static_cast<double>(count - i) /
                             static_cast<double>(count);
    ModuleArc& a = out[i];
    const double bx = a.theta * std::cos(a.phi) + magnitude * dir[0] / norm;
    const double by = a.theta * std::sin(a.phi) + magnitude * dir[1] / norm;
    a.theta = std::min(std::hypot(bx, by), kMaxBend);
    a.phi = a.theta == 0.0 ? 0.0 : canonical_azimuth(by, bx);
  }
  return out;
}

std::vector<Frame> arcs_to_backbone(std::span<const ModuleArc> arcs, const RobotSpec& spec) {
  std::vector<Frame> stations{Frame{}};
  Frame base;
  for (const auto& arc : arcs) {
    for (int j = 1; j <= spec.discs_per_module; ++j)
      stations.push_back(compose(base, arc_frame(arc, static_cast<double>(j) / spec.discs_per_module)));
    base = stations.back();
  }
  return stations;
}

}  // namespace tdcr::synth

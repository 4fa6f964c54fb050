#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/synthgen/dataset.hpp"
#include "tdcrflow/synthgen/robot.hpp"

using namespace tdcr;
using namespace tdcr::synth;
using std::numbers::pi;

namespace {

std::vector<double> random_commands(const RobotSpec& spec, Rng& rng) {
  std::vector<double> c(spec.motor_dims());
  for (double& v : c) v = rng.uniform();
  return c;
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Least-squares fit of (theta, phi) to tendon length changes
// dl_k = -r_d * theta * cos(psi_k - phi), independent of the closed form.
// The command convention maps a displacement q_k to dl_k = q_k.
std::pair<double, double> fit_arc(const std::array<double, 3>& dl, double r_d) {
  // dl_k = -r_d (A cos psi_k + B sin psi_k) with A = theta cos phi, B = theta sin phi.
  double m00 = 0, m01 = 0, m11 = 0, r0 = 0, r1 = 0;
  for (int k = 0; k < 3; ++k) {
    const double c = -r_d * std::cos(2 * pi * k / 3), s = -r_d * std::sin(2 * pi * k / 3);
    m00 += c * c;
    m01 += c * s;
    m11 += s * s;
    r0 += c * dl[k];
    r1 += s * dl[k];
  }
  const double det = m00 * m11 - m01 * m01;
  const double a = (m11 * r0 - m01 * r1) / det, b = (m00 * r1 - m01 * r0) / det;
  return {std::hypot(a, b), std::atan2(b, a)};
}

double angle_diff(double a, double b) { return std::remainder(a - b, 2 * pi); }

}  // namespace

TEST(RobotSpec, Validation) {
  RobotSpec s;
  EXPECT_NO_THROW(s.validate());
  s.discs_per_module = 1;
  EXPECT_THROW(s.validate(), ContractViolation);
  s = RobotSpec{};
  s.module_length = 0.0;
  EXPECT_THROW(s.validate(), ContractViolation);
  s = RobotSpec{};
  s.payload_compliance = -1.0;
  EXPECT_THROW(s.validate(), ContractViolation);
  s = RobotSpec{};
  EXPECT_EQ(RobotSpec::from_json(s.to_json()).to_json(), s.to_json());
}

TEST(MotorsToArcs, NeutralCommandsAreStraight) {
  RobotSpec spec;
  spec.modules = 3;
  const auto arcs = motors_to_arcs(std::vector<double>(9, 0.5), spec);
  ASSERT_EQ(arcs.size(), 3u);
  for (const auto& a : arcs) {
    EXPECT_EQ(a.theta, 0.0);
    EXPECT_EQ(a.phi, 0.0);
    EXPECT_EQ(a.length, spec.module_length);
  }
}

TEST(MotorsToArcs, SingleTendonPull) {
  RobotSpec spec;
  const std::vector<double> c{1.0, 0.5, 0.5, 0.5, 0.5, 0.5};
  const auto arcs = motors_to_arcs(c, spec);
  EXPECT_NEAR(arcs[0].theta, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(std::abs(arcs[0].phi), pi, 1e-12);
  EXPECT_EQ(arcs[1].theta, 0.0);
  EXPECT_THROW(motors_to_arcs(std::vector<double>(5, 0.5), spec), ContractViolation);
}

TEST(MotorsToArcs, AgreesWithLeastSquaresTendonFit) {
  RobotSpec spec;
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_commands(spec, rng);
    const auto arcs = motors_to_arcs(c, spec);
    const auto q = commands_to_displacements(c, spec);
    for (int i = 0; i < spec.modules; ++i) {
      const std::array<double, 3> dl{q[3 * i], q[3 * i + 1], q[3 * i + 2]};
      // Common-mode displacement is invisible to bending; remove it first.
      const double mean = (dl[0] + dl[1] + dl[2]) / 3.0;
      const auto [theta, phi] = fit_arc({dl[0] - mean, dl[1] - mean, dl[2] - mean}, spec.tendon_radius);
      const double expected = std::min(theta, kMaxBend);
      EXPECT_NEAR(arcs[i].theta, expected, 1e-9);
      if (theta > 1e-9) {
        EXPECT_NEAR(angle_diff(arcs[i].phi, phi), 0.0, 1e-9);
      }
    }
  }
}

TEST(MotorsToArcs, CyclicCommandRotation) {
  RobotSpec spec;
  spec.modules = 1;
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_commands(spec, rng);
    const std::vector<double> rotated{c[2], c[0], c[1]};
    const auto a = motors_to_arcs(c, spec)[0], b = motors_to_arcs(rotated, spec)[0];
    EXPECT_NEAR(a.theta, b.theta, 1e-12);
    // Tendon k's command moves to tendon k+1, whose azimuth is 2pi/3 further.
    if (a.theta > 1e-9) {
      EXPECT_NEAR(angle_diff(b.phi, a.phi + 2 * pi / 3), 0.0, 1e-9);
    }
  }
}

TEST(MotorsToArcs, BendClamped) {
  RobotSpec spec;
  spec.tendon_radius = 0.002;  // makes full pulls exceed the clamp
  const auto arcs = motors_to_arcs(std::vector<double>{1.0, 0.0, 0.0, 0.5, 0.5, 0.5}, spec);
  EXPECT_EQ(arcs[0].theta, kMaxBend);
}

TEST(Backbone, StraightChainTip) {
  for (int s : {1, 2, 3, 5}) {
    RobotSpec spec;
    spec.modules = s;
    const auto arcs = motors_to_arcs(std::vector<double>(spec.motor_dims(), 0.5), spec);
    const Vec3 tip = tip_position(arcs);
    EXPECT_EQ(tip[0], 0.0);
    EXPECT_EQ(tip[1], 0.0);
    EXPECT_NEAR(tip[2], s * spec.module_length, 1e-15);
  }
}

TEST(Backbone, QuarterCircleEndpoint) {
  const double l = 0.12;
  const std::vector<ModuleArc> arcs{{pi / 2, 0.0, l}};
  const Vec3 tip = tip_position(arcs);
  EXPECT_NEAR(tip[0], 2 * l / pi, 1e-15);
  EXPECT_NEAR(tip[1], 0.0, 1e-15);
  EXPECT_NEAR(tip[2], 2 * l / pi, 1e-15);
}

TEST(Backbone, StationsAndLengthBound) {
  RobotSpec spec;
  spec.modules = 3;
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto arcs = motors_to_arcs(random_commands(spec, rng), spec);
    const auto frames = arcs_to_backbone(arcs, spec);
    ASSERT_EQ(frames.size(), 1u + spec.modules * spec.discs_per_module);
    EXPECT_EQ(norm(frames[0].position), 0.0);
    const Vec3 tip = tip_position(arcs);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(frames.back().position[a], tip[a], 1e-15);
    EXPECT_LE(norm(tip), spec.modules * spec.module_length + 1e-15);
    // Consecutive stations are one chord apart, never more than the arc step.
    const double step = spec.module_length / spec.discs_per_module;
    for (std::size_t k = 1; k < frames.size(); ++k) {
      Vec3 d;
      for (int a = 0; a < 3; ++a) d[a] = frames[k].position[a] - frames[k - 1].position[a];
      EXPECT_LE(norm(d), step + 1e-15);
    }
  }
}

TEST(Backbone, TipIsLipschitzInCommands) {
  RobotSpec spec;
  Rng rng(4);
  // Bend vectors are linear in the commands with gain 2 q_max * 2 / (3 r_d)
  // per tendon, and a unit change of any bend vector moves the tip by at most
  // the total length.
  const double gain = 2.0 * spec.max_displacement * 2.0 / (3.0 * spec.tendon_radius);
  const double c_bound = spec.modules * spec.module_length * gain * std::sqrt(3.0 * spec.modules);
  for (int trial = 0; trial < 500; ++trial) {
    auto c = random_commands(spec, rng);
    const Vec3 a = tip_position(motors_to_arcs(c, spec));
    std::vector<double> delta(c.size());
    double dn = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      delta[k] = 1e-4 * rng.normal();
      c[k] = std::clamp(c[k] + delta[k], 0.0, 1.0);
    }
    const auto c0 = c;
    for (std::size_t k = 0; k < c.size(); ++k) dn += delta[k] * delta[k];
    const Vec3 b = tip_position(motors_to_arcs(c0, spec));
    const Vec3 d{a[0] - b[0], a[1] - b[1], a[2] - b[2]};
    EXPECT_LE(norm(d), c_bound * std::sqrt(dn) + 1e-12);
  }
}

TEST(Payload, ZeroIsIdentityAndNegativeRejected) {
  RobotSpec spec;
  Rng rng(5);
  const auto arcs = motors_to_arcs(random_commands(spec, rng), spec);
  const auto same = apply_payload(arcs, 0.0, spec);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    EXPECT_EQ(same[i].theta, arcs[i].theta);
    EXPECT_EQ(same[i].phi, arcs[i].phi);
  }
  EXPECT_THROW(apply_payload(arcs, -0.01, spec), ContractViolation);
}

TEST(Payload, StraightRobotTipDrops) {
  RobotSpec spec;
  const auto arcs = motors_to_arcs(std::vector<double>(6, 0.5), spec);
  const double z0 = tip_position(arcs)[2];
  double prev = z0;
  for (int k = 1; k <= 30; ++k) {
    const double z = tip_position(apply_payload(arcs, 0.001 * k, spec))[2];
    EXPECT_LT(z, z0);
    EXPECT_LE(z, prev);
    prev = z;
  }
}

TEST(Payload, EndpointMonotoneForTwoModules) {
  RobotSpec spec;
  Rng rng(6);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto arcs = motors_to_arcs(random_commands(spec, rng), spec);
    EXPECT_LE(tip_position(apply_payload(arcs, 0.03, spec))[2], tip_position(arcs)[2] + 1e-12);
  }
}

TEST(Payload, PlanarCommandsSweepMonotone) {
  // C-shaped bends in one vertical plane: while the chain stays below
  // horizontal, every increment lowers the tip. S-shapes can rise.
  for (int s : {2, 3, 5}) {
    RobotSpec spec;
    spec.modules = s;
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> c(spec.motor_dims(), 0.5);
      for (int i = 0; i < s; ++i) c[3 * i] = 0.5 + 0.5 * rng.uniform();
      const auto arcs = motors_to_arcs(c, spec);
      double turn = 0.0, worst = 0.0;
      for (const auto& a : apply_payload(arcs, 0.03, spec)) {
        turn += a.theta * std::cos(a.phi);
        worst = std::max(worst, std::abs(turn));
      }
      if (worst >= pi / 2) continue;
      double prev = tip_position(arcs)[2];
      for (int k = 1; k <= 30; ++k) {
        const double z = tip_position(apply_payload(arcs, 0.001 * k, spec))[2];
        EXPECT_LE(z, prev + 1e-12) << "S=" << s << " trial " << trial << " p=" << 0.001 * k;
        prev = z;
      }
    }
  }
}

TEST(Payload, AddedBendScalesWithCompliance) {
  RobotSpec a, b;
  b.payload_compliance = 2.0 * a.payload_compliance;
  const auto arcs = motors_to_arcs(std::vector<double>(6, 0.5), a);
  const auto la = apply_payload(arcs, 1e-4, a), lb = apply_payload(arcs, 1e-4, b);
  for (std::size_t i = 0; i < arcs.size(); ++i) EXPECT_NEAR(lb[i].theta, 2.0 * la[i].theta, 1e-12);
  // Root module carries the whole load, the tip module 1/S of it.
  EXPECT_NEAR(la[0].theta, 2.0 * la[1].theta, 1e-12);
}

TEST(Surface, StraightRobotStaysNearAxis) {
  RobotSpec spec;
  const auto arcs = motors_to_arcs(std::vector<double>(6, 0.5), spec);
  const auto cloud = sample_surface(arcs, spec, 4000, 1, {});
  ASSERT_EQ(cloud.size(), 4000u);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    EXPECT_LE(std::hypot(cloud(i, 0), cloud(i, 1)), spec.disc_radius + 1e-12);
}

TEST(Surface, DeterministicAndColored) {
  RobotSpec spec;
  Rng rng(8);
  const auto arcs = motors_to_arcs(random_commands(spec, rng), spec);
  EXPECT_EQ(sample_surface(arcs, spec, 500, 3, {}), sample_surface(arcs, spec, 500, 3, {}));
  const auto colored = sample_surface(arcs, spec, 500, 3, {false, true});
  EXPECT_EQ(colored.channels(), 6u);
  EXPECT_NO_THROW(colored.validate());
  const auto r0 = ramp_color(0.0), r1 = ramp_color(1.0);
  EXPECT_NE(r0, r1);
}

TEST(Surface, BaseOnlyAddsPointsNearOrigin) {
  RobotSpec spec;
  Rng rng(9);
  const auto arcs = motors_to_arcs(random_commands(spec, rng), spec);
  const auto plain = sample_surface(arcs, spec, 3000, 4, {});
  const auto based = sample_surface(arcs, spec, 3000, 4, {true, false});
  ASSERT_GT(based.size(), plain.size());
  // Robot points are unchanged; everything extra is inside the base cylinder.
  for (std::size_t i = 0; i < plain.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(based(i, c), plain(i, c));
  for (std::size_t i = plain.size(); i < based.size(); ++i) {
    EXPECT_LE(based(i, 2), kBaseHeight + 1e-12);
    EXPECT_LE(std::hypot(based(i, 0), based(i, 1)), 2 * spec.disc_radius + 1e-12);
  }
  auto near_share = [](const pc::PointCloud& c) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < c.size(); ++i) k += c(i, 2) <= kBaseHeight;
    return static_cast<double>(k) / static_cast<double>(c.size());
  };
  EXPECT_GT(near_share(based), near_share(plain));
}

TEST(Dataset, SplitSizes) {
  const Split s = split_indices(10);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  const Split t = split_indices(301);
  EXPECT_EQ(t.train.size(), 240u);
  EXPECT_EQ(t.val.size(), 30u);
  EXPECT_EQ(t.test.size(), 31u);
}

TEST(Dataset, GeneratedBundleContents) {
  RobotSpec spec;
  GenConfig cfg;
  cfg.samples = 10;
  cfg.points = 300;
  cfg.seed = 7;
  const Dataset ds = generate_dataset(spec, cfg);
  ASSERT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.condition_width(), 6u);
  const double bound = spec.modules * spec.module_length + spec.disc_radius;
  for (const auto& c : ds.clouds) {
    ASSERT_EQ(c.size(), 300u);
    for (std::size_t i = 0; i < c.size(); ++i)
      EXPECT_LE(std::sqrt(c(i, 0) * c(i, 0) + c(i, 1) * c(i, 1) + c(i, 2) * c(i, 2)), bound);
  }
  for (const auto& row : ds.conditions)
    for (double q : row) EXPECT_LE(std::abs(q), spec.max_displacement);
  // Scale comes from the training split only.
  double scale = 0.0;
  for (std::size_t id : ds.split.train)
    for (double v : ds.clouds[id].data()) scale = std::max(scale, std::abs(v));
  EXPECT_EQ(ds.stats.scale, scale);
  const Dataset again = generate_dataset(spec, cfg);
  EXPECT_EQ(again.clouds, ds.clouds);
  EXPECT_EQ(again.conditions, ds.conditions);
}

TEST(Dataset, PayloadConditions) {
  RobotSpec spec;
  GenConfig cfg;
  cfg.samples = 60;
  cfg.points = 64;
  cfg.payload_max = 0.03;
  const Dataset ds = generate_dataset(spec, cfg);
  EXPECT_EQ(ds.condition_width(), 7u);
  std::size_t zeros = 0;
  for (const auto& row : ds.conditions) {
    ASSERT_EQ(row.size(), 7u);
    EXPECT_GE(row[6], 0.0);
    EXPECT_LE(row[6], 0.03 + 1e-9);
    zeros += row[6] == 0.0;
  }
  EXPECT_GT(zeros, 0u);
  EXPECT_LT(zeros, 20u);
  cfg.payload_max = 0.0;
  EXPECT_THROW(generate_dataset(spec, cfg), ContractViolation);
  cfg.payload_max.reset();
  cfg.samples = 9;
  EXPECT_THROW(generate_dataset(spec, cfg), ContractViolation);
}

TEST(Workspace, ContainsStraightPoseAndHullCoversTips) {
  RobotSpec spec;
  const Workspace ws = workspace_projection(spec, 300, 1);
  ASSERT_EQ(ws.tips.size(), 300u);
  EXPECT_EQ(ws.tips[0][0], 0.0);
  EXPECT_NEAR(ws.tips[0][1], 0.24, 1e-15);
  ASSERT_GE(ws.boundary.size(), 4u);
  EXPECT_EQ(ws.boundary.front(), ws.boundary.back());
  // Counter-clockwise hull: every tip is on the left of (or on) every edge.
  for (const auto& p : ws.tips)
    for (std::size_t k = 0; k + 1 < ws.boundary.size(); ++k) {
      const auto& a = ws.boundary[k];
      const auto& b = ws.boundary[k + 1];
      const double cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
      EXPECT_GE(cross, -1e-12);
    }
  EXPECT_THROW(workspace_projection(spec, 99, 1), ContractViolation);
}

TEST(Workspace, MoreModulesReachHigher) {
  double prev = 0.0;
  for (int s : {1, 2, 3, 5}) {
    RobotSpec spec;
    spec.modules = s;
    const Workspace ws = workspace_projection(spec, 100, 2);
    double top = 0.0;
    for (const auto& p : ws.tips) top = std::max(top, p[1]);
    EXPECT_NEAR(top, s * spec.module_length, 1e-12);
    EXPECT_GT(top, prev);
    prev = top;
  }
}

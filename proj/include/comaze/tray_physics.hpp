#pragma once

#include <array>
#include <cstdint>

namespace comaze {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

// Square tray centred on the origin. The two barrier walls lie on the line
// x + y = 0 and run from the tray corners inward, leaving a gap around the
// centre. The goal sits on the +x/+y side.
struct TrayGeometry {
  double side_length = 0.50;
  double gap_width = 0.09;
  Vec2 goal_center{0.19, 0.19};
  double goal_radius = 0.025;
  double ball_radius = 0.03;
  std::array<Vec2, 3> spawn_corners{{{-0.21, -0.21}, {0.15, -0.21}, {-0.21, 0.15}}};

  // Largest |x| or |y| the ball centre can reach.
  double ball_limit() const { return 0.5 * side_length - ball_radius; }
  std::array<Segment, 2> barrier_segments() const;
  bool on_start_side(Vec2 p) const { return p.x + p.y < 0.0; }

  // Throws std::invalid_argument on an inconsistent layout.
  void validate() const;
};

struct PhysicsConfig {
  double gravity = 9.81;
  double rolling_factor = 5.0 / 7.0;
  double linear_damping = 0.05;
  double wall_restitution = 0.3;
  double max_tilt = 0.10;
  double max_tilt_rate = 0.40;
  double substep_dt = 0.01;
  int substeps_per_frame = 20;
  double actuation_latency = 0.1;

  double frame_duration() const { return substep_dt * substeps_per_frame; }
  // Number of leading substeps that still use the previous frame's rates.
  int latency_substeps() const;
  void validate() const;
};

using Observation = std::array<double, 8>;

// x, y, vx, vy in the tray frame; theta is the tilt about the tray x-axis
// (driven by the agent, moves the ball along y), phi the tilt about the
// y-axis (driven by the partner, moves the ball along x).
struct TrayState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double theta_rate = 0.0;
  double phi_rate = 0.0;
  bool captured = false;

  // [x, y, vx, vy, theta, phi, theta_rate, phi_rate]
  Observation observation() const;
  static TrayState from_observation(const Observation& o, bool captured = false);
  Vec2 position() const { return {x, y}; }

  friend bool operator==(const TrayState&, const TrayState&) = default;
};

struct FrameEvents {
  bool goal_reached = false;
  int wall_hits = 0;
  int barrier_hits = 0;
  int substeps = 0;
};

struct FrameResult {
  TrayState state;
  FrameEvents events;
};

struct Acceleration {
  double ax = 0.0;
  double ay = 0.0;
};

Acceleration ball_acceleration(double theta, double phi, const PhysicsConfig& cfg);

// Advances one control frame. Actions are rate commands in [-1, 1] for the
// agent (theta) and partner (phi) axes; they take effect after the actuation
// latency, the previous rates hold until then. Throws std::logic_error when
// called on a captured state and std::invalid_argument on non-finite actions.
FrameResult step_frame(const TrayState& state, double agent_action, double partner_action,
                       const PhysicsConfig& cfg, const TrayGeometry& geom);

// Spawn cycle over the three start corners.
TrayState reset_tray(std::int64_t trial_index, const TrayGeometry& geom);
int spawn_corner_index(std::int64_t trial_index);

}  // namespace comaze

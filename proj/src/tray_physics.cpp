#include "comaze/tray_physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace comaze {

namespace {

constexpr int kContactPasses = 3;

double clamp_unit(double a) { return std::clamp(a, -1.0, 1.0); }

// Integrates one tilt axis and clamps it at the mechanical stop. The rate is
// zeroed when the stop is hit.
void integrate_tilt(double& angle, double& rate, double commanded, double dt, double max_tilt) {
  angle += commanded * dt;
  rate = commanded;
  if (angle > max_tilt) {
    angle = max_tilt;
    rate = 0.0;
  } else if (angle < -max_tilt) {
    angle = -max_tilt;
    rate = 0.0;
  }
}

Vec2 closest_point(const Segment& s, Vec2 p) {
  const double dx = s.b.x - s.a.x;
  const double dy = s.b.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return {s.a.x + t * dx, s.a.y + t * dy};
}

// Pushes the ball out of a barrier segment (end caps behave as points) and
// reflects the approaching normal velocity. Returns true on a bounce. A push
// that would cross a wall slides along that wall instead, so a ball wedged
// in the corner between the two ends up touching both.
bool resolve_barrier(TrayState& s, const Segment& seg, double radius, double limit, double restitution) {
  const Vec2 c = closest_point(seg, s.position());
  double nx = s.x - c.x;
  double ny = s.y - c.y;
  const double dist = std::hypot(nx, ny);
  if (dist >= radius || dist == 0.0) return false;
  nx /= dist;
  ny /= dist;
  s.x = c.x + nx * radius;
  s.y = c.y + ny * radius;
  if (std::abs(s.x) > limit && ny != 0.0) {
    s.x = std::copysign(limit, s.x);
    s.y = c.y + (radius - nx * (s.x - c.x)) / ny;
  } else if (std::abs(s.y) > limit && nx != 0.0) {
    s.y = std::copysign(limit, s.y);
    s.x = c.x + (radius - ny * (s.y - c.y)) / nx;
  }
  const double vn = s.vx * nx + s.vy * ny;
  if (vn >= 0.0) return false;
  s.vx -= (1.0 + restitution) * vn * nx;
  s.vy -= (1.0 + restitution) * vn * ny;
  return true;
}

bool resolve_wall(double& pos, double& vel, double limit, double restitution) {
  bool bounced = false;
  if (pos > limit) {
    pos = limit;
    if (vel > 0.0) {
      vel = -restitution * vel;
      bounced = true;
    }
  } else if (pos < -limit) {
    pos = -limit;
    if (vel < 0.0) {
      vel = -restitution * vel;
      bounced = true;
    }
  }
  return bounced;
}

}  // namespace

std::array<Segment, 2> TrayGeometry::barrier_segments() const {
  const double h = 0.5 * side_length;
  const double e = 0.5 * gap_width / std::sqrt(2.0);
  return {{{{-h, h}, {-e, e}}, {{h, -h}, {e, -e}}}};
}

void TrayGeometry::validate() const {
  if (!(side_length > 0.0) || !(ball_radius > 0.0) || !(goal_radius > 0.0)) {
    throw std::invalid_argument("geometry: lengths must be positive");
  }
  if (!(gap_width > 2.0 * ball_radius)) {
    throw std::invalid_argument("geometry: barrier gap must exceed the ball diameter");
  }
  const double wall = 0.5 * side_length;
  const double margin = wall - std::max(std::abs(goal_center.x), std::abs(goal_center.y));
  if (margin < goal_radius + ball_radius) {
    throw std::invalid_argument("geometry: goal too close to the boundary walls");
  }
  const double limit = ball_limit();
  const auto barriers = barrier_segments();
  for (const Vec2& corner : spawn_corners) {
    if (std::abs(corner.x) > limit || std::abs(corner.y) > limit) {
      throw std::invalid_argument("geometry: spawn corner outside the reachable area");
    }
    if (!on_start_side(corner)) {
      throw std::invalid_argument("geometry: spawn corner not on the start side of the barrier");
    }
    for (const Segment& seg : barriers) {
      const Vec2 c = closest_point(seg, corner);
      if (std::hypot(corner.x - c.x, corner.y - c.y) < ball_radius) {
        throw std::invalid_argument("geometry: spawn corner overlaps a barrier");
      }
    }
  }
}

int PhysicsConfig::latency_substeps() const {
  return static_cast<int>(std::lround(actuation_latency / substep_dt));
}

void PhysicsConfig::validate() const {
  if (!(substep_dt > 0.0) || substeps_per_frame <= 0) {
    throw std::invalid_argument("physics: substep_dt and substeps_per_frame must be positive");
  }
  if (std::abs(frame_duration() - 0.2) > 1e-12) {
    throw std::invalid_argument("physics: substep_dt * substeps_per_frame must equal 0.2 s");
  }
  if (wall_restitution < 0.0 || wall_restitution > 1.0) {
    throw std::invalid_argument("physics: wall_restitution must lie in [0, 1]");
  }
  if (!(max_tilt > 0.0) || !(max_tilt_rate > 0.0)) {
    throw std::invalid_argument("physics: tilt limits must be positive");
  }
  if (!(max_tilt_rate * frame_duration() < max_tilt)) {
    throw std::invalid_argument("physics: one frame must not sweep the full tilt range");
  }
  if (actuation_latency < 0.0 || actuation_latency > 0.1 + 1e-12) {
    throw std::invalid_argument("physics: actuation_latency must lie in [0, 0.1] s");
  }
  if (gravity < 0.0 || rolling_factor <= 0.0 || linear_damping < 0.0) {
    throw std::invalid_argument("physics: gravity, rolling_factor, damping out of range");
  }
}

Observation TrayState::observation() const {
  return {x, y, vx, vy, theta, phi, theta_rate, phi_rate};
}

TrayState TrayState::from_observation(const Observation& o, bool captured) {
  return {o[0], o[1], o[2], o[3], o[4], o[5], o[6], o[7], captured};
}

Acceleration ball_acceleration(double theta, double phi, const PhysicsConfig& cfg) {
  const double k = cfg.rolling_factor * cfg.gravity;
  return {k * std::sin(phi), -k * std::sin(theta)};
}

FrameResult step_frame(const TrayState& state, double agent_action, double partner_action,
                       const PhysicsConfig& cfg, const TrayGeometry& geom) {
  if (state.captured) {
    throw std::logic_error("step_frame: state is already captured");
  }
  if (!std::isfinite(agent_action) || !std::isfinite(partner_action)) {
    throw std::invalid_argument("step_frame: non-finite action");
  }

  FrameResult out{state, {}};
  TrayState& s = out.state;
  FrameEvents& ev = out.events;

  const double prev_theta_rate = state.theta_rate;
  const double prev_phi_rate = state.phi_rate;
  const double new_theta_rate = clamp_unit(agent_action) * cfg.max_tilt_rate;
  const double new_phi_rate = clamp_unit(partner_action) * cfg.max_tilt_rate;
  const int latency = cfg.latency_substeps();
  const double dt = cfg.substep_dt;
  const double damping = 1.0 - cfg.linear_damping * dt;
  const double limit = geom.ball_limit();
  const auto barriers = geom.barrier_segments();

  for (int k = 0; k < cfg.substeps_per_frame; ++k) {
    const bool delayed = k < latency;
    integrate_tilt(s.theta, s.theta_rate, delayed ? prev_theta_rate : new_theta_rate, dt,
                   cfg.max_tilt);
    integrate_tilt(s.phi, s.phi_rate, delayed ? prev_phi_rate : new_phi_rate, dt, cfg.max_tilt);

    const Acceleration acc = ball_acceleration(s.theta, s.phi, cfg);
    s.vx = (s.vx + acc.ax * dt) * damping;
    s.vy = (s.vy + acc.ay * dt) * damping;
    s.x += s.vx * dt;
    s.y += s.vy * dt;

    // A ball wedged between a barrier and a wall needs a couple of passes.
    for (int pass = 0; pass < kContactPasses; ++pass) {
      if (resolve_wall(s.x, s.vx, limit, cfg.wall_restitution)) ++ev.wall_hits;
      if (resolve_wall(s.y, s.vy, limit, cfg.wall_restitution)) ++ev.wall_hits;
      for (const Segment& seg : barriers) {
        if (resolve_barrier(s, seg, geom.ball_radius, limit, cfg.wall_restitution)) ++ev.barrier_hits;
      }
    }

    ++ev.substeps;
    if (std::hypot(s.x - geom.goal_center.x, s.y - geom.goal_center.y) <= geom.goal_radius) {
      s.captured = true;
      ev.goal_reached = true;
      break;
    }
  }
  return out;
}

int spawn_corner_index(std::int64_t trial_index) {
  if (trial_index < 0) throw std::invalid_argument("reset: negative trial index");
  return static_cast<int>(trial_index % 3);
}

TrayState reset_tray(std::int64_t trial_index, const TrayGeometry& geom) {
  const Vec2 corner = geom.spawn_corners[static_cast<std::size_t>(spawn_corner_index(trial_index))];
  TrayState s;
  s.x = corner.x;
  s.y = corner.y;
  return s;
}

}  // namespace comaze

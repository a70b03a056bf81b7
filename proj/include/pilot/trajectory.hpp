#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pilot/camera.hpp"
#include "pilot/error.hpp"
#include "pilot/se3.hpp"

namespace pilot {

enum class TrajectoryPattern { Line, Orbit, BarrelRoll };

inline std::string to_string(TrajectoryPattern p) {
  switch (p) {
    case TrajectoryPattern::Line: return "line";
    case TrajectoryPattern::Orbit: return "orbit";
    case TrajectoryPattern::BarrelRoll: return "barrel-roll";
  }
  return "line";
}

inline TrajectoryPattern trajectory_pattern_from_string(const std::string& s) {
  if (s == "line") return TrajectoryPattern::Line;
  if (s == "orbit") return TrajectoryPattern::Orbit;
  if (s == "barrel-roll" || s == "barrel_roll") return TrajectoryPattern::BarrelRoll;
  throw Error(ErrorCode::ParseError, "unknown trajectory pattern '" + s + "'");
}

/**
 * Parametric flight path. Distances in metres, angles in radians, speeds per
 * frame. The camera looks forward along the heading and `pitch` below the
 * horizon.
 */
struct TrajectorySpec {
  TrajectoryPattern pattern = TrajectoryPattern::Line;
  int frames = 200;
  Vec3 start = Vec3(-300.0, -150.0, 200.0);
  double heading = 0.45;
  double speed = 2.0;
  double pitch = 60.0 * kDegToRad;
  double orbit_radius = 300.0;       // orbit: circle around start
  double roll_amplitude = 8.0 * kDegToRad;  // barrel-roll
  double roll_period = 60.0;         // frames per roll cycle
  double helix_radius = 6.0;         // barrel-roll lateral/vertical swing
};

/// Ground-truth poses, one per frame.
inline std::vector<Pose> generate_trajectory(const TrajectorySpec& s) {
  if (s.frames <= 0) throw Error(ErrorCode::ConfigMismatch, "trajectory needs at least one frame");
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(s.frames));
  const Vec3 forward(std::cos(s.heading), std::sin(s.heading), 0.0);
  const Vec3 left(-std::sin(s.heading), std::cos(s.heading), 0.0);
  for (int i = 0; i < s.frames; ++i) {
    const double t = static_cast<double>(i);
    switch (s.pattern) {
      case TrajectoryPattern::Line:
        out.push_back(camera_pose(s.start + t * s.speed * forward, {s.heading, s.pitch, 0.0}));
        break;
      case TrajectoryPattern::Orbit: {
        // Counter-clockwise circle around `start`, camera facing along the tangent.
        const double w = s.speed / s.orbit_radius;
        const double a = s.heading + w * t;
        const Vec3 p = s.start + s.orbit_radius * Vec3(std::cos(a), std::sin(a), 0.0);
        out.push_back(camera_pose(p, {a + 0.5 * kPi, s.pitch, 0.0}));
        break;
      }
      case TrajectoryPattern::BarrelRoll: {
        const double phase = 2.0 * kPi * t / s.roll_period;
        const Vec3 p = s.start + t * s.speed * forward + s.helix_radius * std::sin(phase) * left +
                       s.helix_radius * (1.0 - std::cos(phase)) * Vec3::UnitZ();
        out.push_back(camera_pose(p, {s.heading, s.pitch, s.roll_amplitude * std::sin(phase)}));
        break;
      }
    }
  }
  return out;
}

}  // namespace pilot

#pragma once

#include <random>

#include "pilot/pilot.hpp"

namespace pilot::test {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

/// Random rotation with angle below `max_angle` and translation within +-`max_t`.
inline Pose random_pose(std::mt19937_64& rng, double max_angle = 3.0, double max_t = 10.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), a(0.0, 1.0);
  const Vec3 phi = random_unit(rng) * max_angle * a(rng);
  return {so3_exp(phi), Vec3(max_t * u(rng), max_t * u(rng), max_t * u(rng))};
}

inline Intrinsics standard_intrinsics() { return {89.6, 89.6, 63.5, 63.5, 128, 128}; }

inline Scene standard_scene() { return Scene(SceneSpec{7, 4000.0, 1.0}); }

/// Camera at 200 m looking 60 degrees down over the standard scene.
inline Pose standard_pose(double x = 100.0, double y = -50.0, double yaw = 0.4) {
  return camera_pose(Vec3(x, y, 200.0), EulerAngles{yaw, 60.0 * kDegToRad, 0.0});
}

inline double rotation_error_deg(const Pose& a, const Pose& b) {
  return rotation_angle(a.rotation().transpose() * b.rotation()) * kRadToDeg;
}

inline double translation_error(const Pose& a, const Pose& b) { return (a.translation() - b.translation()).norm(); }

}  // namespace pilot::test

#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "pilot/error.hpp"
#include "pilot/se3.hpp"

namespace pilot {

/// Points closer to the image plane than this are treated as behind the camera.
inline constexpr double kMinDepth = 1e-6;

inline constexpr int kNumLevels = 3;

using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/**
 * Pinhole intrinsics. Integer pixel coordinates name pixel centers, so the
 * image spans [-0.5, width - 0.5] horizontally.
 */
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && cx > 0.0 && cx < width && cy > 0.0 && cy < height;
  }

  void validate() const {
    if (!valid()) {
      throw Error(ErrorCode::BadDimensions, "intrinsics violate fx,fy > 0 and 0 < c < size");
    }
  }

  bool operator==(const Intrinsics&) const = default;
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vector() const { return {u, v}; }
};

inline PixelPoint project(const Intrinsics& k, const Vec3& point_cam) {
  if (!(point_cam.z() > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "z = " + std::to_string(point_cam.z()));
  }
  const double inv_z = 1.0 / point_cam.z();
  return {k.fx * point_cam.x() * inv_z + k.cx, k.fy * point_cam.y() * inv_z + k.cy};
}

inline Vec3 back_project(const Intrinsics& k, const PixelPoint& p, double depth) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "depth = " + std::to_string(depth));
  }
  return {depth * (p.u - k.cx) / k.fx, depth * (p.v - k.cy) / k.fy, depth};
}

/// Unit-z ray K^-1 (u, v, 1).
inline Vec3 pixel_ray(const Intrinsics& k, const PixelPoint& p) {
  return {(p.u - k.cx) / k.fx, (p.v - k.cy) / k.fy, 1.0};
}

inline double level_scale(int level) {
  switch (level) {
    case 0: return 0.25;
    case 1: return 0.5;
    case 2: return 1.0;
    default: throw Error(ErrorCode::BadDimensions, "pyramid level must be 0, 1 or 2");
  }
}

/// Maps a fine-level (level 2) pixel coordinate to the given level.
inline PixelPoint scale_pixel(const PixelPoint& p, int level) {
  const double s = level_scale(level);
  return {(p.u + 0.5) * s - 0.5, (p.v + 0.5) * s - 0.5};
}

/// Intrinsics of pyramid level 0 (1/4), 1 (1/2) or 2 (full resolution).
inline Intrinsics level_intrinsics(const Intrinsics& k, int level) {
  if (k.width % 4 != 0 || k.height % 4 != 0 || k.width <= 0 || k.height <= 0) {
    throw Error(ErrorCode::BadDimensions,
                std::to_string(k.width) + "x" + std::to_string(k.height) + " not divisible by 4");
  }
  const double s = level_scale(level);
  Intrinsics out;
  out.fx = k.fx * s;
  out.fy = k.fy * s;
  out.cx = (k.cx + 0.5) * s - 0.5;
  out.cy = (k.cy + 0.5) * s - 0.5;
  out.width = static_cast<int>(k.width * s);
  out.height = static_cast<int>(k.height * s);
  return out;
}

/// d pi / d P_c, evaluated at a camera-frame point.
inline Mat23 projection_jacobian(const Intrinsics& k, const Vec3& point_cam) {
  const double z = point_cam.z();
  if (!(z > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "z = " + std::to_string(z));
  }
  const double inv_z = 1.0 / z;
  const double inv_z2 = inv_z * inv_z;
  Mat23 j;
  j << k.fx * inv_z, 0.0, -k.fx * point_cam.x() * inv_z2,
       0.0, k.fy * inv_z, -k.fy * point_cam.y() * inv_z2;
  return j;
}

/**
 * Derivative of the camera-frame point P_c = T^-1 P_w with respect to the
 * twist of a left update T <- exp(xi) T, at xi = 0.
 *
 *   P_c(xi) = T^-1 exp(-xi) P_w  =>  dP_c/drho = -R^T,  dP_c/dphi = R^T [P_w]x
 */
inline Mat36 pose_point_jacobian(const Pose& world_from_camera, const Vec3& world_point) {
  const Mat3 rt = world_from_camera.rotation().transpose();
  Mat36 j;
  j.leftCols<3>() = -rt;
  j.rightCols<3>() = rt * skew(world_point);
  return j;
}

/**
 * Camera orientation from a vehicle attitude. The body frame is
 * forward-left-up; the camera looks along body forward with image x to the
 * right and image y down. Positive pitch tilts the optical axis downward.
 */
inline Mat3 camera_rotation_from_attitude(const EulerAngles& attitude) {
  Mat3 body_from_camera;
  body_from_camera << 0.0, 0.0, 1.0,
                      -1.0, 0.0, 0.0,
                      0.0, -1.0, 0.0;
  return rotation_from_euler(attitude) * body_from_camera;
}

inline EulerAngles attitude_from_camera_rotation(const Mat3& world_from_camera) {
  Mat3 camera_from_body;
  camera_from_body << 0.0, -1.0, 0.0,
                      0.0, 0.0, -1.0,
                      1.0, 0.0, 0.0;
  return euler_from_rotation(world_from_camera * camera_from_body);
}

inline Pose camera_pose(const Vec3& position, const EulerAngles& attitude) {
  return {camera_rotation_from_attitude(attitude), position};
}

}  // namespace pilot

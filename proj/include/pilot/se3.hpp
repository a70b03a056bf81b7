#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pilot/error.hpp"

namespace pilot {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Below this rotation angle exp/log use their Taylor forms.
inline constexpr double kSmallAngle = 1e-8;
/// log() refuses rotations closer than this to pi.
inline constexpr double kNearPiMargin = 1e-6;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

/**
 * Element of se(3). Vector layout is (rho, phi): translational part first,
 * rotational part second. The same order is used for every 6-column Jacobian.
 */
struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& rho_in, const Vec3& phi_in) : rho(rho_in), phi(phi_in) {}
  explicit Twist(const Vec6& v) : rho(v.head<3>()), phi(v.tail<3>()) {}

  Vec6 vector() const {
    Vec6 v;
    v << rho, phi;
    return v;
  }

  double squared_norm() const { return rho.squaredNorm() + phi.squaredNorm(); }

  Twist operator*(double s) const { return {rho * s, phi * s}; }
  Twist operator+(const Twist& o) const { return {rho + o.rho, phi + o.phi}; }
};

/// Rigid transform x -> R x + t. Poses in this library are world-from-camera.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Pose(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return {}; }

  static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  static Pose from_matrix(const Mat4& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Eigen::Quaterniond quaternion() const {
    Eigen::Quaterniond q(rotation_);
    q.normalize();
    // Canonical sign keeps serialized files stable.
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return q;
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Pose inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {rt, -rt * translation_};
  }

  Vec3 apply(const Vec3& point) const { return rotation_ * point + translation_; }

  Pose operator*(const Pose& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

  /// Max-abs deviation of R^T R from identity.
  double orthonormality_error() const {
    return (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  /// Re-projects the rotation onto SO(3) through the quaternion.
  Pose normalized() const { return from_quaternion(Eigen::Quaterniond(rotation_), translation_); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose inverse(const Pose& p) { return p.inverse(); }
inline Vec3 apply(const Pose& p, const Vec3& point) { return p.apply(point); }

namespace detail {

// Coefficients of the Rodrigues/V-matrix series:
//   a = sin(t)/t, b = (1 - cos t)/t^2, c = (t - sin t)/t^3.
struct ExpCoefficients {
  double a, b, c;
};

inline ExpCoefficients exp_coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    return {1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0};
  }
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  return {s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta)};
}

}  // namespace detail

inline Mat3 so3_exp(const Vec3& phi) {
  const auto k = detail::exp_coefficients(phi.norm());
  const Mat3 w = skew(phi);
  return Mat3::Identity() + k.a * w + k.b * w * w;
}

/// Rotation angle in [0, pi], computed with atan2 for accuracy at both ends.
inline double rotation_angle(const Mat3& r) {
  const double s = 0.5 * vee(r - r.transpose()).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

/// Rotational logarithm; throws AngleNearPi when the axis is ill-conditioned.
inline Vec3 so3_log(const Mat3& r) {
  const double theta = rotation_angle(r);
  if (theta >= kPi - kNearPiMargin) {
    throw Error(ErrorCode::AngleNearPi, "rotation angle " + std::to_string(theta) + " rad");
  }
  const Vec3 axis_sin = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  if (theta < kSmallAngle) {
    return (1.0 + theta * theta / 6.0) * axis_sin;
  }
  return (theta / std::sin(theta)) * axis_sin;
}

inline Pose exp(const Twist& xi) {
  const double theta = xi.phi.norm();
  const auto k = detail::exp_coefficients(theta);
  const Mat3 w = skew(xi.phi);
  const Mat3 w2 = w * w;
  const Mat3 r = Mat3::Identity() + k.a * w + k.b * w2;
  const Mat3 v = Mat3::Identity() + k.b * w + k.c * w2;
  return {r, v * xi.rho};
}

inline Twist log(const Pose& p) {
  const Vec3 phi = so3_log(p.rotation());
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  // V^-1 = I - w/2 + d w^2 with d = (1 - a/(2b)) / theta^2.
  double d;
  // The closed form cancels badly for small angles; the series is exact to
  // double precision below 1e-2.
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const auto k = detail::exp_coefficients(theta);
    d = (1.0 - k.a / (2.0 * k.b)) / (theta * theta);
  }
  const Mat3 v_inv = Mat3::Identity() - 0.5 * w + d * w * w;
  return {v_inv * p.translation(), phi};
}

/// ||log(a^-1 b)||^2 with radians and meters summed unweighted.
inline double geodesic_distance_sq(const Pose& a, const Pose& b) {
  return log(a.inverse() * b).squared_norm();
}

/**
 * Intrinsic yaw-pitch-roll: R = Rz(yaw) * Ry(pitch) * Rx(roll).
 *
 * This is the only Euler convention in the library. Hypothesis sampling,
 * trajectory generation and reporting all go through it.
 */
struct EulerAngles {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

inline Mat3 rotation_from_euler(const EulerAngles& e) {
  return (Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(e.roll, Vec3::UnitX()))
      .toRotationMatrix();
}

inline EulerAngles euler_from_rotation(const Mat3& r) {
  EulerAngles e;
  e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  e.roll = std::atan2(r(2, 1), r(2, 2));
  return e;
}

}  // namespace pilot

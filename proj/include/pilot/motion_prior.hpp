#pragma once

#include <Eigen/Core>

#include "pilot/se3.hpp"

namespace pilot {

using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Noise model of the constant-velocity predictor. Units are per frame.
struct MotionNoise {
  double position_process = 0.1;   // m
  double velocity_process = 0.05;  // m / frame
  double measurement = 0.2;        // m
  double angular_smoothing = 0.5;  // beta: weight of the newest angular-velocity measurement
};

/**
 * Constant-velocity motion state.
 *
 * Translation runs a linear Kalman filter per axis with state (position,
 * velocity); `covariance` is the joint 6x6 [position; velocity] covariance.
 * Rotation is extrapolated with an exponentially smoothed body-frame angular
 * velocity. `velocity.rho` is the world-frame translational velocity and
 * `velocity.phi` the body-frame rotation per frame.
 */
struct MotionState {
  Pose pose;
  Twist velocity;
  Mat6 covariance = Mat6::Zero();
  int measurements = 0;

  Mat3 cov_translation() const { return covariance.topLeftCorner<3, 3>(); }
  Mat3 cov_velocity() const { return covariance.bottomRightCorner<3, 3>(); }
};

struct MotionPrediction {
  Pose pose;
  Vec3 mu_t = Vec3::Zero();
  Mat3 sigma_t = Mat3::Zero();
};

inline MotionPrediction predict(const MotionState& state, int frames_ahead, const MotionNoise& noise = {}) {
  const double k = static_cast<double>(frames_ahead);
  MotionPrediction out;
  out.pose = Pose(state.pose.rotation() * so3_exp(k * state.velocity.phi),
                  state.pose.translation() + k * state.velocity.rho);
  const double q = noise.position_process * noise.position_process;
  out.sigma_t = state.cov_translation() + k * k * state.cov_velocity() + q * Mat3::Identity();
  return out;
}

namespace detail {

inline Mat6 transition() {
  Mat6 f = Mat6::Identity();
  f.topRightCorner<3, 3>() = Mat3::Identity();
  return f;
}

inline Mat6 process_noise(const MotionNoise& n) {
  Mat6 q = Mat6::Zero();
  q.topLeftCorner<3, 3>() = n.position_process * n.position_process * Mat3::Identity();
  q.bottomRightCorner<3, 3>() = n.velocity_process * n.velocity_process * Mat3::Identity();
  return q;
}

inline Mat6 symmetrize(const Mat6& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Advances the state one frame with no measurement.
inline MotionState coast(const MotionState& state, const MotionNoise& noise = {}) {
  MotionState next = state;
  next.pose = predict(state, 1, noise).pose;
  const Mat6 f = detail::transition();
  next.covariance = detail::symmetrize(f * state.covariance * f.transpose() + detail::process_noise(noise));
  return next;
}

/**
 * One-frame predict + correct with a measured pose.
 *
 * The first measurement seeds the position; the second seeds the velocity
 * from the two-point difference, which makes the filter exact on noiseless
 * constant-velocity input from then on.
 */
inline MotionState update(const MotionState& state, const Pose& measured, const MotionNoise& noise = {}) {
  const double r = noise.measurement * noise.measurement;
  MotionState next = state;
  next.measurements = state.measurements + 1;

  if (state.measurements == 0) {
    next.pose = measured;
    next.velocity = Twist();
    next.covariance = Mat6::Zero();
    next.covariance.topLeftCorner<3, 3>() = r * Mat3::Identity();
    next.covariance.bottomRightCorner<3, 3>() = 4.0 * r * Mat3::Identity();
    return next;
  }

  const Vec3 angular_meas = so3_log(state.pose.rotation().transpose() * measured.rotation());

  if (state.measurements == 1) {
    next.pose = measured;
    next.velocity = Twist(measured.translation() - state.pose.translation(), angular_meas);
    next.covariance = Mat6::Zero();
    next.covariance.topLeftCorner<3, 3>() = r * Mat3::Identity();
    next.covariance.topRightCorner<3, 3>() = r * Mat3::Identity();
    next.covariance.bottomLeftCorner<3, 3>() = r * Mat3::Identity();
    next.covariance.bottomRightCorner<3, 3>() = 2.0 * r * Mat3::Identity();
    return next;
  }

  const Mat6 f = detail::transition();
  Eigen::Matrix<double, 6, 1> x;
  x << state.pose.translation(), state.velocity.rho;
  x = f * x;
  const Mat6 p = detail::symmetrize(f * state.covariance * f.transpose() + detail::process_noise(noise));

  Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
  h.leftCols<3>() = Mat3::Identity();
  const Mat3 s = h * p * h.transpose() + r * Mat3::Identity();
  const Eigen::Matrix<double, 6, 3> gain = p * h.transpose() * s.inverse();
  x += gain * (measured.translation() - x.head<3>());
  const Mat6 i_kh = Mat6::Identity() - gain * h;
  next.covariance = detail::symmetrize(i_kh * p * i_kh.transpose() + r * gain * gain.transpose());

  const double beta = noise.angular_smoothing;
  next.velocity = Twist(x.tail<3>(), beta * angular_meas + (1.0 - beta) * state.velocity.phi);
  next.pose = Pose(measured.rotation(), x.head<3>());
  return next;
}

}  // namespace pilot

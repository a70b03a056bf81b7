#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace pilot;

TEST(Trajectory, LineMovesAtConstantSpeed) {
  TrajectorySpec ts;
  ts.frames = 10;
  const auto t = generate_trajectory(ts);
  ASSERT_EQ(t.size(), 10u);
  for (size_t i = 1; i < t.size(); ++i) {
    EXPECT_NEAR(test::translation_error(t[i], t[i - 1]), ts.speed, 1e-12);
    EXPECT_EQ(t[i].rotation(), t[0].rotation());
  }
  const EulerAngles a = attitude_from_camera_rotation(t[0].rotation());
  EXPECT_NEAR(a.yaw, ts.heading, 1e-12);
  EXPECT_NEAR(a.pitch, ts.pitch, 1e-12);
}

TEST(Trajectory, OrbitKeepsRadiusAndFacesTheTangent) {
  TrajectorySpec ts;
  ts.pattern = TrajectoryPattern::Orbit;
  ts.frames = 50;
  const auto t = generate_trajectory(ts);
  for (size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR((t[i].translation() - ts.start).norm(), ts.orbit_radius, 1e-9);
    if (i == 0) continue;
    const Vec3 v = t[i].translation() - t[i - 1].translation();
    const double yaw = attitude_from_camera_rotation(t[i].rotation()).yaw;
    EXPECT_LT(std::abs(std::remainder(std::atan2(v.y(), v.x()) - yaw, 2 * kPi)), 0.01);
  }
}

TEST(Trajectory, BarrelRollOscillatesInRoll) {
  TrajectorySpec ts;
  ts.pattern = TrajectoryPattern::BarrelRoll;
  ts.frames = 61;
  const auto t = generate_trajectory(ts);
  double max_roll = 0.0;
  for (const auto& p : t) max_roll = std::max(max_roll, std::abs(attitude_from_camera_rotation(p.rotation()).roll));
  EXPECT_NEAR(max_roll, ts.roll_amplitude, 1e-3);
  EXPECT_LT(test::translation_error(t.back(), camera_pose(ts.start + 60.0 * ts.speed * Vec3(std::cos(ts.heading), std::sin(ts.heading), 0), {})), 1e-9);
}

TEST(Trajectory, PatternNamesAndErrors) {
  for (auto p : {TrajectoryPattern::Line, TrajectoryPattern::Orbit, TrajectoryPattern::BarrelRoll})
    EXPECT_EQ(trajectory_pattern_from_string(to_string(p)), p);
  EXPECT_THROW(trajectory_pattern_from_string("loop"), Error);
  TrajectorySpec ts;
  ts.frames = 0;
  EXPECT_THROW(generate_trajectory(ts), Error);
}

TEST(Ablation, VariantConfigsToggleOneAxis) {
  AblationConfig ab;
  ab.base.jngo.lambda_motion = 0.01;
  const SequenceConfig full = ablation_trial_config(ab, AblationVariant::Full, 10.0, 3);
  EXPECT_EQ(full.trajectory.size(), 3u);
  EXPECT_TRUE(full.prior.exact);
  EXPECT_DOUBLE_EQ(full.prior.translation, 10.0);
  EXPECT_DOUBLE_EQ(full.prior.yaw, 10.0 * kDegToRad);
  const SequenceConfig iso = ablation_trial_config(ab, AblationVariant::Isotropic, 10.0, 3);
  EXPECT_EQ(iso.jngo.sampler.mode, SamplingMode::Isotropic);
  EXPECT_EQ(hypothesis_count(iso.jngo.sampler), hypothesis_count(full.jngo.sampler));
  EXPECT_EQ(ablation_trial_config(ab, AblationVariant::NoMotionReg, 10.0, 3).jngo.lambda_motion, 0.0);
  const SequenceConfig single = ablation_trial_config(ab, AblationVariant::SingleHypothesis, 10.0, 3);
  EXPECT_EQ(hypothesis_count(single.jngo.sampler), 1u);
  // Every variant of a trial flies the same path.
  EXPECT_EQ(single.trajectory.back().translation(), full.trajectory.back().translation());
  EXPECT_EQ(iso.rng_seed, full.rng_seed);
  EXPECT_NE(ablation_trial_config(ab, AblationVariant::Full, 10.0, 4).rng_seed, full.rng_seed);
}

TEST(Ablation, AxisNamesRoundTrip) {
  for (auto a : {AblationAxis::RotationAware, AblationAxis::MotionReg, AblationAxis::MultiHypothesis})
    EXPECT_EQ(ablation_axis_from_string(to_string(a)), a);
  EXPECT_EQ(off_variant(AblationAxis::RotationAware), AblationVariant::Isotropic);
  EXPECT_THROW(ablation_axis_from_string("none"), Error);
}

TEST(Ablation, SmallRunSharesTheFullCells) {
  AblationConfig ab;
  ab.base.scene = SceneSpec{7, 4000.0, 1.0};
  ab.base.jngo.lambda_motion = 0.0069;
  ab.base.rng_seed = 3;
  ab.trials = 2;
  ab.trajectory.frames = 2;
  ab.levels = {3.0};
  AblationRunner runner(ab);
  const AblationTable rot = runner.run(AblationAxis::RotationAware);
  const AblationTable mot = runner.run(AblationAxis::MotionReg);
  ASSERT_EQ(rot.on.size(), 1u);
  EXPECT_EQ(rot.on[0].frames, 4);
  EXPECT_EQ(rot.on[0].hits, mot.on[0].hits);
  EXPECT_EQ(rot.on[0].recall, 100.0 * rot.on[0].hits / 4);
  EXPECT_EQ(rot.on[0].hits, 4);  // 3 m / 3 deg is well inside the basin
}

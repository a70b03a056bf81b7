#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace pilot;

TEST(CameraProject, OpticalAxisAndSimilarTriangle) {
  const Intrinsics k{100, 100, 256, 256, 512, 512};
  const PixelPoint c = project(k, Vec3(0, 0, 10));
  EXPECT_EQ(c.u, 256.0);
  EXPECT_EQ(c.v, 256.0);
  const PixelPoint p = project(k, Vec3(1, 0, 1));
  EXPECT_EQ(p.u, 356.0);
  EXPECT_EQ(p.v, 256.0);
}

TEST(CameraProject, BehindCameraThrows) {
  const Intrinsics k{100, 100, 256, 256, 512, 512};
  EXPECT_THROW(project(k, Vec3(0, 0, -1)), Error);
  EXPECT_THROW(project(k, Vec3(0, 0, 0)), Error);
}

TEST(CameraBackProject, PrincipalPointAndErrors) {
  const Intrinsics k{100, 100, 256, 256, 512, 512};
  EXPECT_EQ(back_project(k, {256, 256}, 5.0), Vec3(0, 0, 5));
  try {
    back_project(k, {1, 1}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
  }
}

TEST(CameraBackProject, RoundTripProperty) {
  const Intrinsics k = test::standard_intrinsics();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 127.0), logd(std::log(0.1), std::log(1e4));
  for (int i = 0; i < 10000; ++i) {
    const PixelPoint p{u(rng), u(rng)};
    const double d = std::exp(logd(rng));
    const PixelPoint q = project(k, back_project(k, p, d));
    ASSERT_LT(std::hypot(q.u - p.u, q.v - p.v), 1e-9);
  }
}

TEST(CameraBackProject, RenderedAnchorsReprojectIntoSecondView) {
  const Scene scene = test::standard_scene();
  const Intrinsics k = test::standard_intrinsics();
  const Pose a = test::standard_pose();
  const Pose b = exp(Twist(Vec3(2.0, -1.0, 0.5), Vec3(0.0, 0.0, 0.01))) * a;
  const RenderedView va = render(scene, a, k);
  const RenderedView vb = render(scene, b, k);
  int checked = 0;
  for (int y = 4; y < 124; y += 8) {
    for (int x = 4; x < 124; x += 8) {
      if (!va.depth.is_valid(x, y)) continue;
      const Vec3 pw = a.apply(back_project(k, {double(x), double(y)}, va.depth.at(x, y)));
      const PixelPoint pb = project(k, b.inverse().apply(pw));
      const int xb = static_cast<int>(std::lround(pb.u)), yb = static_cast<int>(std::lround(pb.v));
      if (xb < 1 || yb < 1 || xb > 126 || yb > 126 || !vb.depth.is_valid(xb, yb)) continue;
      // The second render's ray through pb hits the same world point.
      const Vec3 dir = (b.rotation() * pixel_ray(k, pb)).normalized();
      const Vec3 hit = raycast(scene, b.translation(), dir);
      const PixelPoint back = project(k, b.inverse().apply(hit));
      EXPECT_LT(std::hypot(back.u - pb.u, back.v - pb.v), 0.5);
      EXPECT_LT((hit - pw).norm(), 0.05);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(CameraLevels, ScalingAndHalfPixelConvention) {
  const Intrinsics k{400, 400, 255.5, 255.5, 512, 512};
  EXPECT_EQ(level_intrinsics(k, 2), k);
  const Intrinsics k0 = level_intrinsics(k, 0);
  EXPECT_EQ(k0.width, 128);
  EXPECT_EQ(k0.height, 128);
  EXPECT_EQ(level_intrinsics(k, 1).width, 256);
  const Vec3 pc(3.0, -2.0, 40.0);
  const PixelPoint fine = project(k, pc);
  const PixelPoint coarse = project(k0, pc);
  EXPECT_NEAR(coarse.u, (fine.u + 0.5) / 4.0 - 0.5, 1e-9);
  EXPECT_NEAR(coarse.v, (fine.v + 0.5) / 4.0 - 0.5, 1e-9);
  EXPECT_THROW(level_intrinsics({400, 400, 255.5, 255.5, 510, 512}, 0), Error);
  EXPECT_THROW(level_intrinsics(k, 3), Error);
}

TEST(CameraJacobian, ProjectionMatchesFiniteDifferences) {
  const Intrinsics k = test::standard_intrinsics();
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> xy(-50, 50), z(20, 400);
  const double h = 1e-4;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(xy(rng), xy(rng), z(rng));
    const Mat23 j = projection_jacobian(k, p);
    Mat23 fd;
    for (int c = 0; c < 3; ++c) {
      Vec3 d = Vec3::Zero();
      d[c] = h;
      const PixelPoint a = project(k, p + d), b = project(k, p - d);
      fd.col(c) = Eigen::Vector2d(a.u - b.u, a.v - b.v) / (2 * h);
    }
    worst = std::max(worst, (fd - j).norm() / j.norm());
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(CameraJacobian, ProjectionStructure) {
  const Intrinsics k = test::standard_intrinsics();
  const Mat23 on_axis = projection_jacobian(k, Vec3(0, 0, 10));
  EXPECT_EQ(on_axis(0, 1), 0.0);
  EXPECT_EQ(on_axis(0, 2), 0.0);
  EXPECT_EQ(on_axis(1, 0), 0.0);
  EXPECT_EQ(on_axis(1, 2), 0.0);
  const Mat23 far = projection_jacobian(k, Vec3(0, 0, 20));
  EXPECT_EQ(far(0, 0), on_axis(0, 0) / 2.0);
}

TEST(CameraJacobian, PosePointMatchesFiniteDifferences) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-100, 100);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Pose t = test::random_pose(rng, 3.0, 100.0);
    const Vec3 pw(u(rng), u(rng), u(rng));
    const Mat36 j = pose_point_jacobian(t, pw);
    Mat36 fd;
    for (int c = 0; c < 6; ++c) {
      Vec6 e = Vec6::Zero();
      e[c] = h;
      const Vec3 a = (exp(Twist(e)) * t).inverse().apply(pw);
      const Vec3 b = (exp(Twist(Vec6(-e))) * t).inverse().apply(pw);
      fd.col(c) = (a - b) / (2 * h);
    }
    worst = std::max(worst, (fd - j).norm() / j.norm());
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(CameraJacobian, PosePointBlocks) {
  // Identity pose: translation block is -I, rotation block at (1,0,0) is [x]x with x = (1,0,0).
  const Mat36 j = pose_point_jacobian(Pose(), Vec3(1, 0, 0));
  EXPECT_TRUE(j.leftCols<3>().isApprox(-Mat3::Identity()));
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_TRUE(j.rightCols<3>().isApprox(expected));
}

TEST(CameraAttitude, PositivePitchLooksDown) {
  const Pose p = camera_pose(Vec3::Zero(), EulerAngles{0.0, 60.0 * kDegToRad, 0.0});
  const Vec3 axis = p.rotation().col(2);
  EXPECT_LT(axis.z(), 0.0);
  EXPECT_NEAR(std::asin(-axis.z()), 60.0 * kDegToRad, 1e-12);
  const EulerAngles back = attitude_from_camera_rotation(p.rotation());
  EXPECT_NEAR(back.pitch, 60.0 * kDegToRad, 1e-12);
  EXPECT_NEAR(back.yaw, 0.0, 1e-12);
}

TEST(CameraIntrinsics, Validation) {
  EXPECT_NO_THROW(test::standard_intrinsics().validate());
  EXPECT_THROW((Intrinsics{0, 1, 1, 1, 4, 4}.validate()), Error);
}

#include <gtest/gtest.h>

#include <numeric>

#include "test_support.hpp"

using namespace pilot;

namespace {

using Bundle4 = ReferenceBundle<kAppearanceChannels>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat46 = Eigen::Matrix<double, 4, 6>;

struct Fixture {
  Scene scene = test::standard_scene();
  Intrinsics k = test::standard_intrinsics();
  Pose gt = test::standard_pose();
  Bundle4 bundle = make_bundle(scene, gt, k, 500, 17);
  Pyramid query = query_render(scene, gt, k, Degradation{}, 0);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::vector<ResidualTerm<4>> random_terms(size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::vector<ResidualTerm<4>> terms(n);
  for (auto& t : terms) {
    t.r = Vec4::NullaryExpr([&] { return 0.5 * g(rng); });
    t.J = Mat46::NullaryExpr([&] { return 10.0 * g(rng); });
    t.w = w(rng);
  }
  return terms;
}

// Single-level LM from a yaw offset; true when it ends within 0.25 deg of the truth.
bool converges_at_level(const Fixture& f, int level, double yaw_offset_deg) {
  EulerAngles att = attitude_from_camera_rotation(f.gt.rotation());
  att.yaw += yaw_offset_deg * kDegToRad;
  Pose pose(camera_rotation_from_attitude(att), f.gt.translation());
  const auto q = query_level(f.query, f.k, level);
  const Vec3 o = pose.translation();
  const Pose to_local(Mat3::Identity(), -o), from_local(Mat3::Identity(), o);
  double lambda = 1e-3;
  for (int it = 0; it < 30; ++it) {
    const LinearSystem sys = evaluate_level(pose, f.bundle.anchors, q, level, 0.5, true, o);
    if (sys.count < 50) return false;
    const Pose cand = from_local * exp(lm_solve(sys, lambda)) * to_local * pose;
    const LinearSystem trial = evaluate_level(cand, f.bundle.anchors, q, level, 0.5, false);
    if (trial.count >= 50 && trial.cost < sys.cost) {
      pose = cand;
      lambda = std::max(1e-6, lambda * 0.5);
    } else {
      lambda = std::min(1e4, lambda * 10);
    }
  }
  return test::rotation_error_deg(pose, f.gt) < 0.25;
}

double basin_half_width(const Fixture& f, int level) {
  double width = 0.0;
  for (double d = 0.5; d <= 20.0; d += 0.5) {
    if (!converges_at_level(f, level, d) || !converges_at_level(f, level, -d)) break;
    width = d;
  }
  return width;
}

}  // namespace

// ---------------------------------------------------------------------------
// Hypothesis generation

TEST(JngoHypotheses, StandardBoxGivesOneHundredFortyFour) {
  SamplerConfig cfg;
  EXPECT_EQ(hypothesis_count(cfg), 144u);
  EXPECT_EQ(generate_hypotheses(test::standard_pose(), cfg).size(), 144u);
}

TEST(JngoHypotheses, GridCoversTheBoxSymmetrically) {
  SamplerConfig cfg;
  cfg.sigma_t = Mat3::Zero();
  const Pose c = test::standard_pose();
  const EulerAngles ca = attitude_from_camera_rotation(c.rotation());
  double min_y = 1e9, max_y = -1e9, min_p = 1e9, max_p = -1e9;
  for (const auto& h : generate_hypotheses(c, cfg)) {
    const EulerAngles a = attitude_from_camera_rotation(h.rotation());
    min_y = std::min(min_y, a.yaw - ca.yaw);
    max_y = std::max(max_y, a.yaw - ca.yaw);
    min_p = std::min(min_p, a.pitch - ca.pitch);
    max_p = std::max(max_p, a.pitch - ca.pitch);
    EXPECT_NEAR(a.roll, ca.roll, 1e-9);
    EXPECT_EQ(h.translation(), c.translation());
  }
  EXPECT_NEAR(min_y * kRadToDeg, -11.0, 1e-9);
  EXPECT_NEAR(max_y * kRadToDeg, 11.0, 1e-9);
  EXPECT_NEAR(min_p * kRadToDeg, -11.0, 1e-9);
  EXPECT_NEAR(max_p * kRadToDeg, 11.0, 1e-9);
}

TEST(JngoHypotheses, DegenerateBoxIsTheCenter) {
  SamplerConfig cfg;
  cfg.alpha_pitch = cfg.alpha_yaw = 0.0;
  cfg.sigma_t = Mat3::Zero();
  const Pose c = test::standard_pose();
  const auto h = generate_hypotheses(c, cfg);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].rotation(), c.rotation());
  EXPECT_EQ(h[0].translation(), c.translation());
}

TEST(JngoHypotheses, StepsThatDoNotTileThrow) {
  SamplerConfig cfg;
  cfg.yaw_step = 3.0 * kDegToRad;
  try {
    generate_hypotheses(Pose(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigMismatch);
  }
}

TEST(JngoHypotheses, TranslationOffsetCovariance) {
  SamplerConfig cfg;
  cfg.mode = SamplingMode::Isotropic;
  cfg.iso_half_width = 0.0;
  cfg.iso_count = 100000;
  cfg.rng_seed = 5;
  const Pose c = test::standard_pose();
  const auto hyps = generate_hypotheses(c, cfg);
  Mat3 cov = Mat3::Zero();
  Vec3 mean = Vec3::Zero();
  for (const auto& h : hyps) mean += h.translation() - c.translation();
  mean /= static_cast<double>(hyps.size());
  for (const auto& h : hyps) {
    const Vec3 d = h.translation() - c.translation() - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(hyps.size() - 1);
  EXPECT_LT((cov - Mat3::Identity()).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT(mean.norm(), 0.02);
}

TEST(JngoHypotheses, DeterministicForSeed) {
  SamplerConfig cfg;
  cfg.rng_seed = 9;
  const auto a = generate_hypotheses(test::standard_pose(), cfg);
  const auto b = generate_hypotheses(test::standard_pose(), cfg);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].translation(), b[i].translation());
}

// ---------------------------------------------------------------------------
// Residuals and Jacobians

TEST(JngoResidual, SelfAlignmentIsZero) {
  const auto& f = fixture();
  for (int level = 0; level < kNumLevels; ++level) {
    const auto q = query_level(f.query, f.k, level);
    int valid = 0;
    for (const auto& a : f.bundle.anchors) {
      const auto t = residual(a, f.gt, q, level);
      if (!t) continue;
      ++valid;
      ASSERT_LT(t->r.cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_GT(valid, 400);
  }
}

TEST(JngoResidual, JacobianMatchesFiniteDifferences) {
  JacobianCheckConfig cfg;
  cfg.triples = 150;
  cfg.rng_seed = 3;
  const auto rep = jacobian_check(cfg);
  EXPECT_GT(rep.checked, 300);
  EXPECT_EQ(rep.failures, 0) << "max relative error " << rep.max_relative_error;
}

TEST(JngoResidual, GaugeShiftDoesNotChangeTheStep) {
  const auto& f = fixture();
  const Pose start = exp(Twist(Vec3(1.0, -0.5, 0.3), Vec3(0.0, 0.0, 0.01))) * f.gt;
  const auto q = query_level(f.query, f.k, 1);
  const Vec3 o = start.translation();
  const LinearSystem world = evaluate_level(start, f.bundle.anchors, q, 1, 0.5, true);
  const LinearSystem local = evaluate_level(start, f.bundle.anchors, q, 1, 0.5, true, o);
  // Undamped Gauss-Newton steps agree once mapped back to the world frame.
  const Pose a = exp(lm_solve(world, 1e-12)) * start;
  const Pose b = Pose(Mat3::Identity(), o) * exp(lm_solve(local, 1e-12)) * Pose(Mat3::Identity(), -o) * start;
  EXPECT_LT(test::translation_error(a, b), 1e-5);
  EXPECT_LT(test::rotation_error_deg(a, b), 1e-6);
}

TEST(JngoResidual, BehindCameraIsInvalid) {
  const auto& f = fixture();
  const Pose flipped = f.gt * Pose(Eigen::AngleAxisd(kPi, Vec3::UnitX()).toRotationMatrix(), Vec3::Zero());
  const auto q = query_level(f.query, f.k, 2);
  for (const auto& a : f.bundle.anchors) EXPECT_FALSE(residual(a, flipped, q, 2).has_value());
}

TEST(JngoResidual, WeightIsProductOfQueryAndReferenceWeights) {
  const auto& f = fixture();
  Pyramid q = f.query;
  for (auto& w : q.uncertainty[2].data()) w = 0.5;
  const auto ql = query_level(q, f.k, 2);
  Bundle4 b = f.bundle;
  for (auto& a : b.anchors) a.ref_weight[2] = 0.8;
  const auto t = residual(b.anchors[0], f.gt, ql, 2);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(t->w, 0.4);
}

// ---------------------------------------------------------------------------
// Accumulation and solve

TEST(JngoAccumulate, EmptyAndQuadraticRegime) {
  const std::vector<ResidualTerm<4>> none;
  const LinearSystem e = accumulate_system<4>(none, 0.5);
  EXPECT_EQ(e.H, Mat6::Zero());
  EXPECT_EQ(e.g, Vec6::Zero());
  ResidualTerm<4> t = random_terms(1, 1)[0];
  t.w = 1.0;
  t.r = Vec4(0.1, -0.1, 0.05, 0.0);
  const std::vector<ResidualTerm<4>> one{t};
  const LinearSystem s = accumulate_system<4>(one, 0.5);
  EXPECT_LT((s.H - t.J.transpose() * t.J).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s.g - t.J.transpose() * t.r).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(JngoAccumulate, HuberDownweightsLargeResiduals) {
  ResidualTerm<4> t = random_terms(1, 2)[0];
  t.w = 1.0;
  t.r = Vec4(2.0, 0.0, 0.0, 0.0);  // weighted norm 2 > delta 0.5
  const std::vector<ResidualTerm<4>> one{t};
  const LinearSystem s = accumulate_system<4>(one, 0.5);
  EXPECT_LT((s.H - 0.25 * t.J.transpose() * t.J).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(s.cost, 2.0 * 0.5 * 2.0 - 0.25, 1e-12);
}

TEST(JngoAccumulate, ParallelChunksMatchSequential) {
  const auto terms = random_terms(500, 3);
  const LinearSystem seq = accumulate_system<4>(terms, 0.5, 1, 1);
  const LinearSystem par = accumulate_system<4>(terms, 0.5, 8, 4);
  EXPECT_LT((seq.H - par.H).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((seq.g - par.g).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(seq.cost, par.cost, 1e-9);
  EXPECT_EQ(seq.count, par.count);
}

TEST(JngoAccumulate, OrderIndependent) {
  auto terms = random_terms(500, 4);
  const LinearSystem a = accumulate_system<4>(terms, 0.5);
  std::mt19937_64 rng(5);
  std::shuffle(terms.begin(), terms.end(), rng);
  const LinearSystem b = accumulate_system<4>(terms, 0.5);
  EXPECT_LT((a.H - b.H).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((a.g - b.g).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(JngoSolve, IdentitySystem) {
  LinearSystem s;
  s.H = Mat6::Identity();
  s.g = Vec6::Unit(0);
  const Vec6 dx = lm_solve(s, 1e-12).vector();
  EXPECT_LT((dx + Vec6::Unit(0)).norm(), 1e-9);
}

TEST(JngoSolve, DampingShrinksTheStep) {
  const auto terms = random_terms(50, 6);
  const LinearSystem s = accumulate_system<4>(terms, 0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda = 1e-6; lambda < 1e9; lambda *= 10) {
    const double n = lm_solve(s, lambda).vector().norm();
    EXPECT_LE(n, prev);
    prev = n;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(JngoSolve, NormalEquationsResidual) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Mat6 a = Mat6::NullaryExpr([&] { return g(rng); });
    LinearSystem s;
    s.H = a * a.transpose() + 0.1 * Mat6::Identity();
    s.g = Vec6::NullaryExpr([&] { return g(rng); });
    const double lambda = 0.01;
    const Vec6 dx = lm_solve(s, lambda).vector();
    EXPECT_LT(((s.H + lambda * Mat6::Identity()) * dx + s.g).norm(), 1e-10);
  }
}

TEST(JngoSolve, SingularSystemThrows) {
  LinearSystem s;
  s.H = -Mat6::Identity();
  try {
    lm_solve(s, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SolveFailed);
  }
  EXPECT_THROW(lm_solve(LinearSystem{}, 0.0), Error);
}

// ---------------------------------------------------------------------------
// Refinement

TEST(JngoRefine, GroundTruthIsAFixedPoint) {
  const auto& f = fixture();
  const Hypothesis h = refine(f.gt, f.bundle, f.query, RefineSchedule{});
  EXPECT_FALSE(h.flagged);
  EXPECT_LT(test::translation_error(h.pose, f.gt), 1e-6);
  EXPECT_LT(test::rotation_error_deg(h.pose, f.gt) * kDegToRad, 1e-6);
  EXPECT_LT(h.photometric_cost_fine, 1e-18);
}

TEST(JngoRefine, ConvergesFromHalfMetreHalfDegree) {
  const auto& f = fixture();
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    const Vec3 dt = 0.5 * test::random_unit(rng);
    const Vec3 dr = 0.5 * kDegToRad * test::random_unit(rng);
    const Pose start = Pose(so3_exp(dr) * f.gt.rotation(), f.gt.translation() + dt);
    const Hypothesis h = refine(start, f.bundle, f.query, RefineSchedule{});
    EXPECT_LT(test::translation_error(h.pose, f.gt), 0.02);
    EXPECT_LT(test::rotation_error_deg(h.pose, f.gt), 0.02);
  }
}

TEST(JngoRefine, CostNonIncreasingWithinEachLevel) {
  const auto& f = fixture();
  std::mt19937_64 rng(9);
  for (int i = 0; i < 5; ++i) {
    const Pose start = exp(Twist(Vec3(2.0 * test::random_unit(rng)), Vec3(0.02 * test::random_unit(rng)))) * f.gt;
    std::vector<RefineTraceEntry> trace;
    RefineSchedule sched;
    sched.iterations_per_level = {6, 6, 6};
    refine(start, f.bundle, f.query, sched, &trace);
    ASSERT_GE(trace.size(), 3u);
    for (size_t j = 1; j < trace.size(); ++j)
      if (trace[j].level == trace[j - 1].level) EXPECT_LE(trace[j].cost, trace[j - 1].cost);
  }
}

TEST(JngoRefine, HypothesisOffTheMapIsFlagged) {
  const auto& f = fixture();
  // Looking at the sky: no anchor projects in front of the camera.
  const Pose sky = camera_pose(f.gt.translation(), EulerAngles{0.0, -80.0 * kDegToRad, 0.0});
  const Hypothesis h = refine(sky, f.bundle, f.query, RefineSchedule{});
  EXPECT_TRUE(h.flagged);
  EXPECT_TRUE(std::isinf(h.photometric_cost_fine));
}

TEST(JngoRefine, FineBasinNarrowerThanCoarse) {
  const auto& f = fixture();
  const double coarse = basin_half_width(f, 0);
  const double fine = basin_half_width(f, 2);
  RecordProperty("fine_deg", std::to_string(fine));
  RecordProperty("coarse_deg", std::to_string(coarse));
  EXPECT_LT(fine, coarse) << "fine " << fine << " deg, coarse " << coarse << " deg";
}

// ---------------------------------------------------------------------------
// Selection

namespace {

std::vector<Hypothesis> hyps_with_costs(const std::vector<double>& costs, const std::vector<Pose>& poses) {
  std::vector<Hypothesis> h(costs.size());
  for (size_t i = 0; i < costs.size(); ++i) {
    h[i].pose = poses[i];
    h[i].photometric_cost_fine = costs[i];
  }
  return h;
}

}  // namespace

TEST(JngoSelect, ZeroLambdaIsPhotometricArgmin) {
  std::mt19937_64 rng(10);
  std::vector<Pose> poses;
  for (int i = 0; i < 5; ++i) poses.push_back(test::random_pose(rng, 0.5));
  auto h = hyps_with_costs({3, 1, 2, 1, 5}, poses);
  EXPECT_EQ(select(h, Pose(), 0.0).index, 1u);  // lowest index wins the tie
}

TEST(JngoSelect, PredictionBreaksPhotometricTie) {
  const Pose predicted = test::standard_pose();
  const Pose other = exp(Twist(Vec3(1, 0, 0), Vec3::Zero())) * predicted;
  auto h = hyps_with_costs({1.0, 1.0}, {other, predicted});
  EXPECT_EQ(select(h, predicted, 0.1).index, 1u);
}

TEST(JngoSelect, ArgminInvariantAndAttained) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Pose> poses;
    std::vector<double> costs;
    for (int i = 0; i < 20; ++i) {
      poses.push_back(test::random_pose(rng, 0.3, 3.0));
      costs.push_back(u(rng));
    }
    auto h = hyps_with_costs(costs, poses);
    const size_t idx = select(h, Pose(), 0.05).index;
    double min_total = std::numeric_limits<double>::infinity();
    for (const auto& x : h) min_total = std::min(min_total, x.total_cost);
    EXPECT_EQ(h[idx].total_cost, min_total);
    for (auto& c : costs) c *= 7.5;
    auto scaled = hyps_with_costs(costs, poses);
    EXPECT_EQ(select(scaled, Pose(), 0.05 * 7.5).index, idx);
  }
}

TEST(JngoSelect, AllFlaggedThrows) {
  auto h = hyps_with_costs({1.0, 2.0}, {Pose(), Pose()});
  for (auto& x : h) x.flagged = true;
  try {
    select(h, Pose(), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllHypothesesInvalid);
  }
}

// ---------------------------------------------------------------------------
// Full optimizer

TEST(JngoRun, SingleHypothesisEqualsRefine) {
  const auto& f = fixture();
  const Pose start = exp(Twist(Vec3(1.5, -1.0, 0.2), Vec3(0, 0, 0.02))) * f.gt;
  SamplerConfig sc;
  sc.alpha_pitch = sc.alpha_yaw = 0.0;
  sc.sigma_t = Mat3::Zero();
  const JngoResult r = run(start, f.bundle, f.query, sc, RefineSchedule{}, start, 0.0, 1);
  const Hypothesis h = refine(start, f.bundle, f.query, RefineSchedule{});
  ASSERT_EQ(r.hypotheses.size(), 1u);
  EXPECT_EQ(r.pose.rotation(), h.pose.rotation());
  EXPECT_EQ(r.pose.translation(), h.pose.translation());
}

TEST(JngoRun, RecoversTenMetresTenDegrees) {
  const auto& f = fixture();
  EulerAngles att = attitude_from_camera_rotation(f.gt.rotation());
  att.yaw += 10.0 * kDegToRad;
  const Pose start(camera_rotation_from_attitude(att), f.gt.translation() + Vec3(6.0, -8.0, 0.0));
  JngoConfig cfg;
  cfg.sampler.rng_seed = 1;
  const JngoResult r = run(start, make_bundle(f.scene, start, f.k, 500, 2), f.query, cfg, start);
  EXPECT_LT(test::translation_error(r.pose, f.gt), 0.5);
  EXPECT_LT(test::rotation_error_deg(r.pose, f.gt), 0.1);
}

TEST(JngoRun, BitwiseDeterministic) {
  const auto& f = fixture();
  const Pose start = exp(Twist(Vec3(3, 2, 0), Vec3(0, 0, 0.05))) * f.gt;
  JngoConfig cfg;
  cfg.sampler.rng_seed = 4;
  cfg.lambda_motion = 0.01;
  cfg.workers = 3;
  const JngoResult a = run(start, f.bundle, f.query, cfg, start);
  cfg.workers = 1;
  const JngoResult b = run(start, f.bundle, f.query, cfg, start);
  EXPECT_EQ(a.index, b.index);
  EXPECT_EQ(a.pose.translation(), b.pose.translation());
  EXPECT_EQ(a.pose.rotation(), b.pose.rotation());
}

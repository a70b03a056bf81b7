#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "pilot/bundle.hpp"
#include "pilot/camera.hpp"
#include "pilot/error.hpp"
#include "pilot/feature_pyramid.hpp"
#include "pilot/parallel.hpp"
#include "pilot/se3.hpp"

namespace pilot {

using Mat6 = Eigen::Matrix<double, 6, 6>;

enum class SamplingMode {
  RotationAware,  // pitch/yaw grid over the anisotropic box
  Isotropic,      // uniform draws from a small cube over yaw, pitch and roll
};

struct SamplerConfig {
  double alpha_pitch = 11.0 * kDegToRad;
  double alpha_yaw = 11.0 * kDegToRad;
  double pitch_step = 2.0 * kDegToRad;
  double yaw_step = 2.0 * kDegToRad;
  Mat3 sigma_t = Mat3::Identity();
  std::uint64_t rng_seed = 0;
  SamplingMode mode = SamplingMode::RotationAware;
  double iso_half_width = 2.0 * kDegToRad;
  int iso_count = 144;
};

struct RefineSchedule {
  std::array<int, kNumLevels> iterations_per_level = {2, 3, 4};
  double lm_lambda_init = 1e-3;
  double lm_lambda_up = 10.0;
  double lm_lambda_down = 0.5;
  double lm_lambda_min = 1e-6;
  double lm_lambda_max = 1e4;
  double huber_delta = 0.5;
  int min_anchors = 50;

  void validate() const {
    for (int n : iterations_per_level)
      if (n <= 0) throw Error(ErrorCode::ConfigMismatch, "iterations per level must be positive");
    if (!(lm_lambda_up > 1.0) || !(lm_lambda_down < 1.0) || !(lm_lambda_down > 0.0))
      throw Error(ErrorCode::ConfigMismatch, "lambda multipliers must satisfy up > 1 > down > 0");
    if (!(huber_delta > 0.0)) throw Error(ErrorCode::ConfigMismatch, "huber_delta must be positive");
  }
};

/// Damped normal equations H dxi = -g plus the robust cost they were built from.
struct LinearSystem {
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  double cost = 0.0;
  int count = 0;
};

template <int C>
struct ResidualTerm {
  Eigen::Matrix<double, C, 1> r;
  Eigen::Matrix<double, C, 6> J;
  double w = 1.0;
};

struct Hypothesis {
  Pose pose;
  double photometric_cost_fine = std::numeric_limits<double>::infinity();
  double total_cost = std::numeric_limits<double>::infinity();
  int valid_anchor_count = 0;
  bool flagged = false;
  int iterations = 0;
  int accepted_steps = 0;
};

// ---------------------------------------------------------------------------
// Robust loss. rho acts on the squared weighted norm s = w |r|^2:
//   rho(s) = s                     for s <= delta^2
//          = 2 delta sqrt(s) - delta^2 otherwise
// and the IRLS weight is drho/ds = min(1, delta / sqrt(s)).

inline double huber_cost(double weighted_norm, double delta) {
  return weighted_norm <= delta ? weighted_norm * weighted_norm : 2.0 * delta * weighted_norm - delta * delta;
}

inline double huber_weight(double weighted_norm, double delta) {
  return weighted_norm <= delta ? 1.0 : delta / weighted_norm;
}

/// Compensated accumulator for H, g and the robust cost.
class SystemAccumulator {
 public:
  explicit SystemAccumulator(double huber_delta) : delta_(huber_delta) {}

  template <int C>
  void add(const Eigen::Matrix<double, C, 1>& r, const Eigen::Matrix<double, C, 6>& j, double w) {
    const double e = std::sqrt(w) * r.norm();
    cost_.add(huber_cost(e, delta_));
    const double weight = w * huber_weight(e, delta_);
    const Eigen::Matrix<double, 6, C> jtw = j.transpose() * weight;
    const Mat6 h = jtw * j;
    const Vec6 g = jtw * r;
    int k = 0;
    for (int row = 0; row < 6; ++row) {
      for (int col = row; col < 6; ++col) h_[k++].add(h(row, col));
      g_[row].add(g(row));
    }
    ++count_;
  }

  template <int C>
  void add_cost_only(const Eigen::Matrix<double, C, 1>& r, double w) {
    cost_.add(huber_cost(std::sqrt(w) * r.norm(), delta_));
    ++count_;
  }

  void merge(const SystemAccumulator& o) {
    for (size_t k = 0; k < h_.size(); ++k) h_[k].merge(o.h_[k]);
    for (size_t k = 0; k < g_.size(); ++k) g_[k].merge(o.g_[k]);
    cost_.merge(o.cost_);
    count_ += o.count_;
  }

  LinearSystem system() const {
    LinearSystem s;
    int k = 0;
    for (int row = 0; row < 6; ++row) {
      for (int col = row; col < 6; ++col) {
        s.H(row, col) = s.H(col, row) = h_[k++].value();
      }
      s.g(row) = g_[row].value();
    }
    s.cost = cost_.value();
    s.count = count_;
    return s;
  }

  double cost() const { return cost_.value(); }
  int count() const { return count_; }

 private:
  double delta_;
  std::array<CompensatedSum, 21> h_{};
  std::array<CompensatedSum, 6> g_{};
  CompensatedSum cost_;
  int count_ = 0;
};

/**
 * Reduces weighted residual terms into H = sum J^T w rho' J and
 * g = sum J^T w rho' r. Terms are split into `chunks` contiguous blocks that
 * may be reduced concurrently and are merged in block order.
 */
template <int C>
LinearSystem accumulate_system(std::span<const ResidualTerm<C>> terms, double huber_delta, size_t chunks = 1,
                               unsigned workers = 1) {
  chunks = std::max<size_t>(1, std::min(chunks, std::max<size_t>(1, terms.size())));
  std::vector<SystemAccumulator> partial(chunks, SystemAccumulator(huber_delta));
  const size_t per_chunk = (terms.size() + chunks - 1) / chunks;
  parallel_for(
      chunks,
      [&](size_t c) {
        const size_t begin = c * per_chunk;
        const size_t end = std::min(terms.size(), begin + per_chunk);
        for (size_t i = begin; i < end; ++i) partial[c].add<C>(terms[i].r, terms[i].J, terms[i].w);
      },
      workers);
  SystemAccumulator total(huber_delta);
  for (const auto& p : partial) total.merge(p);
  return total.system();
}

/// Solves (H + lambda I) dxi = -g by Cholesky.
inline Twist lm_solve(const LinearSystem& sys, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::SolveFailed, "lambda must be positive");
  const Mat6 a = sys.H + lambda * Mat6::Identity();
  const Eigen::LLT<Mat6> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-15)) {
    throw Error(ErrorCode::SolveFailed, "damped system is numerically singular");
  }
  const Vec6 dx = llt.solve(-sys.g);
  if (!dx.allFinite()) throw Error(ErrorCode::SolveFailed, "non-finite increment");
  return Twist(dx);
}

// ---------------------------------------------------------------------------
// Residuals

/// Query-side view of one pyramid level with cached intrinsics.
template <int C>
struct QueryLevel {
  const FeatureMap<C>* features;
  const UncertaintyMap* uncertainty;
  Intrinsics intrinsics;
};

template <int C>
QueryLevel<C> query_level(const FeaturePyramid<C>& query, const Intrinsics& k, int level) {
  return {&query.features[level], &query.uncertainty[level], level_intrinsics(k, level)};
}

/// Projected anchors must keep this many pixels from the border.
inline constexpr double kProjectionMargin = 1.0;

/**
 * Feature residual of one anchor against one hypothesis at one level:
 *   r = f_q(pi(K_l, T^-1 P_w)) - f_r(p_ref)
 *   J = dF/dp * dpi/dP_c * dP_c/dxi
 * Returns nullopt when the anchor falls behind the camera or outside the image.
 */
template <int C>
std::optional<ResidualTerm<C>> residual(const Anchor<C>& anchor, const Pose& hyp_pose, const QueryLevel<C>& q,
                                        int level, bool with_jacobian = true, const Vec3& origin = Vec3::Zero()) {
  const Mat3& r = hyp_pose.rotation();
  const Vec3 pc = r.transpose() * (anchor.world_point - hyp_pose.translation());
  if (!(pc.z() > kMinDepth)) return std::nullopt;
  const PixelPoint p = project(q.intrinsics, pc);
  if (!in_bounds(*q.features, p, kProjectionMargin)) return std::nullopt;
  ResidualTerm<C> term;
  term.w = joint_weight(sample_scalar(*q.uncertainty, p), anchor.ref_weight[level]);
  if (with_jacobian) {
    const FeatureSample<C> s = sample_unchecked(*q.features, p);
    term.r = s.value - anchor.ref_feature[level];
    term.J = s.gradient * projection_jacobian(q.intrinsics, pc) *
             pose_point_jacobian(Pose(hyp_pose.rotation(), hyp_pose.translation() - origin), anchor.world_point - origin);
  } else {
    term.r = sample_unchecked(*q.features, p).value - anchor.ref_feature[level];
    term.J.setZero();
  }
  return term;
}

/// Robust cost (and optionally the normal equations) of a pose at one level.
template <int C>
LinearSystem evaluate_level(const Pose& pose, const std::vector<Anchor<C>>& anchors, const QueryLevel<C>& q,
                            int level, double huber_delta, bool with_system, const Vec3& origin = Vec3::Zero()) {
  SystemAccumulator acc(huber_delta);
  for (const auto& a : anchors) {
    const auto term = residual(a, pose, q, level, with_system, origin);
    if (!term) continue;
    if (with_system) {
      acc.add<C>(term->r, term->J, term->w);
    } else {
      acc.add_cost_only<C>(term->r, term->w);
    }
  }
  return acc.system();
}

// ---------------------------------------------------------------------------
// Hypothesis generation

namespace detail {

inline int grid_nodes(double alpha, double step, const char* axis) {
  if (!(step > 0.0) || !(alpha >= 0.0)) {
    throw Error(ErrorCode::ConfigMismatch, std::string(axis) + ": need step > 0 and alpha >= 0");
  }
  const double intervals = 2.0 * alpha / step;
  const double rounded = std::round(intervals);
  if (std::abs(intervals - rounded) > 1e-9) {
    throw Error(ErrorCode::ConfigMismatch, std::string(axis) + ": step does not tile [-alpha, alpha]");
  }
  return static_cast<int>(rounded) + 1;
}

inline Mat3 sqrt_psd(const Mat3& sigma) {
  const Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (sigma + sigma.transpose()));
  const Vec3 root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

inline Pose perturb_attitude(const Pose& center, double d_yaw, double d_pitch, double d_roll) {
  if (d_yaw == 0.0 && d_pitch == 0.0 && d_roll == 0.0) return center;
  EulerAngles att = attitude_from_camera_rotation(center.rotation());
  att.yaw += d_yaw;
  att.pitch += d_pitch;
  att.roll += d_roll;
  return {camera_rotation_from_attitude(att), center.translation()};
}

}  // namespace detail

/// Number of hypotheses a sampler configuration produces.
inline size_t hypothesis_count(const SamplerConfig& cfg) {
  if (cfg.mode == SamplingMode::Isotropic) return static_cast<size_t>(std::max(0, cfg.iso_count));
  return static_cast<size_t>(detail::grid_nodes(cfg.alpha_pitch, cfg.pitch_step, "pitch")) *
         detail::grid_nodes(cfg.alpha_yaw, cfg.yaw_step, "yaw");
}

/**
 * Candidate poses around `center`. In rotation-aware mode every node of the
 * pitch/yaw grid -alpha, -alpha + step, ..., +alpha becomes one hypothesis
 * (pitch-major order); each also gets a translation offset drawn from
 * N(0, sigma_t). Pitch and yaw are the vehicle attitude angles.
 */
inline std::vector<Pose> generate_hypotheses(const Pose& center, const SamplerConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.rng_seed, 0x4e0));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat3 l = detail::sqrt_psd(cfg.sigma_t);
  auto offset = [&]() {
    const Vec3 z(normal(rng), normal(rng), normal(rng));
    return Vec3(l * z);
  };

  std::vector<Pose> out;
  if (cfg.mode == SamplingMode::Isotropic) {
    std::uniform_real_distribution<double> box(-cfg.iso_half_width, cfg.iso_half_width);
    out.reserve(hypothesis_count(cfg));
    for (int m = 0; m < cfg.iso_count; ++m) {
      const double dy = box(rng), dp = box(rng), dr = box(rng);
      const Pose rotated = detail::perturb_attitude(center, dy, dp, dr);
      out.emplace_back(rotated.rotation(), rotated.translation() + offset());
    }
    return out;
  }

  const int np = detail::grid_nodes(cfg.alpha_pitch, cfg.pitch_step, "pitch");
  const int ny = detail::grid_nodes(cfg.alpha_yaw, cfg.yaw_step, "yaw");
  out.reserve(static_cast<size_t>(np) * ny);
  for (int i = 0; i < np; ++i) {
    const double dp = -cfg.alpha_pitch + i * cfg.pitch_step;
    for (int j = 0; j < ny; ++j) {
      const double dy = -cfg.alpha_yaw + j * cfg.yaw_step;
      const Pose rotated = detail::perturb_attitude(center, dy, dp, 0.0);
      out.emplace_back(rotated.rotation(), rotated.translation() + offset());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refinement

/**
 * Coarse-to-fine Levenberg-Marquardt on one hypothesis. Each step
 * linearizes at the current pose, solves the damped system, applies the left
 * update T <- exp(dxi) T, and keeps the step only if the level cost drops.
 */
/// Level cost at the start of each level and after every accepted step.
struct RefineTraceEntry {
  int level = 0;
  double cost = 0.0;
};

template <int C>
Hypothesis refine(const Pose& initial, const ReferenceBundle<C>& bundle, const FeaturePyramid<C>& query,
                  const RefineSchedule& sched, std::vector<RefineTraceEntry>* trace = nullptr) {
  Hypothesis hyp;
  hyp.pose = initial;
  // Increments are expressed in a world frame shifted to the starting camera
  // center, which keeps the damping from coupling rotation to |t|.
  const Vec3 origin = initial.translation();
  const Pose to_local(Mat3::Identity(), -origin);
  const Pose from_local(Mat3::Identity(), origin);
  auto flag = [&](int count) {
    hyp.flagged = true;
    hyp.valid_anchor_count = count;
    hyp.photometric_cost_fine = std::numeric_limits<double>::infinity();
    return hyp;
  };

  LinearSystem current;
  for (int level = 0; level < kNumLevels; ++level) {
    const QueryLevel<C> q = query_level(query, bundle.intrinsics, level);
    double lambda = sched.lm_lambda_init;
    current = evaluate_level(hyp.pose, bundle.anchors, q, level, sched.huber_delta, true, origin);
    if (current.count < sched.min_anchors) return flag(current.count);
    if (trace) trace->push_back({level, current.cost});

    for (int it = 0; it < sched.iterations_per_level[level]; ++it) {
      ++hyp.iterations;
      Twist step;
      try {
        step = lm_solve(current, lambda);
      } catch (const Error&) {
        return flag(current.count);
      }
      const Pose candidate = from_local * exp(step) * to_local * hyp.pose;
      const LinearSystem trial = evaluate_level(candidate, bundle.anchors, q, level, sched.huber_delta, false);
      if (trial.count >= sched.min_anchors && trial.cost < current.cost) {
        hyp.pose = candidate;
        ++hyp.accepted_steps;
        if (trace) trace->push_back({level, trial.cost});
        lambda = std::max(sched.lm_lambda_min, lambda * sched.lm_lambda_down);
        const bool last = it + 1 == sched.iterations_per_level[level];
        current = last ? trial : evaluate_level(hyp.pose, bundle.anchors, q, level, sched.huber_delta, true, origin);
      } else {
        lambda = std::min(sched.lm_lambda_max, lambda * sched.lm_lambda_up);
      }
    }
  }
  // `current` holds the fine-level cost of the final pose.
  hyp.photometric_cost_fine = current.cost;
  hyp.valid_anchor_count = current.count;
  if (current.count < sched.min_anchors) return flag(current.count);
  return hyp;
}

// ---------------------------------------------------------------------------
// Selection

struct Selection {
  Pose pose;
  size_t index = 0;
};

/// C_total = C_photo + lambda * ||log(T_pred^-1 T)||^2; returns the argmin, lowest index on ties.
inline Selection select(std::span<Hypothesis> hyps, const Pose& predicted, double lambda_motion) {
  std::optional<size_t> best;
  for (size_t m = 0; m < hyps.size(); ++m) {
    auto& h = hyps[m];
    h.total_cost = std::numeric_limits<double>::infinity();
    if (h.flagged || !std::isfinite(h.photometric_cost_fine)) continue;
    double motion = 0.0;
    if (lambda_motion != 0.0) {
      try {
        motion = lambda_motion * geodesic_distance_sq(predicted, h.pose);
      } catch (const Error&) {
        continue;
      }
    }
    h.total_cost = h.photometric_cost_fine + motion;
    if (!best || h.total_cost < hyps[*best].total_cost) best = m;
  }
  if (!best) throw Error(ErrorCode::AllHypothesesInvalid, "no hypothesis survived refinement");
  return {hyps[*best].pose, *best};
}

// ---------------------------------------------------------------------------
// Full optimizer

struct JngoConfig {
  SamplerConfig sampler;
  RefineSchedule schedule;
  double lambda_motion = 0.0;
  unsigned workers = 0;  // 0 = hardware concurrency
};

struct JngoResult {
  Pose pose;
  size_t index = 0;
  std::vector<Hypothesis> hypotheses;
  double wall_ms = 0.0;
};

/// Generate -> refine every hypothesis in parallel -> motion-constrained selection.
template <int C>
JngoResult run(const Pose& center, const ReferenceBundle<C>& bundle, const FeaturePyramid<C>& query,
               const SamplerConfig& sampler, const RefineSchedule& sched, const Pose& predicted,
               double lambda_motion, unsigned workers = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  sched.validate();
  const std::vector<Pose> initial = generate_hypotheses(center, sampler);
  JngoResult result;
  result.hypotheses.resize(initial.size());
  parallel_for(
      initial.size(), [&](size_t m) { result.hypotheses[m] = refine(initial[m], bundle, query, sched); }, workers);
  const Selection s = select(result.hypotheses, predicted, lambda_motion);
  result.pose = s.pose;
  result.index = s.index;
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

template <int C>
JngoResult run(const Pose& center, const ReferenceBundle<C>& bundle, const FeaturePyramid<C>& query,
               const JngoConfig& cfg, const Pose& predicted) {
  return run(center, bundle, query, cfg.sampler, cfg.schedule, predicted, cfg.lambda_motion, cfg.workers);
}

}  // namespace pilot

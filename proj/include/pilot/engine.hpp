#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "pilot/bundle.hpp"
#include "pilot/camera.hpp"
#include "pilot/error.hpp"
#include "pilot/feature_pyramid.hpp"
#include "pilot/jngo.hpp"
#include "pilot/motion_prior.hpp"
#include "pilot/parallel.hpp"
#include "pilot/se3.hpp"
#include "pilot/synthetic_world.hpp"

namespace pilot {

using Bundle = ReferenceBundle<kAppearanceChannels>;
using Pyramid = FeaturePyramid<kAppearanceChannels>;

/// Frames of lag between the newest estimate and the bundle it feeds.
inline constexpr int kBundleLag = 2;

/// Sub-stream tags for derive_seed(seed, frame, purpose).
enum class SeedPurpose : std::uint64_t { Prior = 1, Query = 2, Bundle = 3, Sampler = 4 };

inline std::uint64_t frame_seed(std::uint64_t seed, int frame, SeedPurpose purpose) {
  return derive_seed(seed, static_cast<std::uint64_t>(frame), static_cast<std::uint64_t>(purpose));
}

/**
 * Per-frame photometric degradation of the query stream. Each frame draws
 * its channel gains from 1 + U(-gain_jitter, gain_jitter) and biases from
 * U(-bias_jitter, bias_jitter), then adds Gaussian pixel noise.
 */
struct QueryDegradation {
  bool enabled = false;
  double gain_jitter = 0.01;
  double bias_jitter = 0.002;
  double noise_sigma = 0.001;
};

inline Degradation draw_degradation(const QueryDegradation& m, std::uint64_t seed) {
  Degradation d;
  d.enabled = m.enabled;
  if (!m.enabled) return d;
  std::mt19937_64 rng(derive_seed(seed, 0x9a1));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int c = 0; c < kAppearanceChannels; ++c) {
    d.gain[c] = 1.0 + m.gain_jitter * unit(rng);
    d.bias[c] = m.bias_jitter * unit(rng);
  }
  d.noise_sigma = m.noise_sigma;
  return d;
}

/// Simulated camera frame: render at the true pose, degrade, build the pyramid.
inline Pyramid query_render(const Scene& scene, const Pose& gt_pose, const Intrinsics& k, const Degradation& d,
                            std::uint64_t rng_seed, unsigned workers = 1) {
  RenderedView view = render(scene, gt_pose, k, workers);
  apply_degradation(view, d, rng_seed);
  return build_pyramid(view);
}

/**
 * Error of the first-frame pose prior. Angles in radians. In uniform mode the
 * translation offset is a random horizontal direction with length
 * U(0, translation) and each angle is U(-a, a); in exact mode the length is
 * exactly `translation` and each angle is +-a with a random sign.
 */
struct PriorNoise {
  double translation = 10.0;
  double yaw = 10.0 * kDegToRad;
  double pitch = 0.0;
  double roll = 0.0;
  bool exact = false;
};

inline Pose perturb_prior(const Pose& gt, const PriorNoise& n, std::uint64_t seed) {
  if (n.translation < 0.0 || n.yaw < 0.0 || n.pitch < 0.0 || n.roll < 0.0) {
    throw Error(ErrorCode::ConfigMismatch, "prior noise bounds must be non-negative");
  }
  std::mt19937_64 rng(derive_seed(seed, 0x9f1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double heading = 2.0 * kPi * unit(rng);
  const double length = n.exact ? n.translation : n.translation * unit(rng);
  auto angle = [&](double a) {
    const double u = unit(rng);
    return n.exact ? (u < 0.5 ? -a : a) : a * (2.0 * u - 1.0);
  };
  EulerAngles att = attitude_from_camera_rotation(gt.rotation());
  att.yaw += angle(n.yaw);
  att.pitch += angle(n.pitch);
  att.roll += angle(n.roll);
  const Vec3 offset = length * Vec3(std::cos(heading), std::sin(heading), 0.0);
  return {camera_rotation_from_attitude(att), gt.translation() + offset};
}

enum class FrameStatus { Localized, Failed };

inline const char* to_string(FrameStatus s) { return s == FrameStatus::Localized ? "localized" : "failed"; }

/**
 * Outcome of one query frame. `estimated_pose` is empty on failure;
 * `reported_pose` is then the coasted motion prediction. The bundle fields
 * record which bundle was used and the newest estimate that shaped it.
 */
struct FrameResult {
  int frame_index = 0;
  FrameStatus status = FrameStatus::Failed;
  std::optional<Pose> estimated_pose;
  Pose reported_pose;
  double photometric_cost = std::numeric_limits<double>::infinity();
  int hypothesis_index = -1;
  double latency_ms = 0.0;
  int bundle_frame = -1;
  int bundle_source_frame = -1;
  bool bundle_fallback = false;

  bool localized() const { return status == FrameStatus::Localized; }

  /// Bitwise equality of everything except wall-clock latency.
  bool same_outcome(const FrameResult& o) const {
    auto pose_eq = [](const Pose& a, const Pose& b) {
      return a.rotation() == b.rotation() && a.translation() == b.translation();
    };
    if (estimated_pose.has_value() != o.estimated_pose.has_value()) return false;
    if (estimated_pose && !pose_eq(*estimated_pose, *o.estimated_pose)) return false;
    const bool cost_eq = photometric_cost == o.photometric_cost ||
                         (std::isinf(photometric_cost) && std::isinf(o.photometric_cost));
    return frame_index == o.frame_index && status == o.status && pose_eq(reported_pose, o.reported_pose) &&
           cost_eq && hypothesis_index == o.hypothesis_index && bundle_frame == o.bundle_frame &&
           bundle_source_frame == o.bundle_source_frame && bundle_fallback == o.bundle_fallback;
  }
};

enum class ExecutionMode { Sequential, DualThread };

struct SequenceConfig {
  SceneSpec scene;
  Intrinsics intrinsics{89.6, 89.6, 63.5, 63.5, 128, 128};
  std::vector<Pose> trajectory;
  PriorNoise prior;
  QueryDegradation degradation;
  JngoConfig jngo;
  MotionNoise motion;
  size_t n_anchors = 500;
  std::uint64_t rng_seed = 0;
  unsigned render_workers = 1;
  // Centre hypotheses with the filter's translation covariance once it has a measurement.
  bool motion_sigma_t = true;

  void validate() const {
    if (trajectory.empty()) throw Error(ErrorCode::ConfigMismatch, "trajectory is empty");
    if (n_anchors == 0) throw Error(ErrorCode::ConfigMismatch, "n_anchors must be positive");
    if (static_cast<int>(n_anchors) < jngo.schedule.min_anchors) {
      throw Error(ErrorCode::ConfigMismatch, "n_anchors is below min_anchors");
    }
    intrinsics.validate();
    jngo.schedule.validate();
  }
};

/// Pre-rendered query pyramids indexed by frame; empty entries mark frames that could not be rendered.
using QueryCache = std::vector<std::optional<Pyramid>>;

namespace detail {

/// Blocking FIFO with a fixed number of slots.
template <typename T>
class Mailbox {
 public:
  explicit Mailbox(size_t slots) : slots_(slots) {}

  void push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < slots_; });
    queue_.push_back(std::move(value));
    not_empty_.notify_one();
  }

  T pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty(); });
    T value = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return value;
  }

 private:
  size_t slots_;
  std::deque<T> queue_;
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
};

/// Query frame `frame` of a sequence, or nothing when the true pose cannot be rendered.
inline std::optional<Pyramid> render_sequence_query(const Scene& scene, const SequenceConfig& cfg, int frame) {
  const auto seed = frame_seed(cfg.rng_seed, frame, SeedPurpose::Query);
  try {
    return query_render(scene, cfg.trajectory[static_cast<size_t>(frame)], cfg.intrinsics,
                        draw_degradation(cfg.degradation, seed), seed, cfg.render_workers);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Render-side output for frame `frame`; `bundle` is empty when rendering failed.
struct BundleMessage {
  int frame = 0;
  int source_frame = -1;
  std::shared_ptr<const Bundle> bundle;
  std::exception_ptr fatal;
};

/// Localization-side output: the pose the render thread should build from next.
struct PoseMessage {
  int source_frame = 0;
  Pose predicted;
};

inline BundleMessage build_bundle(const Scene& scene, const SequenceConfig& cfg, int frame, int source_frame,
                                  const Pose& predicted) {
  BundleMessage msg{frame, source_frame, nullptr, nullptr};
  try {
    msg.bundle = std::make_shared<const Bundle>(make_bundle(scene, predicted, cfg.intrinsics, cfg.n_anchors,
                                                            frame_seed(cfg.rng_seed, frame, SeedPurpose::Bundle),
                                                            frame, source_frame, cfg.render_workers));
  } catch (const Error&) {
    // Rendering can fail for a badly predicted pose; the localizer falls back.
  }
  return msg;
}

/// Localization-thread state: motion filter plus the last usable bundle.
class Localizer {
 public:
  Localizer(const Scene& scene, const SequenceConfig& cfg, const Pose& prior, const QueryCache* cache)
      : scene_(scene), cfg_(cfg), prior_(prior), cache_(cache) {
    state_.pose = prior;
  }

  std::optional<Pyramid> render_query(int frame) const {
    if (cache_) return cache_->at(static_cast<size_t>(frame));
    return render_sequence_query(scene_, cfg_, frame);
  }

  FrameResult localize(int frame, const std::optional<Pyramid>& query, const BundleMessage& msg) {
    FrameResult r;
    r.frame_index = frame;
    bool fallback = false;
    if (msg.bundle) {
      last_good_ = msg.bundle;
    } else {
      fallback = true;
    }
    const MotionPrediction pred = predict(state_, 1, cfg_.motion);
    const bool have_motion = state_.measurements > 0;
    r.reported_pose = have_motion ? pred.pose : prior_;

    if (last_good_ && query) {
      r.bundle_frame = last_good_->frame_index;
      r.bundle_source_frame = last_good_->source_frame;
      r.bundle_fallback = fallback;
      SamplerConfig sampler = cfg_.jngo.sampler;
      sampler.rng_seed = frame_seed(cfg_.rng_seed, frame, SeedPurpose::Sampler);
      if (have_motion && cfg_.motion_sigma_t) sampler.sigma_t = pred.sigma_t;
      const Pose center = have_motion ? pred.pose : prior_;
      const double lambda = have_motion ? cfg_.jngo.lambda_motion : 0.0;
      try {
        const JngoResult j =
            run(center, *last_good_, *query, sampler, cfg_.jngo.schedule, center, lambda, cfg_.jngo.workers);
        r.status = FrameStatus::Localized;
        r.estimated_pose = j.pose;
        r.reported_pose = j.pose;
        r.photometric_cost = j.hypotheses[j.index].photometric_cost_fine;
        r.hypothesis_index = static_cast<int>(j.index);
      } catch (const Error&) {
        r.status = FrameStatus::Failed;
      }
    } else {
      r.bundle_fallback = fallback;
    }

    if (r.localized()) {
      state_ = update(state_, *r.estimated_pose, cfg_.motion);
    } else if (have_motion) {
      state_ = coast(state_, cfg_.motion);
    }
    return r;
  }

  /// Pose the render side should use for frame + kBundleLag.
  PoseMessage next_render_pose(int frame) const {
    const Pose p = state_.measurements > 0 ? predict(state_, kBundleLag, cfg_.motion).pose : prior_;
    return {frame, p};
  }

 private:
  const Scene& scene_;
  const SequenceConfig& cfg_;
  Pose prior_;
  MotionState state_;
  const QueryCache* cache_;
  std::shared_ptr<const Bundle> last_good_;
};

}  // namespace detail

/// Renders and degrades every query frame of the configured trajectory.
inline QueryCache render_queries(const SequenceConfig& cfg) {
  const Scene scene(cfg.scene);
  QueryCache out;
  out.reserve(cfg.trajectory.size());
  for (size_t i = 0; i < cfg.trajectory.size(); ++i)
    out.push_back(detail::render_sequence_query(scene, cfg, static_cast<int>(i)));
  return out;
}

/// First-frame prior: ground truth plus seeded noise within the configured bounds.
inline Pose initial_prior(const SequenceConfig& cfg) {
  return perturb_prior(cfg.trajectory.front(), cfg.prior, frame_seed(cfg.rng_seed, 0, SeedPurpose::Prior));
}

/**
 * Localizes every frame of the configured trajectory. The render side builds
 * bundle i + 2 from the motion prediction made right after frame i, and the
 * first two bundles from the prior. Both modes run the same schedule; the
 * dual-thread mode overlaps rendering with localization through two
 * two-slot mailboxes. `on_frame` is called with each result in order.
 * `queries`, when given, replaces query rendering (see render_queries).
 */
inline std::vector<FrameResult> run_sequence(const SequenceConfig& cfg,
                                             ExecutionMode mode = ExecutionMode::DualThread,
                                             const std::function<void(const FrameResult&)>& on_frame = {},
                                             const QueryCache* queries = nullptr) {
  cfg.validate();
  const Scene scene(cfg.scene);
  const Pose prior = initial_prior(cfg);
  const int n = static_cast<int>(cfg.trajectory.size());
  if (queries && queries->size() != cfg.trajectory.size()) {
    throw Error(ErrorCode::LengthMismatch, "query cache does not match the trajectory");
  }
  detail::Localizer loc(scene, cfg, prior, queries);
  std::vector<FrameResult> results;
  results.reserve(static_cast<size_t>(n));

  using Clock = std::chrono::steady_clock;
  auto last_publish = Clock::now();
  auto publish = [&](FrameResult r) {
    const auto now = Clock::now();
    r.latency_ms = std::chrono::duration<double, std::milli>(now - last_publish).count();
    last_publish = now;
    if (on_frame) on_frame(r);
    results.push_back(std::move(r));
  };

  if (mode == ExecutionMode::Sequential) {
    std::deque<detail::BundleMessage> pending;
    for (int i = 0; i < std::min(n, kBundleLag); ++i) pending.push_back(detail::build_bundle(scene, cfg, i, -1, prior));
    for (int i = 0; i < n; ++i) {
      const auto query = loc.render_query(i);
      const detail::BundleMessage msg = std::move(pending.front());
      pending.pop_front();
      publish(loc.localize(i, query, msg));
      if (i + kBundleLag < n) {
        const detail::PoseMessage p = loc.next_render_pose(i);
        pending.push_back(detail::build_bundle(scene, cfg, i + kBundleLag, p.source_frame, p.predicted));
      }
    }
    return results;
  }

  detail::Mailbox<detail::BundleMessage> bundles(kBundleLag);
  detail::Mailbox<detail::PoseMessage> poses(kBundleLag);
  std::jthread render_thread([&] {
    try {
      for (int i = 0; i < n; ++i) {
        if (i < kBundleLag) {
          bundles.push(detail::build_bundle(scene, cfg, i, -1, prior));
        } else {
          const detail::PoseMessage p = poses.pop();
          bundles.push(detail::build_bundle(scene, cfg, i, p.source_frame, p.predicted));
        }
      }
    } catch (...) {
      bundles.push({0, -1, nullptr, std::current_exception()});
    }
  });
  for (int i = 0; i < n; ++i) {
    const auto query = loc.render_query(i);
    const detail::BundleMessage msg = bundles.pop();
    if (msg.fatal) std::rethrow_exception(msg.fatal);
    publish(loc.localize(i, query, msg));
    if (i + kBundleLag < n) poses.push(loc.next_render_pose(i));
  }
  return results;
}

/**
 * Motion-term weight such that a 2 m deviation from the prediction costs as
 * much as the median photometric cost of a localized frame. Each of the
 * first `frames` frames of the configured trajectory is localized against a
 * bundle rendered at its true pose; the median runs over the fine-level cost
 * of the selected hypotheses.
 */
inline double calibrate_lambda_motion(const SequenceConfig& cfg, int frames = 8, double deviation_m = 2.0) {
  cfg.validate();
  const Scene scene(cfg.scene);
  std::vector<double> costs;
  const int n = std::min<int>(frames, static_cast<int>(cfg.trajectory.size()));
  for (int i = 0; i < n; ++i) {
    const Pose& gt = cfg.trajectory[static_cast<size_t>(i)];
    const auto qseed = frame_seed(cfg.rng_seed, i, SeedPurpose::Query);
    const Pyramid query = query_render(scene, gt, cfg.intrinsics, draw_degradation(cfg.degradation, qseed), qseed);
    const Bundle b = make_bundle(scene, gt, cfg.intrinsics, cfg.n_anchors,
                                 frame_seed(cfg.rng_seed, i, SeedPurpose::Bundle), i);
    SamplerConfig sampler = cfg.jngo.sampler;
    sampler.rng_seed = frame_seed(cfg.rng_seed, i, SeedPurpose::Sampler);
    const JngoResult j = run(gt, b, query, sampler, cfg.jngo.schedule, gt, 0.0, cfg.jngo.workers);
    costs.push_back(j.hypotheses[j.index].photometric_cost_fine);
  }
  if (costs.empty()) throw Error(ErrorCode::ConfigMismatch, "calibration needs at least one frame");
  const auto mid = costs.begin() + static_cast<std::ptrdiff_t>(costs.size() / 2);
  std::nth_element(costs.begin(), mid, costs.end());
  return *mid / (deviation_m * deviation_m);
}

}  // namespace pilot

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "pilot/engine.hpp"
#include "pilot/error.hpp"
#include "pilot/metrics.hpp"
#include "pilot/trajectory.hpp"

namespace pilot {

enum class AblationAxis { RotationAware, MotionReg, MultiHypothesis };

inline std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::RotationAware: return "rotation_aware";
    case AblationAxis::MotionReg: return "motion_reg";
    case AblationAxis::MultiHypothesis: return "multi_hypothesis";
  }
  return "rotation_aware";
}

inline AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "rotation_aware") return AblationAxis::RotationAware;
  if (s == "motion_reg") return AblationAxis::MotionReg;
  if (s == "multi_hypothesis") return AblationAxis::MultiHypothesis;
  throw Error(ErrorCode::ParseError, "unknown ablation axis '" + s + "'");
}

/// Which component a cell switches off; Full keeps everything on.
enum class AblationVariant { Full, Isotropic, NoMotionReg, SingleHypothesis };

inline std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full: return "full";
    case AblationVariant::Isotropic: return "isotropic_tight";
    case AblationVariant::NoMotionReg: return "no_motion_reg";
    case AblationVariant::SingleHypothesis: return "single_hypothesis";
  }
  return "full";
}

inline AblationVariant off_variant(AblationAxis a) {
  switch (a) {
    case AblationAxis::RotationAware: return AblationVariant::Isotropic;
    case AblationAxis::MotionReg: return AblationVariant::NoMotionReg;
    case AblationAxis::MultiHypothesis: return AblationVariant::SingleHypothesis;
  }
  return AblationVariant::Full;
}

/**
 * Trial protocol. Trial t flies a short straight line from a seeded start
 * position and heading; frame 0 starts from a prior that is exactly `level`
 * metres and `level` degrees of yaw away from the truth. Recall is taken over
 * every frame of every trial.
 */
struct AblationConfig {
  SequenceConfig base;  // scene, camera, JNGO, motion model, degradation, seed
  TrajectorySpec trajectory = [] {
    TrajectorySpec t;
    t.frames = 3;
    return t;
  }();
  int trials = 50;
  double start_half_width = 1500.0;  // start positions are drawn from this square
  std::vector<double> levels = {3.0, 5.0, 10.0};
  Threshold threshold{1.0, 1.0};
};

struct AblationCell {
  AblationVariant variant = AblationVariant::Full;
  double level = 0.0;
  double recall = 0.0;  // percent
  int frames = 0;
  int hits = 0;
};

struct AblationTable {
  AblationAxis axis = AblationAxis::RotationAware;
  std::vector<double> levels;
  std::vector<AblationCell> on;   // full configuration, one per level
  std::vector<AblationCell> off;  // axis switched off, one per level
};

/// Sequence configuration of one cell's trial.
inline SequenceConfig ablation_trial_config(const AblationConfig& ab, AblationVariant v, double level, int trial) {
  SequenceConfig cfg = ab.base;
  std::mt19937_64 rng(derive_seed(ab.base.rng_seed, static_cast<std::uint64_t>(trial), 0xab1));
  std::uniform_real_distribution<double> pos(-ab.start_half_width, ab.start_half_width);
  std::uniform_real_distribution<double> heading(-kPi, kPi);
  TrajectorySpec ts = ab.trajectory;
  ts.start = Vec3(pos(rng), pos(rng), ab.trajectory.start.z());
  ts.heading = heading(rng);
  cfg.trajectory = generate_trajectory(ts);
  cfg.rng_seed = derive_seed(ab.base.rng_seed, static_cast<std::uint64_t>(trial), 0xab2);
  cfg.prior = PriorNoise{level, level * kDegToRad, 0.0, 0.0, true};

  switch (v) {
    case AblationVariant::Full: break;
    case AblationVariant::Isotropic:
      cfg.jngo.sampler.mode = SamplingMode::Isotropic;
      break;
    case AblationVariant::NoMotionReg:
      cfg.jngo.lambda_motion = 0.0;
      break;
    case AblationVariant::SingleHypothesis:
      cfg.jngo.sampler.alpha_pitch = 0.0;
      cfg.jngo.sampler.alpha_yaw = 0.0;
      cfg.jngo.sampler.sigma_t = Mat3::Zero();
      cfg.motion_sigma_t = false;
      break;
  }
  return cfg;
}

/**
 * Runs the on/off comparison for one axis. Cells are memoised in
 * `cache` by (variant, level), so the full configuration is computed once
 * when several axes share it. Query renders are shared across cells.
 */
class AblationRunner {
 public:
  explicit AblationRunner(AblationConfig cfg) : cfg_(std::move(cfg)) {}

  const AblationConfig& config() const { return cfg_; }

  AblationCell cell(AblationVariant v, double level) {
    const auto key = std::make_pair(static_cast<int>(v), level);
    if (const auto it = cells_.find(key); it != cells_.end()) return it->second;
    AblationCell c{v, level, 0.0, 0, 0};
    for (int t = 0; t < cfg_.trials; ++t) {
      const SequenceConfig seq = ablation_trial_config(cfg_, v, level, t);
      const auto results = run_sequence(seq, ExecutionMode::Sequential, {}, &queries(t, seq));
      const MetricsReport m = compute_metrics(results, seq.trajectory, {cfg_.threshold});
      for (const auto& fe : m.per_frame) {
        ++c.frames;
        if (fe.localized && fe.translation_m <= cfg_.threshold.first && fe.rotation_deg <= cfg_.threshold.second) {
          ++c.hits;
        }
      }
    }
    c.recall = c.frames ? 100.0 * c.hits / c.frames : 0.0;
    cells_[key] = c;
    return c;
  }

  AblationTable run(AblationAxis axis) {
    AblationTable table;
    table.axis = axis;
    table.levels = cfg_.levels;
    for (double level : cfg_.levels) {
      table.on.push_back(cell(AblationVariant::Full, level));
      table.off.push_back(cell(off_variant(axis), level));
    }
    return table;
  }

 private:
  // Ground truth and query degradation depend only on the trial, not the cell.
  const QueryCache& queries(int trial, const SequenceConfig& seq) {
    auto it = queries_.find(trial);
    if (it == queries_.end()) it = queries_.emplace(trial, render_queries(seq)).first;
    return it->second;
  }

  AblationConfig cfg_;
  std::map<std::pair<int, double>, AblationCell> cells_;
  std::map<int, QueryCache> queries_;
};

inline AblationTable run_ablation(const AblationConfig& cfg, AblationAxis axis) {
  AblationRunner runner(cfg);
  return runner.run(axis);
}

}  // namespace pilot

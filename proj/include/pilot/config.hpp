#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pilot/ablation.hpp"
#include "pilot/engine.hpp"
#include "pilot/error.hpp"
#include "pilot/metrics.hpp"
#include "pilot/trajectory.hpp"

namespace pilot {

/// Everything a run needs, mirroring the sections of the JSON run file.
struct RunConfig {
  // scene
  SceneSpec scene{7, 4000.0, 1.0};
  // trajectory
  TrajectorySpec trajectory;
  // noise
  PriorNoise prior;
  QueryDegradation degradation{true};
  // jngo
  JngoConfig jngo = [] {
    JngoConfig j;
    j.lambda_motion = 0.0069;  // calibrate_lambda_motion on the standard scene
    return j;
  }();
  // engine
  Intrinsics intrinsics{89.6, 89.6, 63.5, 63.5, 128, 128};
  size_t n_anchors = 500;
  MotionNoise motion;
  ExecutionMode mode = ExecutionMode::DualThread;
  unsigned render_workers = 1;
  std::uint64_t rng_seed = 3;
  // eval
  std::vector<Threshold> thresholds = default_thresholds();
  std::vector<double> target_ks = {1.0, 3.0, 5.0};
  int ablation_trials = 50;
  int ablation_frames = 3;
  std::vector<double> ablation_levels = {3.0, 5.0, 10.0};
};

inline SequenceConfig sequence_config(const RunConfig& rc, std::vector<Pose> trajectory) {
  SequenceConfig s;
  s.scene = rc.scene;
  s.intrinsics = rc.intrinsics;
  s.trajectory = std::move(trajectory);
  s.prior = rc.prior;
  s.degradation = rc.degradation;
  s.jngo = rc.jngo;
  s.motion = rc.motion;
  s.n_anchors = rc.n_anchors;
  s.rng_seed = rc.rng_seed;
  s.render_workers = rc.render_workers;
  return s;
}

inline SequenceConfig sequence_config(const RunConfig& rc) {
  return sequence_config(rc, generate_trajectory(rc.trajectory));
}

inline AblationConfig ablation_config(const RunConfig& rc) {
  AblationConfig a;
  a.base = sequence_config(rc, {});
  a.trajectory = rc.trajectory;
  a.trajectory.frames = rc.ablation_frames;
  a.trials = rc.ablation_trials;
  a.levels = rc.ablation_levels;
  if (!rc.thresholds.empty()) a.threshold = rc.thresholds.front();
  return a;
}

namespace detail {

using nlohmann::json;

// Reads keys of one section, rejecting any key it does not know.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    j_ = root.at(name);
    if (!j_.is_object()) throw Error(ErrorCode::ParseError, "section '" + name + "' must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) unknown_.insert(it.key());
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    unknown_.erase(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, name_ + "." + key + ": " + e.what());
    }
  }

  void get_deg(const std::string& key, double& radians) {
    double deg = radians * kRadToDeg;
    get(key, deg);
    radians = deg * kDegToRad;
  }

  void get_vec3(const std::string& key, Vec3& v) {
    std::vector<double> x{v.x(), v.y(), v.z()};
    get(key, x);
    if (x.size() != 3) throw Error(ErrorCode::ParseError, name_ + "." + key + " needs 3 numbers");
    v = Vec3(x[0], x[1], x[2]);
  }

  void get_mat3(const std::string& key, Mat3& m) {
    std::vector<std::vector<double>> rows(3, std::vector<double>(3));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rows[r][c] = m(r, c);
    get(key, rows);
    if (rows.size() != 3) throw Error(ErrorCode::ParseError, name_ + "." + key + " needs 3 rows");
    for (int r = 0; r < 3; ++r) {
      if (rows[r].size() != 3) throw Error(ErrorCode::ParseError, name_ + "." + key + " needs 3 columns");
      for (int c = 0; c < 3; ++c) m(r, c) = rows[r][c];
    }
  }

  json sub(const std::string& key) {
    if (!j_.contains(key)) return json::object();
    unknown_.erase(key);
    return json{{key, j_.at(key)}};
  }

  void finish() const {
    if (!unknown_.empty()) throw Error(ErrorCode::ParseError, "unknown key '" + *unknown_.begin() + "' in '" + name_ + "'");
  }

 private:
  std::string name_;
  json j_ = json::object();
  std::set<std::string> unknown_;
};

}  // namespace detail

/// Parses a run configuration; absent keys keep their defaults, unknown keys are errors.
inline RunConfig run_config_from_json(const nlohmann::json& root) {
  using detail::Section;
  if (!root.is_object()) throw Error(ErrorCode::ParseError, "run configuration must be a JSON object");
  static const std::set<std::string> kSections = {"scene", "trajectory", "noise", "jngo", "engine", "eval"};
  for (auto it = root.begin(); it != root.end(); ++it) {
    if (!kSections.count(it.key())) throw Error(ErrorCode::ParseError, "unknown section '" + it.key() + "'");
  }
  RunConfig rc;

  Section scene(root, "scene");
  scene.get("seed", rc.scene.seed);
  scene.get("extent", rc.scene.extent);
  scene.get("roughness", rc.scene.roughness);
  scene.finish();

  Section traj(root, "trajectory");
  std::string pattern = to_string(rc.trajectory.pattern);
  traj.get("pattern", pattern);
  rc.trajectory.pattern = trajectory_pattern_from_string(pattern);
  traj.get("frames", rc.trajectory.frames);
  traj.get_vec3("start", rc.trajectory.start);
  traj.get_deg("heading_deg", rc.trajectory.heading);
  traj.get("speed", rc.trajectory.speed);
  traj.get_deg("pitch_deg", rc.trajectory.pitch);
  traj.get("orbit_radius", rc.trajectory.orbit_radius);
  traj.get_deg("roll_amplitude_deg", rc.trajectory.roll_amplitude);
  traj.get("roll_period", rc.trajectory.roll_period);
  traj.get("helix_radius", rc.trajectory.helix_radius);
  traj.finish();

  Section noise(root, "noise");
  {
    Section prior(noise.sub("prior"), "prior");
    prior.get("translation_m", rc.prior.translation);
    prior.get_deg("yaw_deg", rc.prior.yaw);
    prior.get_deg("pitch_deg", rc.prior.pitch);
    prior.get_deg("roll_deg", rc.prior.roll);
    prior.get("exact", rc.prior.exact);
    prior.finish();
    Section query(noise.sub("query"), "query");
    query.get("enabled", rc.degradation.enabled);
    query.get("gain_jitter", rc.degradation.gain_jitter);
    query.get("bias_jitter", rc.degradation.bias_jitter);
    query.get("noise_sigma", rc.degradation.noise_sigma);
    query.finish();
  }
  noise.finish();

  Section jngo(root, "jngo");
  auto& sc = rc.jngo.sampler;
  auto& rs = rc.jngo.schedule;
  jngo.get_deg("alpha_pitch_deg", sc.alpha_pitch);
  jngo.get_deg("alpha_yaw_deg", sc.alpha_yaw);
  jngo.get_deg("pitch_step_deg", sc.pitch_step);
  jngo.get_deg("yaw_step_deg", sc.yaw_step);
  jngo.get_mat3("sigma_t", sc.sigma_t);
  std::string sampling = sc.mode == SamplingMode::Isotropic ? "isotropic" : "rotation_aware";
  jngo.get("sampling", sampling);
  if (sampling == "rotation_aware") {
    sc.mode = SamplingMode::RotationAware;
  } else if (sampling == "isotropic") {
    sc.mode = SamplingMode::Isotropic;
  } else {
    throw Error(ErrorCode::ParseError, "jngo.sampling must be rotation_aware or isotropic");
  }
  jngo.get_deg("iso_half_width_deg", sc.iso_half_width);
  jngo.get("iso_count", sc.iso_count);
  std::vector<int> iters(rs.iterations_per_level.begin(), rs.iterations_per_level.end());
  jngo.get("iterations_per_level", iters);
  if (iters.size() != kNumLevels) throw Error(ErrorCode::ParseError, "jngo.iterations_per_level needs 3 counts");
  std::copy(iters.begin(), iters.end(), rs.iterations_per_level.begin());
  jngo.get("lm_lambda_init", rs.lm_lambda_init);
  jngo.get("lm_lambda_up", rs.lm_lambda_up);
  jngo.get("lm_lambda_down", rs.lm_lambda_down);
  jngo.get("lm_lambda_min", rs.lm_lambda_min);
  jngo.get("lm_lambda_max", rs.lm_lambda_max);
  jngo.get("huber_delta", rs.huber_delta);
  jngo.get("min_anchors", rs.min_anchors);
  jngo.get("lambda_motion", rc.jngo.lambda_motion);
  jngo.get("workers", rc.jngo.workers);
  jngo.finish();

  Section engine(root, "engine");
  {
    Section cam(engine.sub("camera"), "camera");
    cam.get("fx", rc.intrinsics.fx);
    cam.get("fy", rc.intrinsics.fy);
    cam.get("cx", rc.intrinsics.cx);
    cam.get("cy", rc.intrinsics.cy);
    cam.get("width", rc.intrinsics.width);
    cam.get("height", rc.intrinsics.height);
    cam.finish();
    Section motion(engine.sub("motion"), "motion");
    motion.get("position_process", rc.motion.position_process);
    motion.get("velocity_process", rc.motion.velocity_process);
    motion.get("measurement", rc.motion.measurement);
    motion.get("angular_smoothing", rc.motion.angular_smoothing);
    motion.finish();
  }
  engine.get("n_anchors", rc.n_anchors);
  std::string mode = rc.mode == ExecutionMode::DualThread ? "dual" : "sequential";
  engine.get("mode", mode);
  if (mode == "dual") {
    rc.mode = ExecutionMode::DualThread;
  } else if (mode == "sequential") {
    rc.mode = ExecutionMode::Sequential;
  } else {
    throw Error(ErrorCode::ParseError, "engine.mode must be dual or sequential");
  }
  engine.get("render_workers", rc.render_workers);
  engine.get("rng_seed", rc.rng_seed);
  engine.finish();

  Section eval(root, "eval");
  std::vector<std::vector<double>> th;
  for (const auto& t : rc.thresholds) th.push_back({t.first, t.second});
  eval.get("thresholds", th);
  rc.thresholds.clear();
  for (const auto& t : th) {
    if (t.size() != 2) throw Error(ErrorCode::ParseError, "eval.thresholds entries are [metres, degrees]");
    rc.thresholds.emplace_back(t[0], t[1]);
  }
  eval.get("target_ks", rc.target_ks);
  eval.get("ablation_trials", rc.ablation_trials);
  eval.get("ablation_frames", rc.ablation_frames);
  eval.get("ablation_levels", rc.ablation_levels);
  eval.finish();

  rc.intrinsics.validate();
  rs.validate();
  return rc;
}

inline nlohmann::json to_json(const RunConfig& rc) {
  using nlohmann::json;
  const auto& sc = rc.jngo.sampler;
  const auto& rs = rc.jngo.schedule;
  const auto& t = rc.trajectory;
  json sigma = json::array();
  for (int r = 0; r < 3; ++r) sigma.push_back({sc.sigma_t(r, 0), sc.sigma_t(r, 1), sc.sigma_t(r, 2)});
  json thresholds = json::array();
  for (const auto& th : rc.thresholds) thresholds.push_back({th.first, th.second});
  json j;
  j["scene"] = {{"seed", rc.scene.seed}, {"extent", rc.scene.extent}, {"roughness", rc.scene.roughness}};
  j["trajectory"] = {{"pattern", to_string(t.pattern)},
                     {"frames", t.frames},
                     {"start", {t.start.x(), t.start.y(), t.start.z()}},
                     {"heading_deg", t.heading * kRadToDeg},
                     {"speed", t.speed},
                     {"pitch_deg", t.pitch * kRadToDeg},
                     {"orbit_radius", t.orbit_radius},
                     {"roll_amplitude_deg", t.roll_amplitude * kRadToDeg},
                     {"roll_period", t.roll_period},
                     {"helix_radius", t.helix_radius}};
  j["noise"] = {{"prior",
                 {{"translation_m", rc.prior.translation},
                  {"yaw_deg", rc.prior.yaw * kRadToDeg},
                  {"pitch_deg", rc.prior.pitch * kRadToDeg},
                  {"roll_deg", rc.prior.roll * kRadToDeg},
                  {"exact", rc.prior.exact}}},
                {"query",
                 {{"enabled", rc.degradation.enabled},
                  {"gain_jitter", rc.degradation.gain_jitter},
                  {"bias_jitter", rc.degradation.bias_jitter},
                  {"noise_sigma", rc.degradation.noise_sigma}}}};
  j["jngo"] = {{"alpha_pitch_deg", sc.alpha_pitch * kRadToDeg},
               {"alpha_yaw_deg", sc.alpha_yaw * kRadToDeg},
               {"pitch_step_deg", sc.pitch_step * kRadToDeg},
               {"yaw_step_deg", sc.yaw_step * kRadToDeg},
               {"sigma_t", sigma},
               {"sampling", sc.mode == SamplingMode::Isotropic ? "isotropic" : "rotation_aware"},
               {"iso_half_width_deg", sc.iso_half_width * kRadToDeg},
               {"iso_count", sc.iso_count},
               {"iterations_per_level", rs.iterations_per_level},
               {"lm_lambda_init", rs.lm_lambda_init},
               {"lm_lambda_up", rs.lm_lambda_up},
               {"lm_lambda_down", rs.lm_lambda_down},
               {"lm_lambda_min", rs.lm_lambda_min},
               {"lm_lambda_max", rs.lm_lambda_max},
               {"huber_delta", rs.huber_delta},
               {"min_anchors", rs.min_anchors},
               {"lambda_motion", rc.jngo.lambda_motion},
               {"workers", rc.jngo.workers}};
  j["engine"] = {{"camera",
                  {{"fx", rc.intrinsics.fx},
                   {"fy", rc.intrinsics.fy},
                   {"cx", rc.intrinsics.cx},
                   {"cy", rc.intrinsics.cy},
                   {"width", rc.intrinsics.width},
                   {"height", rc.intrinsics.height}}},
                 {"motion",
                  {{"position_process", rc.motion.position_process},
                   {"velocity_process", rc.motion.velocity_process},
                   {"measurement", rc.motion.measurement},
                   {"angular_smoothing", rc.motion.angular_smoothing}}},
                 {"n_anchors", rc.n_anchors},
                 {"mode", rc.mode == ExecutionMode::DualThread ? "dual" : "sequential"},
                 {"render_workers", rc.render_workers},
                 {"rng_seed", rc.rng_seed}};
  j["eval"] = {{"thresholds", thresholds},
               {"target_ks", rc.target_ks},
               {"ablation_trials", rc.ablation_trials},
               {"ablation_frames", rc.ablation_frames},
               {"ablation_levels", rc.ablation_levels}};
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return run_config_from_json(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

inline void save_run_config(const std::string& path, const RunConfig& rc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << to_json(rc).dump(2) << "\n";
}

}  // namespace pilot

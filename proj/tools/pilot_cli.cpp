// Command-line entry points: scene and trajectory generation, sequence
// localization, target geolocation, evaluation, ablation and self-checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pilot/pilot.hpp"

namespace {

using namespace pilot;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitThreshold = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  RunConfig load() const {
    RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) rc.rng_seed = *seed;
    return rc;
  }
};

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json waves_json(const std::vector<Wave>& waves) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& w : waves) a.push_back({{"amplitude", w.amplitude}, {"kx", w.kx}, {"ky", w.ky}, {"phase", w.phase}});
  return a;
}

void print_metrics(const MetricsReport& m) {
  std::cout << "frames            " << m.per_frame.size() << "\n"
            << "completeness      " << fmt(m.completeness, 1) << " %\n"
            << "median error      " << fmt(m.median_translation_err) << " m, " << fmt(m.median_rotation_err)
            << " deg\n";
  for (const auto& [t, v] : m.recall) std::cout << "recall " << threshold_key(t) << "  " << fmt(v, 1) << " %\n";
  std::cout << "mean fps          " << fmt(m.mean_fps, 2) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_gen_scene(const Common& c, const std::string& out, const std::string& intrinsics_out,
                  const std::string& dump_dir) {
  const RunConfig rc = c.load();
  const Scene scene(rc.scene);
  nlohmann::json j;
  j["scene"] = {{"seed", rc.scene.seed}, {"extent", rc.scene.extent}, {"roughness", rc.scene.roughness}};
  j["height_bound_m"] = scene.height_bound();
  j["slope_bound"] = scene.slope_bound();
  j["terrain_waves"] = waves_json(scene.terrain_waves());
  nlohmann::json tex = nlohmann::json::array();
  for (int ch = 0; ch < kAppearanceChannels; ++ch) tex.push_back(waves_json(scene.texture_waves(ch)));
  j["texture_waves"] = tex;
  write_json(out, j);
  if (!intrinsics_out.empty()) {
    std::ofstream os(intrinsics_out);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + intrinsics_out);
    write_intrinsics(os, rc.intrinsics);
  }
  if (!dump_dir.empty()) {
    // Debug view from the first trajectory pose: one file per channel plus depth.
    std::filesystem::create_directories(dump_dir);
    TrajectorySpec ts = rc.trajectory;
    ts.frames = 1;
    const RenderedView view = render(scene, generate_trajectory(ts).front(), rc.intrinsics, rc.render_workers);
    for (int ch = 0; ch < kAppearanceChannels; ++ch) {
      const std::string name = "channel" + std::to_string(ch);
      write_float_image(dump_dir + "/" + name + ".pfi", channel_to_float_image(view.appearance, ch, name));
    }
    write_float_image(dump_dir + "/depth.pfi", depth_to_float_image(view.depth));
  }
  return kExitOk;
}

int cmd_gen_traj(const Common& c, const std::string& pattern, int frames, const std::string& out) {
  RunConfig rc = c.load();
  if (!pattern.empty()) rc.trajectory.pattern = trajectory_pattern_from_string(pattern);
  if (frames > 0) rc.trajectory.frames = frames;
  const auto poses = generate_trajectory(rc.trajectory);
  const Scene scene(rc.scene);
  for (const auto& p : poses) check_above_terrain(scene, p);
  if (out.empty() || out == "-") {
    write_ground_truth(std::cout, poses);
  } else {
    write_ground_truth(out, poses);
  }
  return kExitOk;
}

int cmd_run(const Common& c, const std::string& gt_path, const std::string& out, const std::string& mode,
            const std::string& metrics_out, bool quiet) {
  RunConfig rc = c.load();
  if (!mode.empty()) rc.mode = mode == "sequential" ? ExecutionMode::Sequential : ExecutionMode::DualThread;
  const std::vector<Pose> gt = gt_path.empty() ? generate_trajectory(rc.trajectory) : read_ground_truth(gt_path);
  const SequenceConfig seq = sequence_config(rc, gt);
  const auto on_frame = [&](const FrameResult& r) {
    if (quiet) return;
    std::cerr << "frame " << r.frame_index << " " << to_string(r.status) << " cost " << fmt(r.photometric_cost, 4)
              << " " << fmt(r.latency_ms, 1) << " ms\n";
  };
  const auto results = run_sequence(seq, rc.mode, on_frame);
  if (out.empty() || out == "-") {
    write_results(std::cout, results);
  } else {
    write_results(out, results);
  }
  if (!metrics_out.empty()) write_json(metrics_out, to_json(compute_metrics(results, gt, rc.thresholds)));
  return kExitOk;
}

int cmd_target(const Common& c, const std::string& results_path, const std::string& targets_path,
               const std::string& gt_path, const std::string& make_targets, const std::string& out,
               const std::string& report_out, double min_recall5) {
  const RunConfig rc = c.load();
  const Scene scene(rc.scene);
  if (!make_targets.empty()) {
    if (gt_path.empty()) throw Error(ErrorCode::ConfigMismatch, "--make-targets needs --gt");
    write_targets(make_targets, make_grid_targets(read_ground_truth(gt_path), rc.intrinsics, scene));
    if (results_path.empty()) return kExitOk;
  }
  if (results_path.empty() || targets_path.empty()) {
    throw Error(ErrorCode::ConfigMismatch, "target needs --results and --targets");
  }
  const auto targets = read_targets(targets_path);
  const auto obs = track_targets(read_results(results_path), targets, scene, rc.intrinsics);
  if (!out.empty()) write_target_observations(out, obs);
  const bool annotated = std::any_of(targets.begin(), targets.end(), [](const auto& t) { return t.ground_truth; });
  if (!annotated) return kExitOk;
  const TargetReport rep = target_report(obs, targets, rc.target_ks);
  for (const auto& [k, v] : rep.recall_at) std::cout << "recall@" << fmt(k, 0) << "m  " << fmt(v, 2) << " %\n";
  if (!report_out.empty()) write_json(report_out, to_json(rep));
  if (min_recall5 >= 0.0) {
    const auto it = rep.recall_at.find(5.0);
    if (it == rep.recall_at.end() || it->second < min_recall5) return kExitThreshold;
  }
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& results_path, const std::string& gt_path,
             const std::string& plot, const std::string& json_out, double min_recall, double min_completeness) {
  const RunConfig rc = c.load();
  const auto m = compute_metrics(read_results(results_path), read_ground_truth(gt_path), rc.thresholds);
  print_metrics(m);
  if (!plot.empty()) write_error_plot(plot, m);
  if (!json_out.empty()) write_json(json_out, to_json(m));
  if (min_completeness >= 0.0 && m.completeness < min_completeness) return kExitThreshold;
  if (min_recall >= 0.0 && !m.recall.empty() && m.recall.begin()->second < min_recall) return kExitThreshold;
  return kExitOk;
}

int cmd_ablate(const Common& c, const std::string& axis, int trials, const std::string& json_out) {
  const RunConfig rc = c.load();
  AblationConfig ab = ablation_config(rc);
  if (trials > 0) ab.trials = trials;
  AblationRunner runner(ab);
  std::vector<AblationAxis> axes;
  if (axis == "all") {
    axes = {AblationAxis::RotationAware, AblationAxis::MotionReg, AblationAxis::MultiHypothesis};
  } else {
    axes = {ablation_axis_from_string(axis)};
  }
  nlohmann::json j = nlohmann::json::array();
  std::cout << "recall @ " << threshold_key(ab.threshold) << " (%), " << ab.trials << " trials of "
            << ab.trajectory.frames << " frames per cell\n";
  std::cout << "variant            ";
  for (double l : ab.levels) std::cout << "  " << fmt(l, 0) << "m/" << fmt(l, 0) << "deg";
  std::cout << "\n";
  for (AblationAxis a : axes) {
    const AblationTable t = runner.run(a);
    auto row = [&](const std::vector<AblationCell>& cells) {
      char name[32];
      std::snprintf(name, sizeof name, "%-19s", to_string(cells.front().variant).c_str());
      std::cout << name;
      nlohmann::json r = nlohmann::json::array();
      for (const auto& cell : cells) {
        char v[32];
        std::snprintf(v, sizeof v, "  %9.1f", cell.recall);
        std::cout << v;
        r.push_back({{"level", cell.level}, {"recall_pct", cell.recall}, {"frames", cell.frames}, {"hits", cell.hits}});
      }
      std::cout << "\n";
      return r;
    };
    nlohmann::json entry;
    entry["axis"] = to_string(a);
    entry["off_variant"] = to_string(off_variant(a));
    entry["off"] = row(t.off);
    entry["on"] = row(t.on);
    j.push_back(entry);
  }
  if (!json_out.empty()) write_json(json_out, j);
  return kExitOk;
}

int cmd_jacobian_check(const Common& c, int triples, double tolerance) {
  JacobianCheckConfig cfg;
  cfg.triples = triples;
  cfg.tolerance = tolerance;
  const RunConfig rc = c.load();
  cfg.intrinsics = rc.intrinsics;
  cfg.rng_seed = rc.rng_seed;
  const auto rep = jacobian_check(cfg);
  std::cout << "checked " << rep.checked << " (triple, level) pairs, skipped " << rep.skipped
            << ", max relative error " << rep.max_relative_error << ", failures " << rep.failures << "\n";
  return rep.passed() ? kExitOk : kExitThreshold;
}

int cmd_calibrate(const Common& c, int frames, double deviation) {
  const RunConfig rc = c.load();
  const double lambda = calibrate_lambda_motion(sequence_config(rc), frames, deviation);
  std::printf("lambda_motion %.6g\n", lambda);
  return kExitOk;
}

int cmd_write_config(const Common& c, const std::string& out) {
  write_json(out, to_json(c.load()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Render-and-compare UAV localization on synthetic terrain"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the engine rng_seed (not the scene seed)")->capture_default_str();
  app.add_option("-c,--config", common.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);

  std::string out, gt, results, targets, mode, metrics_out, pattern, plot, json_out, axis = "all", intrinsics_out,
      dump_dir, make_targets;
  int frames = 0, trials = 0, triples = 1000, calib_frames = 8;
  double min_recall = -1.0, min_completeness = -1.0, tolerance = 1e-4, deviation = 2.0, min_recall5 = -1.0;
  bool quiet = false;

  auto* gen_scene = app.add_subcommand("gen-scene", "Describe the procedural scene");
  gen_scene->add_option("-o,--out", out, "Scene description (JSON); '-' for stdout");
  gen_scene->add_option("--intrinsics", intrinsics_out, "Also write the camera intrinsics block here");
  gen_scene->add_option("--dump", dump_dir, "Dump a debug render of frame 0 as float images");

  auto* gen_traj = app.add_subcommand("gen-traj", "Write a ground-truth trajectory");
  gen_traj->add_option("-p,--pattern", pattern, "line | orbit | barrel-roll");
  gen_traj->add_option("-n,--frames", frames, "Number of frames");
  gen_traj->add_option("-o,--out", out, "Ground-truth CSV; '-' for stdout");

  auto* run = app.add_subcommand("run", "Localize a sequence");
  run->add_option("--gt", gt, "Ground-truth CSV (default: generate from the config)");
  run->add_option("-o,--out", out, "Result trajectory CSV; '-' for stdout");
  run->add_option("--mode", mode, "dual | sequential")->check(CLI::IsMember({"dual", "sequential"}));
  run->add_option("--metrics", metrics_out, "Also write metrics JSON");
  run->add_flag("-q,--quiet", quiet, "No per-frame progress");

  auto* target = app.add_subcommand("target", "Geolocate annotated pixels");
  target->add_option("--results", results, "Result trajectory CSV");
  target->add_option("--targets", targets, "Target annotations");
  target->add_option("--gt", gt, "Ground-truth CSV (with --make-targets)");
  target->add_option("--make-targets", make_targets, "Write grid annotations from --gt to this file");
  target->add_option("-o,--out", out, "Per-target observations CSV");
  target->add_option("--report", json_out, "Recall@k JSON");
  target->add_option("--min-recall5", min_recall5, "Exit 3 if Recall@5m is below this percentage");

  auto* eval = app.add_subcommand("eval", "Metrics of a result trajectory");
  eval->add_option("--results", results, "Result trajectory CSV")->required();
  eval->add_option("--gt", gt, "Ground-truth CSV")->required();
  eval->add_option("--plot", plot, "Per-frame error plot (SVG)");
  eval->add_option("--json", json_out, "Metrics JSON");
  eval->add_option("--min-recall", min_recall, "Exit 3 if recall at the first threshold is below this percentage");
  eval->add_option("--min-completeness", min_completeness, "Exit 3 if completeness is below this percentage");

  auto* ablate = app.add_subcommand("ablate", "Component ablation table");
  ablate->add_option("--axis", axis, "rotation_aware | motion_reg | multi_hypothesis | all")
      ->check(CLI::IsMember({"rotation_aware", "motion_reg", "multi_hypothesis", "all"}));
  ablate->add_option("--trials", trials, "Trials per cell (default from config)");
  ablate->add_option("--json", json_out, "Table JSON");

  auto* jcheck = app.add_subcommand("jacobian-check", "Analytic vs finite-difference residual Jacobians");
  jcheck->add_option("--triples", triples, "Random (scene, pose, anchor) triples")->capture_default_str();
  jcheck->add_option("--tolerance", tolerance, "Relative error bound")->capture_default_str();

  auto* calibrate = app.add_subcommand("calibrate", "Estimate lambda_motion from the first frames");
  calibrate->add_option("--frames", calib_frames, "Calibration frames")->capture_default_str();
  calibrate->add_option("--deviation", deviation, "Expected inter-frame deviation (m)")->capture_default_str();

  auto* write_config = app.add_subcommand("write-config", "Write the effective configuration as JSON");
  write_config->add_option("-o,--out", out, "Output path; '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) common.seed = seed;

  try {
    if (*gen_scene) return cmd_gen_scene(common, out, intrinsics_out, dump_dir);
    if (*gen_traj) return cmd_gen_traj(common, pattern, frames, out);
    if (*run) return cmd_run(common, gt, out, mode, metrics_out, quiet);
    if (*target) return cmd_target(common, results, targets, gt, make_targets, out, json_out, min_recall5);
    if (*eval) return cmd_eval(common, results, gt, plot, json_out, min_recall, min_completeness);
    if (*ablate) return cmd_ablate(common, axis, trials, json_out);
    if (*jcheck) return cmd_jacobian_check(common, triples, tolerance);
    if (*calibrate) return cmd_calibrate(common, calib_frames, deviation);
    if (*write_config) return cmd_write_config(common, out);
  } catch (const pilot::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

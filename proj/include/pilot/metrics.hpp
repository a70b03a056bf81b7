#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pilot/engine.hpp"
#include "pilot/error.hpp"
#include "pilot/se3.hpp"
#include "pilot/target_geoloc.hpp"

namespace pilot {

struct PoseError {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

inline PoseError pose_error(const Pose& est, const Pose& gt) {
  return {(est.translation() - gt.translation()).norm(),
          rotation_angle(gt.rotation().transpose() * est.rotation()) * kRadToDeg};
}

/// (metres, degrees) pair; a frame counts when both errors are within it.
using Threshold = std::pair<double, double>;

inline std::vector<Threshold> default_thresholds() { return {{1.0, 1.0}, {3.0, 3.0}, {5.0, 5.0}}; }

inline std::string threshold_key(const Threshold& t) {
  auto fmt = [](double x) {
    std::string s = std::to_string(x);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  return fmt(t.first) + "m_" + fmt(t.second) + "deg";
}

struct FrameError {
  int frame_index = 0;
  bool localized = false;
  double translation_m = 0.0;
  double rotation_deg = 0.0;

  bool operator==(const FrameError&) const = default;
};

struct MetricsReport {
  double median_translation_err = 0.0;
  double median_rotation_err = 0.0;
  std::map<Threshold, double> recall;  // percent
  double completeness = 0.0;           // percent
  double mean_fps = 0.0;
  std::vector<FrameError> per_frame;

  bool operator==(const MetricsReport&) const = default;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/**
 * Medians over localized frames, recall over all frames (failed frames are
 * misses), completeness = localized / total. FPS = 1000 / mean latency_ms.
 */
inline MetricsReport compute_metrics(const std::vector<FrameResult>& results, const std::vector<Pose>& gt,
                                     const std::vector<Threshold>& thresholds = default_thresholds()) {
  if (results.size() != gt.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(results.size()) + " results vs " +
                                               std::to_string(gt.size()) + " ground-truth poses");
  }
  MetricsReport m;
  std::vector<double> te, re;
  double latency = 0.0;
  for (size_t i = 0; i < results.size(); ++i) {
    const FrameResult& r = results[i];
    FrameError fe{r.frame_index, r.localized() && r.estimated_pose.has_value(), 0.0, 0.0};
    if (fe.localized) {
      const PoseError e = pose_error(*r.estimated_pose, gt[i]);
      fe.translation_m = e.translation_m;
      fe.rotation_deg = e.rotation_deg;
      te.push_back(e.translation_m);
      re.push_back(e.rotation_deg);
    }
    latency += r.latency_ms;
    m.per_frame.push_back(fe);
  }
  const double n = static_cast<double>(results.size());
  m.median_translation_err = detail::median(te);
  m.median_rotation_err = detail::median(re);
  m.completeness = n > 0 ? 100.0 * static_cast<double>(te.size()) / n : 0.0;
  for (const auto& t : thresholds) {
    int hits = 0;
    for (const auto& fe : m.per_frame)
      if (fe.localized && fe.translation_m <= t.first && fe.rotation_deg <= t.second) ++hits;
    m.recall[t] = n > 0 ? 100.0 * hits / n : 0.0;
  }
  m.mean_fps = latency > 0.0 ? 1000.0 * n / latency : 0.0;
  return m;
}

struct TargetReport {
  std::map<double, double> recall_at;  // k metres -> percent
  std::vector<double> errors;          // per target, +inf for misses

  bool operator==(const TargetReport&) const = default;
};

/// Recall@k: share of annotated targets whose estimate lies within k metres of the truth.
inline TargetReport target_report(const std::vector<TargetObservation>& obs,
                                  const std::vector<TargetAnnotation>& targets,
                                  const std::vector<double>& ks = {1.0, 3.0, 5.0}) {
  if (obs.size() != targets.size()) throw Error(ErrorCode::LengthMismatch, "observations vs annotations");
  TargetReport r;
  size_t counted = 0;
  for (size_t i = 0; i < obs.size(); ++i) {
    if (!targets[i].ground_truth) continue;
    ++counted;
    r.errors.push_back(obs[i].hit() ? (obs[i].world_estimate - *targets[i].ground_truth).norm()
                                    : std::numeric_limits<double>::infinity());
  }
  for (double k : ks) {
    const auto hits = std::count_if(r.errors.begin(), r.errors.end(), [&](double e) { return e <= k; });
    r.recall_at[k] = counted ? 100.0 * static_cast<double>(hits) / static_cast<double>(counted) : 0.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON. Non-finite numbers are written as strings so the round trip is exact.

namespace detail {

inline nlohmann::json number_to_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const MetricsReport& m) {
  using detail::number_to_json;
  nlohmann::json j;
  j["median_translation_err_m"] = number_to_json(m.median_translation_err);
  j["median_rotation_err_deg"] = number_to_json(m.median_rotation_err);
  j["completeness_pct"] = m.completeness;
  j["mean_fps"] = m.mean_fps;
  nlohmann::json recall = nlohmann::json::array();
  for (const auto& [t, v] : m.recall) recall.push_back({{"m", t.first}, {"deg", t.second}, {"pct", v}});
  j["recall"] = recall;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : m.per_frame)
    frames.push_back({{"frame", f.frame_index}, {"localized", f.localized}, {"t_m", f.translation_m},
                      {"r_deg", f.rotation_deg}});
  j["per_frame"] = frames;
  return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  try {
    MetricsReport m;
    m.median_translation_err = detail::number_from_json(j.at("median_translation_err_m"));
    m.median_rotation_err = detail::number_from_json(j.at("median_rotation_err_deg"));
    m.completeness = j.at("completeness_pct").get<double>();
    m.mean_fps = j.at("mean_fps").get<double>();
    for (const auto& r : j.at("recall")) m.recall[{r.at("m").get<double>(), r.at("deg").get<double>()}] = r.at("pct");
    for (const auto& f : j.at("per_frame"))
      m.per_frame.push_back({f.at("frame").get<int>(), f.at("localized").get<bool>(), f.at("t_m").get<double>(),
                             f.at("r_deg").get<double>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline nlohmann::json to_json(const TargetReport& r) {
  nlohmann::json j;
  nlohmann::json recall = nlohmann::json::array();
  for (const auto& [k, v] : r.recall_at) recall.push_back({{"k_m", k}, {"pct", v}});
  j["recall"] = recall;
  nlohmann::json errors = nlohmann::json::array();
  for (double e : r.errors) errors.push_back(detail::number_to_json(e));
  j["errors_m"] = errors;
  return j;
}

inline TargetReport target_report_from_json(const nlohmann::json& j) {
  try {
    TargetReport r;
    for (const auto& x : j.at("recall")) r.recall_at[x.at("k_m").get<double>()] = x.at("pct").get<double>();
    for (const auto& e : j.at("errors_m")) r.errors.push_back(detail::number_from_json(e));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace pilot

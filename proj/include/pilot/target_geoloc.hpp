#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "pilot/camera.hpp"
#include "pilot/engine.hpp"
#include "pilot/error.hpp"
#include "pilot/se3.hpp"
#include "pilot/synthetic_world.hpp"

namespace pilot {

enum class TargetStatus { Hit, Miss };

struct TargetObservation {
  int frame_index = 0;
  PixelPoint pixel;
  Vec3 world_estimate = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  TargetStatus status = TargetStatus::Miss;

  bool hit() const { return status == TargetStatus::Hit; }
};

/// One annotated pixel, optionally with its true world position.
struct TargetAnnotation {
  int frame_index = 0;
  PixelPoint pixel;
  std::optional<Vec3> ground_truth;
};

/// Casts the ray through pixel p from the camera at `pose` into the scene.
inline TargetObservation pixel_to_world(const Pose& pose, const Intrinsics& k, const PixelPoint& p,
                                        const Scene& scene, int frame_index = 0) {
  TargetObservation obs;
  obs.frame_index = frame_index;
  obs.pixel = p;
  if (!(p.u >= 0.0 && p.v >= 0.0 && p.u <= k.width - 1 && p.v <= k.height - 1)) return obs;
  const Vec3 dir = (pose.rotation() * pixel_ray(k, p)).normalized();
  const auto s = scene.intersect(pose.translation(), dir);
  if (!s) return obs;
  obs.world_estimate = pose.translation() + *s * dir;
  obs.status = TargetStatus::Hit;
  return obs;
}

/// Geolocates each annotation from its frame's estimate; failed frames give misses.
inline std::vector<TargetObservation> track_targets(const std::vector<FrameResult>& results,
                                                    const std::vector<TargetAnnotation>& targets,
                                                    const Scene& scene, const Intrinsics& k) {
  std::unordered_map<int, const FrameResult*> by_frame;
  for (const auto& r : results) by_frame[r.frame_index] = &r;
  std::vector<TargetObservation> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    const auto it = by_frame.find(t.frame_index);
    if (it == by_frame.end()) {
      throw Error(ErrorCode::UnknownFrame, "no result for frame " + std::to_string(t.frame_index));
    }
    const FrameResult& r = *it->second;
    if (!r.localized() || !r.estimated_pose) {
      TargetObservation miss;
      miss.frame_index = t.frame_index;
      miss.pixel = t.pixel;
      out.push_back(miss);
      continue;
    }
    out.push_back(pixel_to_world(*r.estimated_pose, k, t.pixel, scene, t.frame_index));
  }
  return out;
}

/**
 * Annotations for a ground-truth trajectory: `per_frame` pixels per frame on
 * a fixed grid inside the image, each carrying its exact world point. Pixels
 * whose ray misses the terrain are skipped.
 */
inline std::vector<TargetAnnotation> make_grid_targets(const std::vector<Pose>& trajectory, const Intrinsics& k,
                                                       const Scene& scene, int stride = 1, int per_axis = 3) {
  std::vector<TargetAnnotation> out;
  for (size_t i = 0; i < trajectory.size(); i += static_cast<size_t>(std::max(1, stride))) {
    for (int a = 0; a < per_axis; ++a) {
      for (int b = 0; b < per_axis; ++b) {
        const PixelPoint p{(a + 1.0) * (k.width - 1) / (per_axis + 1.0), (b + 1.0) * (k.height - 1) / (per_axis + 1.0)};
        const TargetObservation o = pixel_to_world(trajectory[i], k, p, scene, static_cast<int>(i));
        if (o.hit()) out.push_back({static_cast<int>(i), p, o.world_estimate});
      }
    }
  }
  return out;
}

}  // namespace pilot

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pilot/camera.hpp"
#include "pilot/feature_pyramid.hpp"
#include "pilot/se3.hpp"
#include "pilot/synthetic_world.hpp"

namespace pilot {

/// World landmark with its reference feature and weight cached for every level.
template <int C>
struct Anchor {
  Vec3 world_point;
  PixelPoint source_pixel;  // fine-level pixel in the reference view
  std::array<Eigen::Matrix<double, C, 1>, kNumLevels> ref_feature;
  std::array<double, kNumLevels> ref_weight{};
};

/**
 * Everything one localization cycle needs from the render side: the
 * reference pyramid, the pose it was rendered from, and the geo-anchors.
 * `source_frame` is the newest frame whose estimate went into the
 * prediction (-1 for the initial prior).
 */
template <int C>
struct ReferenceBundle {
  FeaturePyramid<C> reference_pyramid;
  Pose predicted_pose;
  Intrinsics intrinsics;
  std::vector<Anchor<C>> anchors;
  int frame_index = 0;
  int source_frame = -1;
  bool fallback = false;
};

template <int C>
std::vector<Anchor<C>> make_anchors(const std::vector<GeoAnchorSample>& samples, const FeaturePyramid<C>& pyramid) {
  std::vector<Anchor<C>> anchors;
  anchors.reserve(samples.size());
  for (const auto& s : samples) {
    Anchor<C> a;
    a.world_point = s.world_point;
    a.source_pixel = s.ref_pixel;
    for (int l = 0; l < kNumLevels; ++l) {
      const PixelPoint p = scale_pixel(s.ref_pixel, l);
      a.ref_feature[l] = sample(pyramid.features[l], p).value;
      a.ref_weight[l] = sample_scalar(pyramid.uncertainty[l], p);
    }
    anchors.push_back(a);
  }
  return anchors;
}

/// Render -> pyramid -> anchors -> cached per-level reference features.
inline ReferenceBundle<kAppearanceChannels> make_bundle(const Scene& scene, const Pose& predicted_pose,
                                                        const Intrinsics& k, size_t n_anchors,
                                                        std::uint64_t rng_seed, int frame_index = 0,
                                                        int source_frame = -1, unsigned workers = 1) {
  const RenderedView view = render(scene, predicted_pose, k, workers);
  ReferenceBundle<kAppearanceChannels> b;
  b.reference_pyramid = build_pyramid(view);
  b.predicted_pose = predicted_pose;
  b.intrinsics = k;
  b.anchors = make_anchors(sample_geo_anchors(view, n_anchors, rng_seed), b.reference_pyramid);
  b.frame_index = frame_index;
  b.source_frame = source_frame;
  return b;
}

}  // namespace pilot

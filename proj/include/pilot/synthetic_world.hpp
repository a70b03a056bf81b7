#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "pilot/camera.hpp"
#include "pilot/error.hpp"
#include "pilot/image.hpp"
#include "pilot/parallel.hpp"
#include "pilot/se3.hpp"

namespace pilot {

inline constexpr int kAppearanceChannels = 4;
using AppearanceImage = Image<kAppearanceChannels>;
using Appearance = AppearanceImage::Pixel;

/// One planar sinusoid a * sin(kx x + ky y + phase).
struct Wave {
  double amplitude = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;

  double value(double x, double y) const { return amplitude * std::sin(kx * x + ky * y + phase); }
};

struct SceneSpec {
  std::uint64_t seed = 1;
  double extent = 4000.0;   // meters per side, domain centered on the origin
  double roughness = 1.0;   // scales every terrain amplitude
};

/// Fixed spectral layout of the procedural world; only orientations and phases are seeded.
struct SceneLayout {
  static constexpr std::array<double, 8> kTerrainWavelength = {900, 600, 400, 260, 170, 110, 70, 45};
  static constexpr std::array<double, 8> kTerrainAmplitude = {18, 12, 8, 5, 3.5, 2.5, 1.5, 1.0};
  static constexpr std::array<double, 3> kTextureWavelength = {48, 38, 30};
  static constexpr std::array<double, 3> kTextureAmplitude = {0.15, 0.15, 0.15};
};

/**
 * Deterministic geo-referenced world: a sum-of-sinusoids heightfield and a
 * four-channel appearance field draped over it. Channels 0-2 are independent
 * texture mixtures; channel 3 follows the terrain height plus a weak texture.
 * Immutable after construction.
 */
class Scene {
 public:
  Scene() = default;

  explicit Scene(const SceneSpec& spec) : spec_(spec) {
    if (!(spec.extent > 0.0)) throw Error(ErrorCode::BadDimensions, "scene extent must be positive");
    std::mt19937_64 rng(derive_seed(spec.seed, 0x5ce9e));
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);

    auto make_wave = [&](double amplitude, double wavelength) {
      const double theta = angle(rng);
      const double k = 2.0 * kPi / wavelength;
      return Wave{amplitude, k * std::cos(theta), k * std::sin(theta), angle(rng)};
    };

    for (size_t i = 0; i < SceneLayout::kTerrainWavelength.size(); ++i) {
      terrain_.push_back(make_wave(spec.roughness * SceneLayout::kTerrainAmplitude[i],
                                   SceneLayout::kTerrainWavelength[i]));
    }
    for (const auto& w : terrain_) {
      height_bound_ += std::abs(w.amplitude);
      slope_bound_ += std::abs(w.amplitude) * std::hypot(w.kx, w.ky);
    }
    for (int c = 0; c < kAppearanceChannels; ++c) {
      // The height-correlated channel keeps a weaker texture so it stays in [0, 1].
      const double texture_gain = (c == kAppearanceChannels - 1) ? 0.25 : 1.0;
      for (size_t i = 0; i < SceneLayout::kTextureWavelength.size(); ++i) {
        texture_[c].push_back(
            make_wave(texture_gain * SceneLayout::kTextureAmplitude[i], SceneLayout::kTextureWavelength[i]));
      }
    }
  }

  const SceneSpec& spec() const { return spec_; }
  const std::vector<Wave>& terrain_waves() const { return terrain_; }
  const std::vector<Wave>& texture_waves(int channel) const { return texture_[channel]; }

  /// Sum of terrain amplitudes: |height| never exceeds it.
  double height_bound() const { return height_bound_; }
  /// Upper bound on |grad height|.
  double slope_bound() const { return slope_bound_; }

  double half_extent() const { return 0.5 * spec_.extent; }
  bool inside(double x, double y) const {
    return std::abs(x) <= half_extent() && std::abs(y) <= half_extent();
  }

  double height(double x, double y) const {
    double h = 0.0;
    for (const auto& w : terrain_) h += w.value(x, y);
    return h;
  }

  Eigen::Vector2d height_gradient(double x, double y) const {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (const auto& w : terrain_) {
      const double c = w.amplitude * std::cos(w.kx * x + w.ky * y + w.phase);
      g += c * Eigen::Vector2d(w.kx, w.ky);
    }
    return g;
  }

  Appearance appearance(double x, double y) const {
    Appearance a;
    for (int c = 0; c < kAppearanceChannels; ++c) {
      double v = 0.5;
      for (const auto& w : texture_[c]) v += w.value(x, y);
      a[c] = v;
    }
    if (height_bound_ > 0.0) {
      a[kAppearanceChannels - 1] += 0.3 * height(x, y) / height_bound_;
    }
    return a;
  }

  /**
   * Distance along a unit ray to the first terrain crossing, or nullopt on a
   * miss (ray leaves the square domain or climbs above the terrain bound).
   * Marches with steps of max(1 m, Lipschitz-safe distance), then bisects the
   * bracketing interval below 1e-5 m.
   */
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const {
    const double hmax = height_bound_;
    const double horizontal = std::hypot(dir.x(), dir.y());
    const double lipschitz = std::abs(dir.z()) + slope_bound_ * horizontal;

    double s_begin = 0.0;
    double s_end = std::numeric_limits<double>::infinity();
    // Clip against the square domain.
    for (int axis = 0; axis < 2; ++axis) {
      const double o = origin[axis];
      const double d = dir[axis];
      if (std::abs(d) < 1e-15) {
        if (std::abs(o) > half_extent()) return std::nullopt;
        continue;
      }
      double t0 = (-half_extent() - o) / d;
      double t1 = (half_extent() - o) / d;
      if (t0 > t1) std::swap(t0, t1);
      s_begin = std::max(s_begin, t0);
      s_end = std::min(s_end, t1);
    }
    // Clip against the slab |z| <= hmax (slightly padded).
    const double zpad = hmax + 1e-6;
    if (std::abs(dir.z()) < 1e-15) {
      if (std::abs(origin.z()) > zpad) return std::nullopt;
    } else {
      double t0 = (zpad - origin.z()) / dir.z();
      double t1 = (-zpad - origin.z()) / dir.z();
      if (t0 > t1) std::swap(t0, t1);
      s_begin = std::max(s_begin, t0);
      s_end = std::min(s_end, t1);
    }
    if (s_begin > s_end) return std::nullopt;

    auto gap = [&](double s) {
      const Vec3 p = origin + s * dir;
      return p.z() - height(p.x(), p.y());
    };

    double s_prev = s_begin;
    double f_prev = gap(s_prev);
    if (f_prev <= 0.0) return s_prev;
    while (s_prev < s_end) {
      const double step = lipschitz > 0.0 ? std::max(1.0, f_prev / lipschitz) : 1.0;
      double s = std::min(s_prev + step, s_end);
      const double f = gap(s);
      if (f <= 0.0) {
        double lo = s_prev, hi = s;
        while (hi - lo > 1e-5) {
          const double mid = 0.5 * (lo + hi);
          if (gap(mid) > 0.0) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
      }
      if (s >= s_end) break;
      s_prev = s;
      f_prev = f;
    }
    return std::nullopt;
  }

 private:
  SceneSpec spec_;
  std::vector<Wave> terrain_;
  std::array<std::vector<Wave>, kAppearanceChannels> texture_;
  double height_bound_ = 0.0;
  double slope_bound_ = 0.0;
};

inline Scene build_scene(std::uint64_t seed, double extent, double roughness) {
  return Scene(SceneSpec{seed, extent, roughness});
}

/// First terrain hit of a ray; throws NoIntersection on a miss.
inline Vec3 raycast(const Scene& scene, const Vec3& origin, const Vec3& direction) {
  const double n = direction.norm();
  if (std::abs(n - 1.0) > 1e-9) {
    throw Error(ErrorCode::BadDimensions, "raycast direction must be unit length");
  }
  const auto s = scene.intersect(origin, direction);
  if (!s) throw Error(ErrorCode::NoIntersection, "ray misses the terrain");
  return origin + *s * direction;
}

/// Photometric perturbation applied to query renders only.
struct Degradation {
  bool enabled = false;
  std::array<double, kAppearanceChannels> gain = {1.0, 1.0, 1.0, 1.0};
  std::array<double, kAppearanceChannels> bias = {0.0, 0.0, 0.0, 0.0};
  double noise_sigma = 0.0;
};

struct RenderedView {
  AppearanceImage appearance;
  DepthMap depth;
  Pose pose;
  Intrinsics intrinsics;
  bool degraded = false;
};

inline void check_above_terrain(const Scene& scene, const Pose& pose) {
  const Vec3& c = pose.translation();
  if (c.z() <= scene.height(c.x(), c.y())) {
    throw Error(ErrorCode::CameraUnderground, "camera center lies below the terrain");
  }
}

/// Ray-traced depth and appearance at every pixel center.
inline RenderedView render(const Scene& scene, const Pose& pose, const Intrinsics& k, unsigned workers = 1) {
  k.validate();
  check_above_terrain(scene, pose);
  RenderedView view{AppearanceImage(k.width, k.height, 0.0), DepthMap(k.width, k.height), pose, k, false};
  const Mat3& r = pose.rotation();
  const Vec3& origin = pose.translation();
  parallel_for(
      static_cast<size_t>(k.height),
      [&](size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < k.width; ++x) {
          const Vec3 ray_cam = pixel_ray(k, {static_cast<double>(x), static_cast<double>(y)});
          const double ray_len = ray_cam.norm();
          const Vec3 dir = r * (ray_cam / ray_len);
          const auto s = scene.intersect(origin, dir);
          if (!s) continue;
          const Vec3 hit = origin + *s * dir;
          const size_t idx = view.depth.index(x, y);
          view.depth.depth[idx] = *s / ray_len;
          view.depth.valid[idx] = 1;
          view.appearance.set_pixel(x, y, scene.appearance(hit.x(), hit.y()));
        }
      },
      workers);
  return view;
}

/// Gain, bias and seeded Gaussian noise, clamped to [0, 1]. Invalid pixels are left untouched.
inline void apply_degradation(RenderedView& view, const Degradation& d, std::uint64_t seed) {
  if (!d.enabled) return;
  std::mt19937_64 rng(derive_seed(seed, 0xde9));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int y = 0; y < view.appearance.height(); ++y) {
    for (int x = 0; x < view.appearance.width(); ++x) {
      const bool valid = view.depth.is_valid(x, y);
      for (int c = 0; c < kAppearanceChannels; ++c) {
        const double n = d.noise_sigma > 0.0 ? d.noise_sigma * noise(rng) : 0.0;
        if (!valid) continue;
        double& v = view.appearance.at(x, y, c);
        v = std::clamp(d.gain[c] * v + d.bias[c] + n, 0.0, 1.0);
      }
    }
  }
  view.degraded = true;
}

struct GeoAnchorSample {
  Vec3 world_point;
  PixelPoint ref_pixel;
};

/// Pixels this close to the border never become anchors, so every level's scaled position stays in bounds.
inline constexpr int kAnchorBorder = 2;

/**
 * Draws n depth-valid pixels uniformly without replacement and lifts them to
 * world points: P_w = T (D(p) K^-1 p).
 */
inline std::vector<GeoAnchorSample> sample_geo_anchors(const RenderedView& view, size_t n, std::uint64_t rng_seed) {
  std::vector<int> candidates;
  const auto& d = view.depth;
  for (int y = kAnchorBorder; y < d.height - kAnchorBorder; ++y)
    for (int x = kAnchorBorder; x < d.width - kAnchorBorder; ++x)
      if (d.is_valid(x, y)) candidates.push_back(y * d.width + x);
  if (candidates.size() < n) {
    throw Error(ErrorCode::InsufficientValidPixels,
                std::to_string(candidates.size()) + " valid pixels, " + std::to_string(n) + " requested");
  }
  std::vector<int> chosen;
  chosen.reserve(n);
  std::mt19937_64 rng(derive_seed(rng_seed, 0xa9c));
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen), n, rng);

  std::vector<GeoAnchorSample> anchors;
  anchors.reserve(n);
  for (int idx : chosen) {
    const int x = idx % d.width;
    const int y = idx / d.width;
    const PixelPoint p{static_cast<double>(x), static_cast<double>(y)};
    const Vec3 cam = back_project(view.intrinsics, p, d.at(x, y));
    anchors.push_back({view.pose.apply(cam), p});
  }
  return anchors;
}

}  // namespace pilot

#pragma once

#include <array>
#include <cmath>

#include <Eigen/Core>

#include "pilot/camera.hpp"
#include "pilot/error.hpp"
#include "pilot/image.hpp"
#include "pilot/synthetic_world.hpp"

namespace pilot {

template <int C>
using FeatureMap = Image<C>;
using UncertaintyMap = Image<1>;

/// Levels 0, 1, 2 at 1/4, 1/2 and full resolution. Immutable once built.
template <int C>
struct FeaturePyramid {
  std::array<FeatureMap<C>, kNumLevels> features;
  std::array<UncertaintyMap, kNumLevels> uncertainty;
};

template <int C>
struct FeatureSample {
  Eigen::Matrix<double, C, 1> value;
  Eigen::Matrix<double, C, 2> gradient;  // columns: d/du, d/dv
};

template <int C>
bool in_bounds(const FeatureMap<C>& map, const PixelPoint& p, double margin = 0.0) {
  return p.u >= margin && p.v >= margin && p.u <= map.width() - 1 - margin && p.v <= map.height() - 1 - margin;
}

namespace detail {

// Cell origin for bilinear lookup. On an integer coordinate the lower-index
// cell wins, and the last row/column folds into the cell before it.
inline int cell_index(double x, int size) {
  int i = static_cast<int>(std::floor(x));
  if (static_cast<double>(i) == x && i > 0) --i;
  return std::clamp(i, 0, std::max(0, size - 2));
}

}  // namespace detail

/// Bilinear sample and the exact derivative of the bilinear surface. No bounds check.
template <int C>
FeatureSample<C> sample_unchecked(const FeatureMap<C>& map, const PixelPoint& p) {
  using Vec = Eigen::Matrix<double, C, 1>;
  const int x0 = detail::cell_index(p.u, map.width());
  const int y0 = detail::cell_index(p.v, map.height());
  const int x1 = std::min(x0 + 1, map.width() - 1);
  const int y1 = std::min(y0 + 1, map.height() - 1);
  const double a = p.u - x0;
  const double b = p.v - y0;
  const Eigen::Map<const Vec> f00(map.pixel_ptr(x0, y0));
  const Eigen::Map<const Vec> f10(map.pixel_ptr(x1, y0));
  const Eigen::Map<const Vec> f01(map.pixel_ptr(x0, y1));
  const Eigen::Map<const Vec> f11(map.pixel_ptr(x1, y1));
  FeatureSample<C> s;
  s.value = (1 - a) * (1 - b) * f00 + a * (1 - b) * f10 + (1 - a) * b * f01 + a * b * f11;
  s.gradient.col(0) = (1 - b) * (f10 - f00) + b * (f11 - f01);
  s.gradient.col(1) = (1 - a) * (f01 - f00) + a * (f11 - f10);
  return s;
}

template <int C>
FeatureSample<C> sample(const FeatureMap<C>& map, const PixelPoint& p) {
  if (!in_bounds(map, p)) {
    throw Error(ErrorCode::OutOfBounds, "sample at (" + std::to_string(p.u) + ", " + std::to_string(p.v) + ")");
  }
  return sample_unchecked(map, p);
}

/// Bilinear value of a single-channel map, no gradient.
inline double sample_scalar(const UncertaintyMap& map, const PixelPoint& p) {
  const int x0 = detail::cell_index(p.u, map.width());
  const int y0 = detail::cell_index(p.v, map.height());
  const int x1 = std::min(x0 + 1, map.width() - 1);
  const int y1 = std::min(y0 + 1, map.height() - 1);
  const double a = p.u - x0;
  const double b = p.v - y0;
  return (1 - a) * (1 - b) * map.at(x0, y0) + a * (1 - b) * map.at(x1, y0) + (1 - a) * b * map.at(x0, y1) +
         a * b * map.at(x1, y1);
}

/// Joint uncertainty score of a query/reference pair (product rule).
inline double joint_weight(double wq, double wr) { return wq * wr; }

inline constexpr double kPyramidSigma = 1.0;
inline constexpr int kPyramidRadius = 3;

inline std::array<double, 2 * kPyramidRadius + 1> gaussian_kernel() {
  std::array<double, 2 * kPyramidRadius + 1> k{};
  double sum = 0.0;
  for (int i = -kPyramidRadius; i <= kPyramidRadius; ++i) {
    k[i + kPyramidRadius] = std::exp(-0.5 * i * i / (kPyramidSigma * kPyramidSigma));
    sum += k[i + kPyramidRadius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur (sigma 1 px, radius 3) with replicated borders.
template <int C>
Image<C> gaussian_blur(const Image<C>& in) {
  const auto kernel = gaussian_kernel();
  const int w = in.width(), h = in.height();
  Image<C> tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = -kPyramidRadius; i <= kPyramidRadius; ++i) {
          acc += kernel[i + kPyramidRadius] * in.at(std::clamp(x + i, 0, w - 1), y, c);
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = -kPyramidRadius; i <= kPyramidRadius; ++i) {
          acc += kernel[i + kPyramidRadius] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

/// 2x2 box average; coarse pixel i covers fine pixels 2i and 2i+1.
template <int C>
Image<C> decimate(const Image<C>& in) {
  Image<C> out(in.width() / 2, in.height() / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < C; ++c)
        out.at(x, y, c) = 0.25 * (in.at(2 * x, 2 * y, c) + in.at(2 * x + 1, 2 * y, c) +
                                  in.at(2 * x, 2 * y + 1, c) + in.at(2 * x + 1, 2 * y + 1, c));
  return out;
}

/**
 * Per-pixel confidence 1 / (1 + v), where v is a 3x3 average of the
 * channel-mean squared deviation from the local 3x3 mean.
 */
template <int C>
UncertaintyMap noise_uncertainty(const Image<C>& img) {
  const int w = img.width(), h = img.height();
  Image<1> energy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double e = 0.0;
      for (int c = 0; c < C; ++c) {
        double mean = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) mean += img.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1), c);
        mean /= 9.0;
        const double d = img.at(x, y, c) - mean;
        e += d * d;
      }
      energy.at(x, y) = e / C;
    }
  }
  UncertaintyMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) v += energy.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1));
      out.at(x, y) = 1.0 / (1.0 + v / 9.0);
    }
  }
  return out;
}

template <int C>
FeaturePyramid<C> build_pyramid(const Image<C>& fine, bool estimate_uncertainty) {
  if (fine.width() % 4 != 0 || fine.height() % 4 != 0) {
    throw Error(ErrorCode::BadDimensions, "pyramid input must be divisible by 4");
  }
  FeaturePyramid<C> p;
  p.features[2] = fine;
  p.features[1] = decimate(gaussian_blur(p.features[2]));
  p.features[0] = decimate(gaussian_blur(p.features[1]));
  p.uncertainty[2] = estimate_uncertainty ? noise_uncertainty(fine) : UncertaintyMap(fine.width(), fine.height(), 1.0);
  p.uncertainty[1] = decimate(p.uncertainty[2]);
  p.uncertainty[0] = decimate(p.uncertainty[1]);
  return p;
}

/// Feature pyramid of a rendered view; uncertainty is estimated only for degraded renders.
inline FeaturePyramid<kAppearanceChannels> build_pyramid(const RenderedView& view) {
  return build_pyramid(view.appearance, view.degraded);
}

}  // namespace pilot

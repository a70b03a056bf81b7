#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pilot/error.hpp"

namespace pilot {

/// Row-major image with C interleaved double channels per pixel.
template <int C>
class Image {
 public:
  static_assert(C > 0, "channel count must be positive");
  static constexpr int kChannels = C;
  using Pixel = Eigen::Matrix<double, C, 1>;

  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height * C, fill) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::BadDimensions, "image dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double* pixel_ptr(int x, int y) { return data_.data() + (static_cast<size_t>(y) * width_ + x) * C; }
  const double* pixel_ptr(int x, int y) const {
    return data_.data() + (static_cast<size_t>(y) * width_ + x) * C;
  }

  double& at(int x, int y, int c = 0) { return pixel_ptr(x, y)[c]; }
  double at(int x, int y, int c = 0) const { return pixel_ptr(x, y)[c]; }

  Pixel pixel(int x, int y) const { return Eigen::Map<const Pixel>(pixel_ptr(x, y)); }
  void set_pixel(int x, int y, const Pixel& p) { Eigen::Map<Pixel>(pixel_ptr(x, y)) = p; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel depth along the optical axis; invalid pixels carry depth 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), depth(static_cast<size_t>(w) * h, 0.0), valid(static_cast<size_t>(w) * h, 0) {}

  size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  double at(int x, int y) const { return depth[index(x, y)]; }

  size_t valid_count() const {
    size_t n = 0;
    for (auto v : valid) n += v;
    return n;
  }

  bool operator==(const DepthMap&) const = default;
};

// Debug float-image files: three text lines
//   PILOTFLT
//   <width> <height>
//   <channel name>
// followed by width*height little-endian float32 values, row-major.

inline constexpr const char* kFloatImageMagic = "PILOTFLT";

namespace detail {

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

inline void write_le_float(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  const unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                                  static_cast<unsigned char>((bits >> 8) & 0xff),
                                  static_cast<unsigned char>((bits >> 16) & 0xff),
                                  static_cast<unsigned char>((bits >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

inline float read_le_float(std::istream& is) {
  unsigned char bytes[4];
  is.read(reinterpret_cast<char*>(bytes), 4);
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

struct FloatImage {
  int width = 0;
  int height = 0;
  std::string channel;
  std::vector<float> values;
};

inline void write_float_image(const std::string& path, const FloatImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
  os << kFloatImageMagic << '\n' << img.width << ' ' << img.height << '\n' << img.channel << '\n';
  for (float f : img.values) detail::write_le_float(os, f);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

inline FloatImage read_float_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string magic;
  FloatImage img;
  std::getline(is, magic);
  if (magic != kFloatImageMagic) throw Error(ErrorCode::ParseError, "bad magic in " + path);
  std::string dims;
  std::getline(is, dims);
  if (std::sscanf(dims.c_str(), "%d %d", &img.width, &img.height) != 2 || img.width <= 0 || img.height <= 0) {
    throw Error(ErrorCode::ParseError, "bad dimensions in " + path);
  }
  std::getline(is, img.channel);
  img.values.resize(static_cast<size_t>(img.width) * img.height);
  for (auto& v : img.values) v = detail::read_le_float(is);
  if (!is) throw Error(ErrorCode::ParseError, "truncated data in " + path);
  return img;
}

template <int C>
FloatImage channel_to_float_image(const Image<C>& img, int channel, const std::string& name) {
  FloatImage out{img.width(), img.height(), name, {}};
  out.values.reserve(static_cast<size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.values.push_back(static_cast<float>(img.at(x, y, channel)));
  return out;
}

inline FloatImage depth_to_float_image(const DepthMap& d) {
  FloatImage out{d.width, d.height, "depth", {}};
  out.values.reserve(d.depth.size());
  for (size_t i = 0; i < d.depth.size(); ++i) out.values.push_back(d.valid[i] ? static_cast<float>(d.depth[i]) : 0.0f);
  return out;
}

}  // namespace pilot

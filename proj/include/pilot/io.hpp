#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pilot/camera.hpp"
#include "pilot/engine.hpp"
#include "pilot/error.hpp"
#include "pilot/metrics.hpp"
#include "pilot/se3.hpp"
#include "pilot/target_geoloc.hpp"

namespace pilot {

inline constexpr const char* kResultHeader = "frame_index,status,x,y,z,qw,qx,qy,qz,cost,latency_ms";
inline constexpr const char* kGroundTruthHeader = "frame_index,x,y,z,qw,qx,qy,qz";
inline constexpr const char* kIntrinsicsHeader = "fx,fy,cx,cy,width,height";
inline constexpr const char* kTargetHeader = "# frame_index,u,v[,x,y,z]";

namespace detail {

// Shortest text that parses back to the same double.
inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ParseError, where + ": '" + s + "' is not a number");
}

inline int parse_int(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ParseError, where + ": '" + s + "' is not an integer");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void write_pose_fields(std::ostream& os, const Pose& p) {
  const Vec3 t = p.translation();
  Eigen::Quaterniond q = p.quaternion();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  os << fmt_double(t.x()) << ',' << fmt_double(t.y()) << ',' << fmt_double(t.z()) << ',' << fmt_double(q.w())
     << ',' << fmt_double(q.x()) << ',' << fmt_double(q.y()) << ',' << fmt_double(q.z());
}

inline Pose parse_pose_fields(const std::vector<std::string>& f, size_t at, const std::string& where) {
  double v[7];
  for (int i = 0; i < 7; ++i) v[i] = parse_double(f[at + i], where);
  const Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
  if (std::abs(q.norm() - 1.0) > 1e-6) throw Error(ErrorCode::ParseError, where + ": quaternion is not unit length");
  return Pose::from_quaternion(q.normalized(), Vec3(v[0], v[1], v[2]));
}

template <typename F>
void for_each_line(const std::string& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) f(trim(line), ++n);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory files. Failed frames carry the coasted prediction as their pose.

inline void write_results(std::ostream& os, const std::vector<FrameResult>& results) {
  os << kResultHeader << '\n';
  for (const auto& r : results) {
    os << r.frame_index << ',' << to_string(r.status) << ',';
    detail::write_pose_fields(os, r.estimated_pose ? *r.estimated_pose : r.reported_pose);
    os << ',' << detail::fmt_double(r.photometric_cost) << ',' << detail::fmt_double(r.latency_ms) << '\n';
  }
}

inline void write_results(const std::string& path, const std::vector<FrameResult>& results) {
  auto out = detail::open_out(path);
  write_results(out, results);
}

inline std::vector<FrameResult> read_results(const std::string& path) {
  std::vector<FrameResult> out;
  detail::for_each_line(path, [&](const std::string& line, int n) {
    if (n == 1) {
      if (line != kResultHeader) throw Error(ErrorCode::ParseError, path + ": unexpected header");
      return;
    }
    if (line.empty()) return;
    const std::string where = path + ":" + std::to_string(n);
    const auto f = detail::split_csv(line);
    if (f.size() != 11) throw Error(ErrorCode::ParseError, where + ": expected 11 fields");
    FrameResult r;
    r.frame_index = detail::parse_int(f[0], where);
    if (f[1] == "localized") {
      r.status = FrameStatus::Localized;
    } else if (f[1] == "failed") {
      r.status = FrameStatus::Failed;
    } else {
      throw Error(ErrorCode::ParseError, where + ": unknown status '" + f[1] + "'");
    }
    r.reported_pose = detail::parse_pose_fields(f, 2, where);
    if (r.localized()) r.estimated_pose = r.reported_pose;
    r.photometric_cost = detail::parse_double(f[9], where);
    r.latency_ms = detail::parse_double(f[10], where);
    out.push_back(r);
  });
  return out;
}

inline void write_ground_truth(std::ostream& os, const std::vector<Pose>& poses) {
  os << kGroundTruthHeader << '\n';
  for (size_t i = 0; i < poses.size(); ++i) {
    os << i << ',';
    detail::write_pose_fields(os, poses[i]);
    os << '\n';
  }
}

inline void write_ground_truth(const std::string& path, const std::vector<Pose>& poses) {
  auto out = detail::open_out(path);
  write_ground_truth(out, poses);
}

/// Poses ordered by row; frame indices must run 0, 1, 2, ...
inline std::vector<Pose> read_ground_truth(const std::string& path) {
  std::vector<Pose> out;
  detail::for_each_line(path, [&](const std::string& line, int n) {
    if (n == 1) {
      if (line != kGroundTruthHeader) throw Error(ErrorCode::ParseError, path + ": unexpected header");
      return;
    }
    if (line.empty()) return;
    const std::string where = path + ":" + std::to_string(n);
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw Error(ErrorCode::ParseError, where + ": expected 8 fields");
    if (detail::parse_int(f[0], where) != static_cast<int>(out.size())) {
      throw Error(ErrorCode::ParseError, where + ": frame indices must be consecutive from 0");
    }
    out.push_back(detail::parse_pose_fields(f, 1, where));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Intrinsics block: header line plus one record.

inline void write_intrinsics(std::ostream& os, const Intrinsics& k) {
  using detail::fmt_double;
  os << kIntrinsicsHeader << '\n'
     << fmt_double(k.fx) << ',' << fmt_double(k.fy) << ',' << fmt_double(k.cx) << ',' << fmt_double(k.cy) << ','
     << k.width << ',' << k.height << '\n';
}

inline Intrinsics read_intrinsics(std::istream& is, const std::string& where = "intrinsics") {
  std::string header, record;
  std::getline(is, header);
  std::getline(is, record);
  if (detail::trim(header) != kIntrinsicsHeader) throw Error(ErrorCode::ParseError, where + ": unexpected header");
  const auto f = detail::split_csv(detail::trim(record));
  if (f.size() != 6) throw Error(ErrorCode::ParseError, where + ": expected 6 fields");
  Intrinsics k{detail::parse_double(f[0], where), detail::parse_double(f[1], where),
               detail::parse_double(f[2], where), detail::parse_double(f[3], where),
               detail::parse_int(f[4], where),    detail::parse_int(f[5], where)};
  k.validate();
  return k;
}

// ---------------------------------------------------------------------------
// Target annotations: frame_index,u,v[,x,y,z] with '#' comments.

inline std::vector<TargetAnnotation> read_targets(const std::string& path) {
  std::vector<TargetAnnotation> out;
  detail::for_each_line(path, [&](const std::string& raw, int n) {
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const std::string where = path + ":" + std::to_string(n);
    const auto f = detail::split_csv(line);
    if (f.size() != 3 && f.size() != 6) throw Error(ErrorCode::ParseError, where + ": expected 3 or 6 fields");
    TargetAnnotation t;
    t.frame_index = detail::parse_int(f[0], where);
    t.pixel = {detail::parse_double(f[1], where), detail::parse_double(f[2], where)};
    if (f.size() == 6) {
      t.ground_truth = Vec3(detail::parse_double(f[3], where), detail::parse_double(f[4], where),
                            detail::parse_double(f[5], where));
    }
    out.push_back(t);
  });
  return out;
}

inline void write_targets(const std::string& path, const std::vector<TargetAnnotation>& targets) {
  using detail::fmt_double;
  auto out = detail::open_out(path);
  out << kTargetHeader << '\n';
  for (const auto& t : targets) {
    out << t.frame_index << ',' << fmt_double(t.pixel.u) << ',' << fmt_double(t.pixel.v);
    if (t.ground_truth) {
      out << ',' << fmt_double(t.ground_truth->x()) << ',' << fmt_double(t.ground_truth->y()) << ','
          << fmt_double(t.ground_truth->z());
    }
    out << '\n';
  }
}

inline void write_target_observations(const std::string& path, const std::vector<TargetObservation>& obs) {
  using detail::fmt_double;
  auto out = detail::open_out(path);
  out << "frame_index,u,v,status,x,y,z\n";
  for (const auto& o : obs) {
    out << o.frame_index << ',' << fmt_double(o.pixel.u) << ',' << fmt_double(o.pixel.v) << ','
        << (o.hit() ? "hit" : "miss") << ',' << fmt_double(o.world_estimate.x()) << ','
        << fmt_double(o.world_estimate.y()) << ',' << fmt_double(o.world_estimate.z()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG: per-frame translation and rotation error, one panel each.

inline std::string error_plot_svg(const MetricsReport& m, const std::string& title = "per-frame error") {
  constexpr double kWidth = 800, kPanel = 220, kLeft = 70, kRight = 20, kTop = 40, kGap = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double height = kTop + 2 * kPanel + kGap + 40;
  const size_t n = m.per_frame.size();
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";

  auto panel = [&](double top, const char* label, const char* color, auto value) {
    double vmax = 0.0;
    for (const auto& f : m.per_frame)
      if (f.localized) vmax = std::max(vmax, value(f));
    if (!(vmax > 0.0)) vmax = 1.0;
    const double xmax = n > 1 ? static_cast<double>(n - 1) : 1.0;
    auto px = [&](double i) { return kLeft + plot_w * i / xmax; };
    auto py = [&](double v) { return top + kPanel * (1.0 - v / vmax); };
    os << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << kPanel
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = vmax * t / 4.0;
      os << "<line x1=\"" << kLeft - 4 << "\" x2=\"" << kLeft << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
         << "\" stroke=\"#888\"/>\n<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4
         << "\" text-anchor=\"end\">" << std::setprecision(3) << v << std::setprecision(2) << "</text>\n";
    }
    os << "<text x=\"16\" y=\"" << top + kPanel / 2 << "\" transform=\"rotate(-90 16 " << top + kPanel / 2
       << ")\" text-anchor=\"middle\">" << label << "</text>\n";
    // Consecutive localized frames form one polyline; failures break it and get a red tick.
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (size_t i = 0; i < n; ++i) {
      const auto& f = m.per_frame[i];
      if (!f.localized) {
        flush();
        os << "<line x1=\"" << px(static_cast<double>(i)) << "\" x2=\"" << px(static_cast<double>(i)) << "\" y1=\""
           << top + kPanel - 8 << "\" y2=\"" << top + kPanel << "\" stroke=\"red\"/>\n";
        continue;
      }
      std::ostringstream p;
      p.imbue(std::locale::classic());
      p << std::fixed << std::setprecision(2) << px(static_cast<double>(i)) << ',' << py(value(f)) << ' ';
      pts += p.str();
    }
    flush();
  };
  panel(kTop, "translation error (m)", "#1f77b4", [](const FrameError& f) { return f.translation_m; });
  panel(kTop + kPanel + kGap, "rotation error (deg)", "#d62728", [](const FrameError& f) { return f.rotation_deg; });
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">frame (0 to "
     << (n ? n - 1 : 0) << ")</text>\n</svg>\n";
  return os.str();
}

inline void write_error_plot(const std::string& path, const MetricsReport& m) {
  auto out = detail::open_out(path);
  out << error_plot_svg(m);
}

}  // namespace pilot

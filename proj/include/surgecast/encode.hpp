#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "surgecast/error.hpp"
#include "surgecast/raster.hpp"
#include "surgecast/tensor.hpp"
#include "surgecast/text.hpp"

namespace surgecast {

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;

  void validate() const {
    if (!(lo < hi)) throw Error(ErrorKind::value, "range: lo must be < hi");
  }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

/// Physical-to-unit mapping for each model variable.
struct VariableRanges {
  ValueRange zeta{0.0, 2.5};
  ValueRange windx{-40.0, 20.0};
  ValueRange windy{-30.0, 30.0};
  ValueRange depth{-20.0, 50.0};

  void validate() const {
    zeta.validate();
    windx.validate();
    windy.validate();
    depth.validate();
  }
  friend bool operator==(const VariableRanges&, const VariableRanges&) = default;
};

inline double clamp_scale(double value, const ValueRange& range) {
  if (!std::isfinite(value)) throw Error(ErrorKind::value, "clamp_scale: non-finite input");
  return std::min(1.0, std::max(0.0, (value - range.lo) / (range.hi - range.lo)));
}

/// Maps a unit value back to physical units (no clamping).
inline double unscale(double unit, const ValueRange& range) {
  return range.lo + unit * (range.hi - range.lo);
}

using Rgb = std::array<double, 3>;

struct ControlPoint {
  double t;
  Rgb color;
  friend bool operator==(const ControlPoint&, const ControlPoint&) = default;
};

namespace detail {

inline Rgb sub(const Rgb& a, const Rgb& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline double dot(const Rgb& a, const Rgb& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Rgb cross(const Rgb& a, const Rgb& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Minimum distance between segments [p0, p1] and [q0, q1] in RGB space.
inline double segment_distance(const Rgb& p0, const Rgb& p1, const Rgb& q0, const Rgb& q1) {
  const Rgb d1 = sub(p1, p0), d2 = sub(q1, q0), r = sub(p0, q0);
  const double a = dot(d1, d1), e = dot(d2, d2), f = dot(d2, r);
  const double c = dot(d1, r), b = dot(d1, d2);
  const double denom = a * e - b * b;
  double s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
  double t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  const Rgb gap{r[0] + d1[0] * s - d2[0] * t, r[1] + d1[1] * s - d2[1] * t, r[2] + d1[2] * s - d2[2] * t};
  return std::sqrt(dot(gap, gap));
}

}  // namespace detail

/// Piecewise-linear RGB ramp over [0, 1]. Construction rejects tables whose
/// polyline revisits a color, which keeps decode well defined.
class Colormap {
 public:
  explicit Colormap(std::vector<ControlPoint> points) : points_(std::move(points)) { validate(); }

  static Colormap default_map() {
    return Colormap({{0.00, {0.0, 0.0, 0.5}},
                     {0.25, {0.0, 0.75, 1.0}},
                     {0.50, {0.5, 1.0, 0.5}},
                     {0.75, {1.0, 0.75, 0.0}},
                     {1.00, {0.5, 0.0, 0.0}}});
  }

  /// Text table, one `t r g b` row per line; `#` starts a comment.
  static Colormap load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open colormap: " + path.string());
    std::vector<ControlPoint> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      auto tok = text::split_whitespace(body);
      ControlPoint cp{};
      if (tok.size() != 4 || !text::parse_number(tok[0], cp.t) || !text::parse_number(tok[1], cp.color[0]) ||
          !text::parse_number(tok[2], cp.color[1]) || !text::parse_number(tok[3], cp.color[2])) {
        throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": expected 't r g b'");
      }
      points.push_back(cp);
    }
    return Colormap(std::move(points));
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
    for (const auto& p : points_) {
      out << text::format_double(p.t) << ' ' << text::format_double(p.color[0]) << ' '
          << text::format_double(p.color[1]) << ' ' << text::format_double(p.color[2]) << '\n';
    }
  }

  const std::vector<ControlPoint>& points() const noexcept { return points_; }

  Rgb encode(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorKind::value, "rgb_encode: value outside [0, 1]");
    std::size_t k = 1;
    while (k + 1 < points_.size() && points_[k].t < u) ++k;
    const auto& a = points_[k - 1];
    const auto& b = points_[k];
    if (u == b.t) return b.color;
    const double s = (u - a.t) / (b.t - a.t);
    return {a.color[0] + s * (b.color[0] - a.color[0]), a.color[1] + s * (b.color[1] - a.color[1]),
            a.color[2] + s * (b.color[2] - a.color[2])};
  }

  /// Position of the nearest point on the ramp; ties resolve to smaller t.
  double decode(const Rgb& color) const {
    double best_dist = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    for (std::size_t k = 1; k < points_.size(); ++k) {
      const auto& a = points_[k - 1];
      const auto& b = points_[k];
      const Rgb d = detail::sub(b.color, a.color);
      const double s = std::clamp(detail::dot(detail::sub(color, a.color), d) / detail::dot(d, d), 0.0, 1.0);
      const Rgb q{a.color[0] + s * d[0], a.color[1] + s * d[1], a.color[2] + s * d[2]};
      const Rgb gap = detail::sub(color, q);
      const double dist = detail::dot(gap, gap);
      if (dist < best_dist) {
        best_dist = dist;
        best_t = a.t + s * (b.t - a.t);
      }
    }
    return best_t;
  }

  friend bool operator==(const Colormap&, const Colormap&) = default;

 private:
  void validate() const {
    if (points_.size() < 2) throw Error(ErrorKind::value, "colormap: need at least 2 control points");
    if (points_.front().t != 0.0 || points_.back().t != 1.0) {
      throw Error(ErrorKind::value, "colormap: first t must be 0 and last t must be 1");
    }
    for (std::size_t k = 0; k < points_.size(); ++k) {
      for (double c : points_[k].color) {
        if (!(c >= 0.0 && c <= 1.0)) throw Error(ErrorKind::value, "colormap: color outside [0, 1]");
      }
      if (k > 0 && !(points_[k].t > points_[k - 1].t)) {
        throw Error(ErrorKind::value, "colormap: t must be strictly increasing");
      }
    }
    constexpr double eps = 1e-9;
    const std::size_t segments = points_.size() - 1;
    for (std::size_t i = 0; i < segments; ++i) {
      const Rgb di = detail::sub(points_[i + 1].color, points_[i].color);
      if (std::sqrt(detail::dot(di, di)) <= eps) {
        throw Error(ErrorKind::value, "colormap: zero-length segment " + std::to_string(i));
      }
      if (i + 1 < segments) {
        const Rgb dj = detail::sub(points_[i + 2].color, points_[i + 1].color);
        const Rgb cr = detail::cross(di, dj);
        if (std::sqrt(detail::dot(cr, cr)) <= eps && detail::dot(di, dj) < 0.0) {
          throw Error(ErrorKind::value, "colormap: segment " + std::to_string(i + 1) + " folds back");
        }
      }
      for (std::size_t j = i + 2; j < segments; ++j) {
        const double d = detail::segment_distance(points_[i].color, points_[i + 1].color,
                                                  points_[j].color, points_[j + 1].color);
        if (d <= eps) {
          throw Error(ErrorKind::value, "colormap: segments " + std::to_string(i) + " and " +
                                            std::to_string(j) + " intersect");
        }
      }
    }
  }

  std::vector<ControlPoint> points_;
};

inline Rgb rgb_encode(double u, const Colormap& cmap) { return cmap.encode(u); }
inline double rgb_decode(const Rgb& color, const Colormap& cmap) { return cmap.decode(color); }

/// Six-channel model input: [zeta R, zeta G, zeta B, windx, windy, depth].
using ChannelFrame = Tensor3<float>;

inline constexpr std::size_t kFrameChannels = 6;
inline constexpr std::size_t kRgbChannels = 3;

namespace channel {
inline constexpr std::size_t zeta_r = 0;
inline constexpr std::size_t windx = 3;
inline constexpr std::size_t windy = 4;
inline constexpr std::size_t depth = 5;
}  // namespace channel

inline void check_channel_frame(const ChannelFrame& f) {
  if (f.channels() != kFrameChannels) {
    throw Error(ErrorKind::shape, "channel frame must have 6 channels, got " + shape_string(f));
  }
  for (float v : f.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorKind::value, "channel frame entry outside [0, 1]");
  }
}

inline ChannelFrame assemble_frame(const GridField& zeta, const GridField& windx, const GridField& windy,
                                   const GridField& depth, const VariableRanges& ranges,
                                   const Colormap& cmap) {
  for (const GridField* g : {&windx, &windy, &depth}) {
    if (g->width != zeta.width || g->height != zeta.height) {
      throw Error(ErrorKind::shape, "assemble_frame: grid sizes differ");
    }
  }
  ChannelFrame frame(kFrameChannels, zeta.height, zeta.width);
  const std::size_t plane = frame.plane();
  float* out = frame.data();
  for (std::size_t p = 0; p < plane; ++p) {
    const Rgb rgb = cmap.encode(clamp_scale(zeta.values[p], ranges.zeta));
    out[p] = static_cast<float>(rgb[0]);
    out[plane + p] = static_cast<float>(rgb[1]);
    out[2 * plane + p] = static_cast<float>(rgb[2]);
    out[3 * plane + p] = static_cast<float>(clamp_scale(windx.values[p], ranges.windx));
    out[4 * plane + p] = static_cast<float>(clamp_scale(windy.values[p], ranges.windy));
    out[5 * plane + p] = static_cast<float>(clamp_scale(depth.values[p], ranges.depth));
  }
  return frame;
}

/// Decodes every pixel of a 3-channel RGB grid back to physical zeta.
template <typename T>
std::vector<double> decode_zeta(const Tensor3<T>& rgb, const Colormap& cmap, const ValueRange& range) {
  if (rgb.channels() != kRgbChannels) throw Error(ErrorKind::shape, "decode_zeta: expected 3 channels");
  const std::size_t plane = rgb.plane();
  std::vector<double> out(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    const Rgb c{static_cast<double>(rgb.data()[p]), static_cast<double>(rgb.data()[plane + p]),
                static_cast<double>(rgb.data()[2 * plane + p])};
    out[p] = unscale(cmap.decode(c), range);
  }
  return out;
}

}  // namespace surgecast

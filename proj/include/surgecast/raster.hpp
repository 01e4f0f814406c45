#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "surgecast/error.hpp"
#include "surgecast/ingest.hpp"

namespace surgecast {

/// Rectangular lon/lat region sampled at pixel centers; row 0 is north.
struct Roi {
  double lon_min = 0.0;
  double lon_max = 1.0;
  double lat_min = 0.0;
  double lat_max = 1.0;
  std::size_t width = 256;
  std::size_t height = 256;

  void validate() const {
    if (!(lon_min < lon_max) || !(lat_min < lat_max)) {
      throw Error(ErrorKind::value, "roi: bounds must satisfy min < max");
    }
    if (width < 2 || height < 2) throw Error(ErrorKind::value, "roi: width and height must be >= 2");
  }

  double pixel_lon(std::size_t col) const noexcept {
    return lon_min + (static_cast<double>(col) + 0.5) * (lon_max - lon_min) / static_cast<double>(width);
  }
  double pixel_lat(std::size_t row) const noexcept {
    return lat_max - (static_cast<double>(row) + 0.5) * (lat_max - lat_min) / static_cast<double>(height);
  }

  bool contains(double lon, double lat) const noexcept {
    return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
  }

  friend bool operator==(const Roi&, const Roi&) = default;
};

inline constexpr std::int32_t kMiss = -1;
/// Weights above this (negative) bound count as inside the triangle.
inline constexpr double kInsideTolerance = -1e-12;

/// Barycentric weights of (x, y) with respect to triangle (a, b, c).
inline std::array<double, 3> barycentric(double x, double y, double ax, double ay, double bx,
                                         double by, double cx, double cy) noexcept {
  const double det = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy);
  const double w0 = ((by - cy) * (x - cx) + (cx - bx) * (y - cy)) / det;
  const double w1 = ((cy - ay) * (x - cx) + (ax - cx) * (y - cy)) / det;
  return {w0, w1, 1.0 - w0 - w1};
}

inline bool inside(const std::array<double, 3>& w) noexcept {
  return w[0] >= kInsideTolerance && w[1] >= kInsideTolerance && w[2] >= kInsideTolerance;
}

/// Clamps the tolerated negative weights to zero and renormalizes so that
/// interpolation stays a convex combination.
inline std::array<double, 3> clamp_weights(std::array<double, 3> w) noexcept {
  double sum = 0.0;
  for (auto& v : w) {
    v = std::max(v, 0.0);
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

/// Shared-edge rule: the lowest triangle id wins.
inline std::uint32_t tie_break(std::span<const std::uint32_t> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::value, "tie_break: no candidates");
  return *std::min_element(candidates.begin(), candidates.end());
}

/// Per-pixel covering triangle and barycentric weights of the pixel center.
struct RasterIndex {
  Roi roi;
  std::size_t node_count = 0;
  std::vector<std::int32_t> triangle;            // kMiss when uncovered
  std::vector<Triangle> nodes;                   // covering triangle's node ids
  std::vector<std::array<double, 3>> weights;

  std::size_t width() const noexcept { return roi.width; }
  std::size_t height() const noexcept { return roi.height; }
  std::size_t pixel_count() const noexcept { return triangle.size(); }
  bool covered(std::size_t p) const noexcept { return triangle[p] != kMiss; }
};

/// Classifies every pixel center. Each triangle scans only the pixel centers
/// inside its bounding box, and triangles are visited in ascending id so the
/// first hit is the tie-break winner.
inline RasterIndex build_index(const Mesh& mesh, const Roi& roi) {
  roi.validate();
  RasterIndex index;
  index.roi = roi;
  index.node_count = mesh.node_count();
  const std::size_t pixels = roi.width * roi.height;
  index.triangle.assign(pixels, kMiss);
  index.nodes.assign(pixels, Triangle{0, 0, 0});
  index.weights.assign(pixels, {0.0, 0.0, 0.0});

  const double dx = (roi.lon_max - roi.lon_min) / static_cast<double>(roi.width);
  const double dy = (roi.lat_max - roi.lat_min) / static_cast<double>(roi.height);
  const auto W = static_cast<double>(roi.width);
  const auto H = static_cast<double>(roi.height);

  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    const double ax = mesh.lon[t[0]], ay = mesh.lat[t[0]];
    const double bx = mesh.lon[t[1]], by = mesh.lat[t[1]];
    const double cx = mesh.lon[t[2]], cy = mesh.lat[t[2]];
    const double x_lo = std::min({ax, bx, cx}), x_hi = std::max({ax, bx, cx});
    const double y_lo = std::min({ay, by, cy}), y_hi = std::max({ay, by, cy});

    // Pixel-center coordinates: col index j has lon = lon_min + (j + 0.5) dx.
    // Widen by one pixel on each side; the exact test below decides.
    const double j_lo = std::floor((x_lo - roi.lon_min) / dx - 0.5) - 1.0;
    const double j_hi = std::ceil((x_hi - roi.lon_min) / dx - 0.5) + 1.0;
    const double i_lo = std::floor((roi.lat_max - y_hi) / dy - 0.5) - 1.0;
    const double i_hi = std::ceil((roi.lat_max - y_lo) / dy - 0.5) + 1.0;
    if (j_hi < 0.0 || i_hi < 0.0 || j_lo >= W || i_lo >= H) continue;
    const auto col0 = static_cast<std::size_t>(std::max(j_lo, 0.0));
    const auto col1 = static_cast<std::size_t>(std::min(j_hi, W - 1.0));
    const auto row0 = static_cast<std::size_t>(std::max(i_lo, 0.0));
    const auto row1 = static_cast<std::size_t>(std::min(i_hi, H - 1.0));

    for (std::size_t row = row0; row <= row1; ++row) {
      const double py = roi.pixel_lat(row);
      for (std::size_t col = col0; col <= col1; ++col) {
        const std::size_t p = row * roi.width + col;
        if (index.triangle[p] != kMiss) continue;
        const auto w = barycentric(roi.pixel_lon(col), py, ax, ay, bx, by, cx, cy);
        if (!inside(w)) continue;
        index.triangle[p] = static_cast<std::int32_t>(e);
        index.nodes[p] = t;
        index.weights[p] = clamp_weights(w);
      }
    }
  }
  return index;
}

/// One rasterized scalar field. mask is true for covered, wet pixels.
struct GridField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  GridField() = default;
  GridField(std::size_t w, std::size_t h, double background)
      : width(w), height(h), values(w * h, background), mask(w * h, 0) {}

  double at(std::size_t row, std::size_t col) const noexcept { return values[row * width + col]; }
  bool wet(std::size_t row, std::size_t col) const noexcept { return mask[row * width + col] != 0; }

  friend bool operator==(const GridField&, const GridField&) = default;
};

inline constexpr double kDefaultBackground = 0.0;

/// Barycentric interpolation of per-node values onto the indexed grid.
/// Pixels whose triangle touches a fill-valued node are masked, as are
/// uncovered pixels; both carry `background`.
template <typename V>
GridField rasterize(const RasterIndex& index, std::span<const V> node_values, double fill_value,
                    double background = kDefaultBackground) {
  if (node_values.size() != index.node_count) {
    throw Error(ErrorKind::shape, "rasterize: got " + std::to_string(node_values.size()) +
                                      " node values for a mesh of " +
                                      std::to_string(index.node_count) + " nodes");
  }
  GridField grid(index.width(), index.height(), background);
  for (std::size_t p = 0; p < index.pixel_count(); ++p) {
    if (!index.covered(p)) continue;
    const auto& n = index.nodes[p];
    const double v0 = static_cast<double>(node_values[n[0]]);
    const double v1 = static_cast<double>(node_values[n[1]]);
    const double v2 = static_cast<double>(node_values[n[2]]);
    if (v0 == fill_value || v1 == fill_value || v2 == fill_value) continue;
    const auto& w = index.weights[p];
    grid.values[p] = w[0] * v0 + w[1] * v1 + w[2] * v2;
    grid.mask[p] = 1;
  }
  return grid;
}

template <typename V>
GridField rasterize(const RasterIndex& index, const std::vector<V>& node_values, double fill_value,
                    double background = kDefaultBackground) {
  return rasterize(index, std::span<const V>(node_values), fill_value, background);
}

}  // namespace surgecast

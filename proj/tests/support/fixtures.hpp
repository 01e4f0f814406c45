#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surgecast/clips.hpp"
#include "surgecast/ingest.hpp"
#include "surgecast/random.hpp"
#include "surgecast/raster.hpp"

namespace fixtures {

using namespace surgecast;

/// Perturbed structured grid with random diagonals, plus a few free
/// triangles that may overlap it. At most max_triangles elements.
inline Mesh random_mesh(Rng& rng, std::size_t max_triangles = 50) {
  Mesh m;
  const std::size_t cols = 1 + rng.below(4), rows = 1 + rng.below(4);
  const double x0 = rng.uniform(-0.3, 0.2), y0 = rng.uniform(-0.3, 0.2);
  const double sx = rng.uniform(0.8, 1.4) / cols, sy = rng.uniform(0.8, 1.4) / rows;
  for (std::size_t r = 0; r <= rows; ++r) {
    for (std::size_t c = 0; c <= cols; ++c) {
      const bool interior = r > 0 && c > 0 && r < rows && c < cols;
      const double jx = interior ? rng.uniform(-0.25, 0.25) * sx : 0.0;
      const double jy = interior ? rng.uniform(-0.25, 0.25) * sy : 0.0;
      m.lon.push_back(x0 + c * sx + jx);
      m.lat.push_back(y0 + r * sy + jy);
      m.depth.push_back(rng.uniform(-5.0, 30.0));
    }
  }
  auto id = [&](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * (cols + 1) + c); };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto a = id(r, c), b = id(r, c + 1), d = id(r + 1, c), e = id(r + 1, c + 1);
      if (rng.bernoulli(0.5)) {
        m.triangles.push_back({a, b, e});
        m.triangles.push_back({a, e, d});
      } else {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({b, e, d});
      }
    }
  }
  const std::size_t extra = std::min<std::size_t>(rng.below(4), max_triangles - m.triangles.size());
  for (std::size_t k = 0; k < extra; ++k) {
    const auto base = static_cast<std::uint32_t>(m.lon.size());
    double area2 = 0.0;
    double px[3], py[3];
    do {
      for (int v = 0; v < 3; ++v) {
        px[v] = rng.uniform(-0.2, 1.2);
        py[v] = rng.uniform(-0.2, 1.2);
      }
      area2 = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0]);
    } while (std::abs(area2) < 0.05);
    for (int v = 0; v < 3; ++v) {
      m.lon.push_back(px[v]);
      m.lat.push_back(py[v]);
      m.depth.push_back(rng.uniform(-5.0, 30.0));
    }
    m.triangles.push_back({base, base + 1, base + 2});
  }
  validate_mesh(m);
  return m;
}

inline Tensor3<float> random_tensor(Rng& rng, std::size_t c, std::size_t h, std::size_t w, double lo = 0.0,
                                    double hi = 1.0) {
  Tensor3<float> t(c, h, w);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// Clip with random contents in [0, 1].
inline Clip random_clip(Rng& rng, std::size_t h, std::size_t w, const std::string& id = "storm_000_0000") {
  Clip c;
  c.id = id;
  c.storm_id = "storm_000";
  c.region_id = "test";
  for (std::size_t k = 0; k < kContextFrames; ++k) c.context.push_back(random_tensor(rng, kFrameChannels, h, w));
  for (std::size_t k = 0; k < kTargetFrames; ++k) {
    c.target.push_back(random_tensor(rng, kRgbChannels, h, w));
    c.future_wind.push_back(random_tensor(rng, 2, h, w));
  }
  c.bathymetry = random_tensor(rng, 1, h, w);
  return c;
}

/// Fresh scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("surgecast_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "surgecast/clips.hpp"
#include "surgecast/ingest.hpp"
#include "surgecast/pipeline.hpp"
#include "surgecast/random.hpp"
#include "surgecast/raster.hpp"

// Synthetic storms for tests and demos: a Gaussian surge bump translating
// across a structured triangular mesh, a wind field made of the translation
// drift plus a cyclonic vortex around the bump, and a fixed depth ramp with a
// dry strip along the western edge.

namespace surgecast::synthetic {

struct Config {
  Roi roi{-95.0, -94.0, 29.0, 30.0, 32, 32};
  std::size_t mesh_nx = 41;  // nodes per side, covering the ROI plus a margin
  std::size_t mesh_ny = 41;
  double margin = 0.05;  // degrees beyond the ROI on each side
  double land_fraction = 0.12;
  double depth_min = -5.0;  // at the western (land) edge
  double depth_max = 45.0;
  std::size_t frames = 60;
  double time_step = 3600.0;
  double peak_min = 22.0;  // frame range for the surge maximum
  double peak_max = 38.0;
  double amp_min = 1.2, amp_max = 2.3;        // m
  double sigma_min = 0.10, sigma_max = 0.16;  // degrees
  double speed_min = 0.012, speed_max = 0.022;  // degrees per frame
  double envelope_min = 9.0, envelope_max = 14.0;  // frames
  double drift_gain = 250.0;  // m/s of wind per degree/frame of motion
  double vortex_max = 14.0;   // m/s at full amplitude
  std::string region_id = "synthetic";
};

/// Structured mesh with alternating diagonals; depth ramps west to east.
inline Mesh make_mesh(const Config& cfg) {
  Mesh m;
  m.title = "synthetic ramp mesh";
  const double lon0 = cfg.roi.lon_min - cfg.margin, lon1 = cfg.roi.lon_max + cfg.margin;
  const double lat0 = cfg.roi.lat_min - cfg.margin, lat1 = cfg.roi.lat_max + cfg.margin;
  for (std::size_t r = 0; r < cfg.mesh_ny; ++r) {
    for (std::size_t c = 0; c < cfg.mesh_nx; ++c) {
      const double fx = static_cast<double>(c) / static_cast<double>(cfg.mesh_nx - 1);
      const double fy = static_cast<double>(r) / static_cast<double>(cfg.mesh_ny - 1);
      m.lon.push_back(lon0 + fx * (lon1 - lon0));
      m.lat.push_back(lat0 + fy * (lat1 - lat0));
      m.depth.push_back(cfg.depth_min + fx * (cfg.depth_max - cfg.depth_min));
    }
  }
  auto id = [&](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * cfg.mesh_nx + c); };
  for (std::size_t r = 0; r + 1 < cfg.mesh_ny; ++r) {
    for (std::size_t c = 0; c + 1 < cfg.mesh_nx; ++c) {
      const auto a = id(r, c), b = id(r, c + 1), d = id(r + 1, c), e = id(r + 1, c + 1);
      if ((r + c) % 2 == 0) {
        m.triangles.push_back({a, b, e});
        m.triangles.push_back({a, e, d});
      } else {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({b, e, d});
      }
    }
  }
  validate_mesh(m);
  return m;
}

inline bool is_land(const Config& cfg, double lon) {
  const double lon0 = cfg.roi.lon_min - cfg.margin, lon1 = cfg.roi.lon_max + cfg.margin;
  return lon < lon0 + cfg.land_fraction * (lon1 - lon0);
}

struct Track {
  double peak_frame = 30.0;
  double amplitude = 2.0;
  double sigma = 0.12;
  double envelope = 10.0;
  double center_lon = 0.0, center_lat = 0.0;  // at the peak frame
  double vel_lon = 0.0, vel_lat = 0.0;        // degrees per frame

  double amplitude_at(double t) const {
    const double s = (t - peak_frame) / envelope;
    return amplitude * std::exp(-s * s);
  }
};

inline Track random_track(const Config& cfg, Rng& rng) {
  Track k;
  k.peak_frame = std::round(rng.uniform(cfg.peak_min, cfg.peak_max));
  k.amplitude = rng.uniform(cfg.amp_min, cfg.amp_max);
  k.sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
  k.envelope = rng.uniform(cfg.envelope_min, cfg.envelope_max);
  const double w = cfg.roi.lon_max - cfg.roi.lon_min, h = cfg.roi.lat_max - cfg.roi.lat_min;
  k.center_lon = cfg.roi.lon_min + w * rng.uniform(0.4, 0.7);
  k.center_lat = cfg.roi.lat_min + h * rng.uniform(0.3, 0.7);
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  const double heading = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  k.vel_lon = speed * std::cos(heading);
  k.vel_lat = speed * std::sin(heading);
  return k;
}

struct NodalStorm {
  std::string storm_id;
  Track track;
  NodalSeries zeta, windx, windy;
};

inline NodalStorm make_nodal_storm(const Config& cfg, const Mesh& mesh, const Track& track, std::string storm_id) {
  NodalStorm s{std::move(storm_id), track, {}, {}, {}};
  const std::size_t n = mesh.node_count();
  for (auto* series : {&s.zeta, &s.windx, &s.windy}) {
    series->node_count = n;
    series->fill_value = kDefaultFillValue;
    series->values.reserve(n * cfg.frames);
  }
  s.zeta.variable = "zeta";
  s.windx.variable = "windx";
  s.windy.variable = "windy";
  const double drift = cfg.drift_gain;
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double tt = static_cast<double>(t);
    const double time = tt * cfg.time_step;
    for (auto* series : {&s.zeta, &s.windx, &s.windy}) series->times.push_back(time);
    const double cx = track.center_lon + track.vel_lon * (tt - track.peak_frame);
    const double cy = track.center_lat + track.vel_lat * (tt - track.peak_frame);
    const double amp = track.amplitude_at(tt);
    const double strength = cfg.vortex_max * amp / cfg.amp_max;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = mesh.lon[i] - cx, dy = mesh.lat[i] - cy;
      const double r2 = dx * dx + dy * dy;
      const double g = std::exp(-r2 / (2.0 * track.sigma * track.sigma));
      s.zeta.values.push_back(is_land(cfg, mesh.lon[i]) ? static_cast<float>(kDefaultFillValue)
                                                        : static_cast<float>(amp * g));
      // Counter-clockwise vortex peaking at radius 1.5 sigma.
      const double r = std::sqrt(r2);
      const double rm = 1.5 * track.sigma;
      const double vt = r > 0.0 ? strength * (r / rm) * std::exp(1.0 - r / rm) : 0.0;
      const double ux = r > 0.0 ? -dy / r : 0.0, uy = r > 0.0 ? dx / r : 0.0;
      s.windx.values.push_back(static_cast<float>(drift * track.vel_lon + vt * ux));
      s.windy.values.push_back(static_cast<float>(drift * track.vel_lat + vt * uy));
    }
  }
  return s;
}

inline std::string storm_name(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "storm_" + digits;
}

/// The nodal storms of a synthetic dataset; storm i draws from its own stream.
inline std::vector<NodalStorm> make_nodal_storms(const Config& cfg, const Mesh& mesh, std::size_t count,
                                                 std::uint64_t seed) {
  std::vector<NodalStorm> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, 0x73746f726dULL, i));
    out.push_back(make_nodal_storm(cfg, mesh, random_track(cfg, rng), storm_name(i)));
  }
  return out;
}

/// Whole synthetic pipeline in memory: nodal storms rasterized and encoded.
inline std::vector<StormFrames> make_storm_frames(const Config& cfg, std::size_t count, std::uint64_t seed,
                                                  const VariableRanges& ranges = {},
                                                  const Colormap& cmap = Colormap::default_map()) {
  const auto mesh = make_mesh(cfg);
  const auto index = build_index(mesh, cfg.roi);
  std::vector<StormFrames> out;
  for (const auto& s : make_nodal_storms(cfg, mesh, count, seed)) {
    const auto r = rasterize_storm(mesh, index, s.zeta, s.windx, s.windy, kDefaultBackground, s.storm_id,
                                   cfg.region_id);
    out.push_back(encode_storm(r, ranges, cmap));
  }
  return out;
}

}  // namespace surgecast::synthetic

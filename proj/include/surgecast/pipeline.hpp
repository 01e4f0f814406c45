#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgecast/clips.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/error.hpp"
#include "surgecast/ingest.hpp"
#include "surgecast/raster.hpp"

namespace surgecast {

/// All rasterized fields of one storm on one ROI.
struct RasterizedStorm {
  std::string storm_id;
  std::string region_id;
  Roi roi;
  double background = kDefaultBackground;
  double fill_value = kDefaultFillValue;
  std::vector<double> times;
  std::vector<GridField> zeta;
  std::vector<GridField> windx;
  std::vector<GridField> windy;
  GridField depth;
  std::vector<double> mean_zeta;  // nodal, wet nodes inside the ROI

  std::size_t frame_count() const noexcept { return times.size(); }
};

inline RasterizedStorm rasterize_storm(const Mesh& mesh, const RasterIndex& index, const NodalSeries& zeta,
                                       const NodalSeries& windx, const NodalSeries& windy, double background,
                                       std::string storm_id, std::string region_id) {
  for (const NodalSeries* s : {&zeta, &windx, &windy}) {
    if (s->node_count != mesh.node_count()) throw Error(ErrorKind::shape, "series node count differs from mesh");
    if (s->times != zeta.times) throw Error(ErrorKind::value, "series time axes differ");
  }
  if (zeta.variable != "zeta" || windx.variable != "windx" || windy.variable != "windy") {
    throw Error(ErrorKind::value, "expected zeta, windx and windy series");
  }
  RasterizedStorm out;
  out.storm_id = std::move(storm_id);
  out.region_id = std::move(region_id);
  out.roi = index.roi;
  out.background = background;
  out.fill_value = zeta.fill_value;
  out.times = zeta.times;
  for (std::size_t t = 0; t < zeta.time_count(); ++t) {
    out.zeta.push_back(rasterize(index, zeta.row(t), zeta.fill_value, background));
    out.windx.push_back(rasterize(index, windx.row(t), windx.fill_value, background));
    out.windy.push_back(rasterize(index, windy.row(t), windy.fill_value, background));
    out.mean_zeta.push_back(mean_wet_zeta(mesh, zeta.row(t), zeta.fill_value, index.roi));
  }
  out.depth = rasterize(index, std::span<const double>(mesh.depth), std::numeric_limits<double>::quiet_NaN(),
                        background);
  return out;
}

inline StormFrames encode_storm(const RasterizedStorm& storm, const VariableRanges& ranges, const Colormap& cmap) {
  StormFrames out;
  out.storm_id = storm.storm_id;
  out.region_id = storm.region_id;
  out.mean_zeta = storm.mean_zeta;
  for (std::size_t t = 0; t < storm.frame_count(); ++t) {
    out.frames.push_back(assemble_frame(storm.zeta[t], storm.windx[t], storm.windy[t], storm.depth, ranges, cmap));
  }
  return out;
}

// --- gridded SFLD files plus a JSON sidecar ---------------------------------

/// Gridded series: n_nodes = H*W row-major; masked pixels store the fill value.
inline NodalSeries grids_to_series(const std::vector<GridField>& grids, const std::vector<double>& times,
                                   const std::string& variable, double fill_value) {
  if (grids.size() != times.size()) throw Error(ErrorKind::shape, "grids_to_series: count mismatch");
  NodalSeries s;
  s.variable = variable;
  s.times = times;
  s.fill_value = fill_value;
  s.node_count = grids.empty() ? 0 : grids.front().width * grids.front().height;
  s.values.reserve(grids.size() * s.node_count);
  for (const auto& g : grids) {
    for (std::size_t p = 0; p < g.values.size(); ++p) {
      s.values.push_back(g.mask[p] ? static_cast<float>(g.values[p]) : static_cast<float>(fill_value));
    }
  }
  return s;
}

inline std::vector<GridField> series_to_grids(const NodalSeries& s, std::size_t width, std::size_t height,
                                              double background) {
  if (s.node_count != width * height) {
    throw Error(ErrorKind::shape, "gridded " + s.variable + ": n_nodes " + std::to_string(s.node_count) +
                                      " does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  std::vector<GridField> out;
  for (std::size_t t = 0; t < s.time_count(); ++t) {
    GridField g(width, height, background);
    const auto row = s.row(t);
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (s.is_fill(row[p])) continue;
      g.values[p] = row[p];
      g.mask[p] = 1;
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline constexpr const char* kGridSidecar = "grid.json";

inline void write_rasterized_storm(const std::filesystem::path& dir, const RasterizedStorm& storm) {
  std::filesystem::create_directories(dir);
  write_series(dir / "zeta.sfld", grids_to_series(storm.zeta, storm.times, "zeta", storm.fill_value));
  write_series(dir / "windx.sfld", grids_to_series(storm.windx, storm.times, "windx", storm.fill_value));
  write_series(dir / "windy.sfld", grids_to_series(storm.windy, storm.times, "windy", storm.fill_value));
  write_series(dir / "depth.sfld", grids_to_series({storm.depth}, {0.0}, "depth", storm.fill_value));
  nlohmann::json j;
  j["storm_id"] = storm.storm_id;
  j["region_id"] = storm.region_id;
  j["roi"] = {{"lon_min", storm.roi.lon_min}, {"lon_max", storm.roi.lon_max}, {"lat_min", storm.roi.lat_min},
              {"lat_max", storm.roi.lat_max}, {"width", storm.roi.width},     {"height", storm.roi.height}};
  j["background"] = storm.background;
  j["fill_value"] = storm.fill_value;
  j["mean_zeta"] = storm.mean_zeta;
  j["variables"] = {"zeta", "windx", "windy", "depth"};
  std::ofstream out(dir / kGridSidecar);
  if (!out) throw Error(ErrorKind::io, "cannot write " + (dir / kGridSidecar).string());
  out << j.dump(2) << '\n';
}

inline RasterizedStorm read_rasterized_storm(const std::filesystem::path& dir) {
  std::ifstream in(dir / kGridSidecar);
  if (!in) throw Error(ErrorKind::io, "cannot open " + (dir / kGridSidecar).string());
  RasterizedStorm storm;
  try {
    const auto j = nlohmann::json::parse(in);
    storm.storm_id = j.at("storm_id").get<std::string>();
    storm.region_id = j.at("region_id").get<std::string>();
    const auto& r = j.at("roi");
    storm.roi = {r.at("lon_min").get<double>(), r.at("lon_max").get<double>(), r.at("lat_min").get<double>(),
                 r.at("lat_max").get<double>(), r.at("width").get<std::size_t>(), r.at("height").get<std::size_t>()};
    storm.roi.validate();
    storm.background = j.at("background").get<double>();
    storm.fill_value = j.at("fill_value").get<double>();
    storm.mean_zeta = j.at("mean_zeta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, (dir / kGridSidecar).string() + ": " + e.what());
  }
  const std::size_t W = storm.roi.width, H = storm.roi.height;
  const auto zeta = read_series(dir / "zeta.sfld");
  const auto windx = read_series(dir / "windx.sfld");
  const auto windy = read_series(dir / "windy.sfld");
  const auto depth = read_series(dir / "depth.sfld");
  if (windx.times != zeta.times || windy.times != zeta.times || zeta.time_count() != storm.mean_zeta.size()) {
    throw Error(ErrorKind::value, dir.string() + ": gridded series disagree on the time axis");
  }
  storm.times = zeta.times;
  storm.zeta = series_to_grids(zeta, W, H, storm.background);
  storm.windx = series_to_grids(windx, W, H, storm.background);
  storm.windy = series_to_grids(windy, W, H, storm.background);
  auto depth_grids = series_to_grids(depth, W, H, storm.background);
  if (depth_grids.size() != 1) throw Error(ErrorKind::value, dir.string() + ": depth must have one time step");
  storm.depth = std::move(depth_grids.front());
  return storm;
}

}  // namespace surgecast

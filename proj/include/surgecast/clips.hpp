#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgecast/binary_io.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/error.hpp"
#include "surgecast/ingest.hpp"
#include "surgecast/random.hpp"
#include "surgecast/raster.hpp"
#include "surgecast/tensor.hpp"

namespace surgecast {

inline constexpr std::size_t kContextFrames = 6;
inline constexpr std::size_t kTargetFrames = 24;
inline constexpr std::size_t kClipFrames = kContextFrames + kTargetFrames;
inline constexpr std::size_t kPeakHalfWidth = 20;
inline constexpr double kTestFraction = 0.10;
inline constexpr double kValidationFraction = 0.10;

struct StormFrames {
  std::string storm_id;
  std::string region_id;
  std::vector<ChannelFrame> frames;
  std::vector<double> mean_zeta;

  void validate() const {
    if (frames.empty()) throw Error(ErrorKind::value, "storm " + storm_id + ": no frames");
    if (mean_zeta.size() != frames.size()) {
      throw Error(ErrorKind::shape, "storm " + storm_id + ": mean_zeta length differs from frame count");
    }
  }
};

/// One training/evaluation sample: 6 context frames, 24 RGB targets, the
/// wind channels aligned with the targets, and the static depth channel.
struct Clip {
  std::string id;
  std::string storm_id;
  std::string region_id;
  std::size_t frame_start = 0;  // index of the first context frame in the storm
  std::vector<ChannelFrame> context;
  std::vector<Tensor3<float>> target;
  std::vector<Tensor3<float>> future_wind;
  Tensor3<float> bathymetry;

  std::size_t height() const noexcept { return bathymetry.height(); }
  std::size_t width() const noexcept { return bathymetry.width(); }

  void validate() const {
    if (context.size() != kContextFrames || target.size() != kTargetFrames ||
        future_wind.size() != kTargetFrames) {
      throw Error(ErrorKind::shape, "clip " + id + ": wrong context/target/wind lengths");
    }
    const std::size_t h = height(), w = width();
    if (bathymetry.channels() != 1) throw Error(ErrorKind::shape, "clip " + id + ": bathymetry must have 1 channel");
    for (const auto& f : context) {
      if (f.channels() != kFrameChannels || f.height() != h || f.width() != w) {
        throw Error(ErrorKind::shape, "clip " + id + ": context frame shape");
      }
    }
    for (std::size_t k = 0; k < kTargetFrames; ++k) {
      if (target[k].channels() != kRgbChannels || target[k].height() != h || target[k].width() != w ||
          future_wind[k].channels() != 2 || future_wind[k].height() != h || future_wind[k].width() != w) {
        throw Error(ErrorKind::shape, "clip " + id + ": target or wind frame shape");
      }
      for (float v : target[k].values()) {
        if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorKind::value, "clip " + id + ": target outside [0, 1]");
      }
    }
  }

  friend bool operator==(const Clip&, const Clip&) = default;
};

inline std::string make_clip_id(const std::string& storm_id, std::size_t frame_start) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", frame_start);
  return storm_id + "_" + buf;
}

/// Mean of the non-fill nodal zeta values whose location lies inside the ROI
/// box. Returns 0 when no such node is wet.
inline double mean_wet_zeta(const Mesh& mesh, std::span<const float> zeta, double fill_value, const Roi& roi) {
  if (zeta.size() != mesh.node_count()) throw Error(ErrorKind::shape, "mean_wet_zeta: length mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    if (static_cast<double>(zeta[i]) == fill_value || !roi.contains(mesh.lon[i], mesh.lat[i])) continue;
    sum += zeta[i];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Index of the maximum; the earliest index wins ties.
inline std::size_t find_peak_frame(std::span<const double> mean_zeta) {
  if (mean_zeta.empty()) throw Error(ErrorKind::value, "find_peak_frame: empty input");
  return static_cast<std::size_t>(std::max_element(mean_zeta.begin(), mean_zeta.end()) - mean_zeta.begin());
}

struct FrameWindow {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const FrameWindow&, const FrameWindow&) = default;
};

/// [N - 20, N + 20] truncated to the available frames.
inline FrameWindow event_window(std::size_t peak, std::size_t n_frames) {
  if (peak >= n_frames) throw Error(ErrorKind::value, "event_window: peak index out of range");
  return {peak >= kPeakHalfWidth ? peak - kPeakHalfWidth : 0, std::min(n_frames - 1, peak + kPeakHalfWidth)};
}

inline Clip make_clip(const StormFrames& storm, std::size_t start) {
  Clip clip;
  clip.storm_id = storm.storm_id;
  clip.region_id = storm.region_id;
  clip.frame_start = start;
  clip.id = make_clip_id(storm.storm_id, start);
  clip.context.assign(storm.frames.begin() + static_cast<std::ptrdiff_t>(start),
                      storm.frames.begin() + static_cast<std::ptrdiff_t>(start + kContextFrames));
  for (std::size_t k = 0; k < kTargetFrames; ++k) {
    const auto& f = storm.frames[start + kContextFrames + k];
    clip.target.push_back(f.slice_channels(channel::zeta_r, kRgbChannels));
    clip.future_wind.push_back(f.slice_channels(channel::windx, 2));
  }
  clip.bathymetry = storm.frames[start].slice_channels(channel::depth, 1);
  return clip;
}

/// Stride-1 windows of 30 frames inside `window`; empty when it is shorter.
inline std::vector<Clip> slide_windows(const StormFrames& storm, const FrameWindow& window) {
  storm.validate();
  if (window.end >= storm.frames.size()) throw Error(ErrorKind::value, "slide_windows: window past the last frame");
  std::vector<Clip> clips;
  if (window.length() < kClipFrames) return clips;
  for (std::size_t s = window.start; s + kClipFrames - 1 <= window.end; ++s) clips.push_back(make_clip(storm, s));
  return clips;
}

/// Peak detection, window extraction, and sliding in one call.
inline std::vector<Clip> build_storm_clips(const StormFrames& storm) {
  storm.validate();
  return slide_windows(storm, event_window(find_peak_frame(storm.mean_zeta), storm.frames.size()));
}

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train_storms;
  std::vector<std::string> test_storms;
  /// Subset of train_storms held out for validation loss.
  std::vector<std::string> validation_storms;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// Number of held-out storms for a fraction: round(n * fraction), at least 1
/// and at most n - 1.
inline std::size_t held_out_count(std::size_t n, double fraction) {
  const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

namespace detail {

inline std::pair<std::vector<std::string>, std::vector<std::string>> partition_ids(
    std::vector<std::string> ids, std::uint64_t seed, double fraction) {
  std::sort(ids.begin(), ids.end());
  const std::size_t k = held_out_count(ids.size(), fraction);
  Rng rng(seed);
  rng.shuffle(ids);
  std::vector<std::string> held(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::string> rest(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
  std::sort(held.begin(), held.end());
  std::sort(rest.begin(), rest.end());
  return {std::move(rest), std::move(held)};
}

}  // namespace detail

/// Storm-level split. Deterministic for a seed; input order is irrelevant.
/// Validation storms are carved out of the training storms when at least two
/// are available.
inline SplitManifest split_storms(const std::vector<std::string>& storm_ids, std::uint64_t seed,
                                  double test_fraction = kTestFraction) {
  const std::set<std::string> unique(storm_ids.begin(), storm_ids.end());
  if (unique.size() != storm_ids.size()) throw Error(ErrorKind::value, "split_storms: duplicate storm ids");
  if (storm_ids.size() < 2) throw Error(ErrorKind::value, "split_storms: need at least 2 storms");
  SplitManifest m;
  m.seed = seed;
  std::tie(m.train_storms, m.test_storms) = detail::partition_ids(storm_ids, seed, test_fraction);
  if (m.train_storms.size() >= 2) {
    m.validation_storms =
        detail::partition_ids(m.train_storms, derive_seed(seed, 0x76616cULL), kValidationFraction).second;
  }
  return m;
}

// --- SCLP clip files -------------------------------------------------------

inline constexpr std::uint32_t kClipVersion = 1;

inline void write_clip(const std::filesystem::path& path, const Clip& clip) {
  clip.validate();
  io::BinaryWriter w(path);
  w.magic("SCLP");
  w.scalar<std::uint32_t>(kClipVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(clip.height()));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(clip.width()));
  for (const auto& f : clip.context) w.array<float>(f.values());
  for (const auto& f : clip.target) w.array<float>(f.values());
  for (const auto& f : clip.future_wind) w.array<float>(f.values());
  w.array<float>(clip.bathymetry.values());
  w.close();
}

/// Reads the tensors of an SCLP file. Identity fields (id, storm, region,
/// frame_start) live in the dataset index and are left empty. When
/// `cached_bathymetry` is given the bathymetry block is skipped.
inline Clip read_clip(const std::filesystem::path& path, const Tensor3<float>* cached_bathymetry = nullptr) {
  io::BinaryReader r(path);
  r.expect_magic("SCLP");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kClipVersion) {
    throw Error(ErrorKind::format, path.string() + ": unsupported SCLP version " + std::to_string(version));
  }
  const std::size_t h = r.scalar<std::uint32_t>();
  const std::size_t w = r.scalar<std::uint32_t>();
  Clip clip;
  auto read_frames = [&](std::vector<Tensor3<float>>& out, std::size_t count, std::size_t channels) {
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      Tensor3<float> f(channels, h, w);
      r.array<float>(f.values());
      out.push_back(std::move(f));
    }
  };
  read_frames(clip.context, kContextFrames, kFrameChannels);
  read_frames(clip.target, kTargetFrames, kRgbChannels);
  read_frames(clip.future_wind, kTargetFrames, 2);
  if (cached_bathymetry) {
    if (cached_bathymetry->height() != h || cached_bathymetry->width() != w) {
      throw Error(ErrorKind::shape, path.string() + ": cached bathymetry has a different grid size");
    }
    clip.bathymetry = *cached_bathymetry;
  } else {
    clip.bathymetry = Tensor3<float>(1, h, w);
    r.array<float>(clip.bathymetry.values());
  }
  return clip;
}

// --- dataset directory -----------------------------------------------------

enum class Partition { train, validation, test, all };

inline Partition parse_partition(std::string_view s) {
  if (s == "train") return Partition::train;
  if (s == "validation" || s == "val") return Partition::validation;
  if (s == "test") return Partition::test;
  if (s == "all") return Partition::all;
  throw Error(ErrorKind::config, "unknown partition '" + std::string(s) + "'");
}

struct ClipEntry {
  std::string id;
  std::string storm_id;
  std::string region_id;
  std::string file;
  std::size_t frame_start = 0;
  std::size_t frame_end = 0;  // inclusive, storm frame index of the last target

  friend bool operator==(const ClipEntry&, const ClipEntry&) = default;
};

inline nlohmann::json colormap_to_json(const Colormap& cmap) {
  auto arr = nlohmann::json::array();
  for (const auto& p : cmap.points()) arr.push_back({p.t, p.color[0], p.color[1], p.color[2]});
  return arr;
}

inline Colormap colormap_from_json(const nlohmann::json& j) {
  std::vector<ControlPoint> points;
  for (const auto& row : j) {
    points.push_back({row.at(0).get<double>(), {row.at(1).get<double>(), row.at(2).get<double>(), row.at(3).get<double>()}});
  }
  return Colormap(std::move(points));
}

inline nlohmann::json ranges_to_json(const VariableRanges& r) {
  auto pair = [](const ValueRange& v) { return nlohmann::json::array({v.lo, v.hi}); };
  return {{"zeta", pair(r.zeta)}, {"windx", pair(r.windx)}, {"windy", pair(r.windy)}, {"depth", pair(r.depth)}};
}

inline VariableRanges ranges_from_json(const nlohmann::json& j) {
  auto pair = [](const nlohmann::json& v) { return ValueRange{v.at(0).get<double>(), v.at(1).get<double>()}; };
  VariableRanges r{pair(j.at("zeta")), pair(j.at("windx")), pair(j.at("windy")), pair(j.at("depth"))};
  r.validate();
  return r;
}

/// A clip dataset directory: `index.json` plus one SCLP file per clip.
/// Clips are read on demand; bathymetry is cached per region after the first
/// read. Safe for concurrent `load` calls.
class ClipDataset {
 public:
  static constexpr const char* kIndexName = "index.json";

  struct Header {
    std::size_t height = 0;
    std::size_t width = 0;
    SplitManifest split;
    VariableRanges ranges;
    std::vector<ControlPoint> colormap;
    std::vector<ClipEntry> clips;
  };

  static void write_index(const std::filesystem::path& dir, const Header& h) {
    nlohmann::json j;
    j["format"] = "surgecast-clips";
    j["version"] = 1;
    j["height"] = h.height;
    j["width"] = h.width;
    j["context_frames"] = kContextFrames;
    j["target_frames"] = kTargetFrames;
    j["split"] = {{"seed", h.split.seed},
                  {"train_storms", h.split.train_storms},
                  {"test_storms", h.split.test_storms},
                  {"validation_storms", h.split.validation_storms}};
    j["ranges"] = ranges_to_json(h.ranges);
    j["colormap"] = colormap_to_json(Colormap(h.colormap));
    auto clips = nlohmann::json::array();
    for (const auto& c : h.clips) {
      clips.push_back({{"id", c.id},
                       {"storm_id", c.storm_id},
                       {"region_id", c.region_id},
                       {"file", c.file},
                       {"frame_start", c.frame_start},
                       {"frame_end", c.frame_end}});
    }
    j["clips"] = std::move(clips);
    std::ofstream out(dir / kIndexName);
    if (!out) throw Error(ErrorKind::io, "cannot write " + (dir / kIndexName).string());
    out << j.dump(2) << '\n';
  }

  static ClipDataset open(const std::filesystem::path& dir) {
    const auto path = dir / kIndexName;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open dataset index: " + path.string());
    ClipDataset ds;
    ds.dir_ = dir;
    try {
      const auto j = nlohmann::json::parse(in);
      if (j.at("format") != "surgecast-clips" || j.at("version") != 1) {
        throw Error(ErrorKind::format, path.string() + ": not a version-1 clip index");
      }
      auto& h = ds.header_;
      h.height = j.at("height").get<std::size_t>();
      h.width = j.at("width").get<std::size_t>();
      const auto& s = j.at("split");
      h.split.seed = s.at("seed").get<std::uint64_t>();
      h.split.train_storms = s.at("train_storms").get<std::vector<std::string>>();
      h.split.test_storms = s.at("test_storms").get<std::vector<std::string>>();
      h.split.validation_storms = s.at("validation_storms").get<std::vector<std::string>>();
      h.ranges = ranges_from_json(j.at("ranges"));
      h.colormap = colormap_from_json(j.at("colormap")).points();
      for (const auto& c : j.at("clips")) {
        h.clips.push_back({c.at("id").get<std::string>(), c.at("storm_id").get<std::string>(),
                           c.at("region_id").get<std::string>(), c.at("file").get<std::string>(),
                           c.at("frame_start").get<std::size_t>(), c.at("frame_end").get<std::size_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
    return ds;
  }

  const Header& header() const noexcept { return header_; }
  const std::filesystem::path& directory() const noexcept { return dir_; }
  std::size_t size() const noexcept { return header_.clips.size(); }
  const ClipEntry& entry(std::size_t i) const { return header_.clips.at(i); }
  Colormap colormap() const { return Colormap(header_.colormap); }

  std::optional<std::size_t> find(std::string_view clip_id) const {
    for (std::size_t i = 0; i < header_.clips.size(); ++i) {
      if (header_.clips[i].id == clip_id) return i;
    }
    return std::nullopt;
  }

  /// Clip positions (in index order) whose storm belongs to `part`.
  std::vector<std::size_t> indices(Partition part) const {
    const auto& sp = header_.split;
    const std::set<std::string> test(sp.test_storms.begin(), sp.test_storms.end());
    const std::set<std::string> val(sp.validation_storms.begin(), sp.validation_storms.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < header_.clips.size(); ++i) {
      const auto& sid = header_.clips[i].storm_id;
      const bool in_test = test.count(sid) > 0;
      const bool in_val = val.count(sid) > 0;
      bool keep = false;
      switch (part) {
        case Partition::train: keep = !in_test && !in_val; break;
        case Partition::validation: keep = in_val; break;
        case Partition::test: keep = in_test; break;
        case Partition::all: keep = true; break;
      }
      if (keep) out.push_back(i);
    }
    return out;
  }

  Clip load(std::size_t i) const {
    const auto& e = entry(i);
    std::shared_ptr<const Tensor3<float>> bathy;
    {
      std::lock_guard lock(cache_->mutex);
      if (auto it = cache_->bathymetry.find(e.region_id); it != cache_->bathymetry.end()) bathy = it->second;
    }
    Clip clip = read_clip(dir_ / e.file, bathy.get());
    if (!bathy) {
      std::lock_guard lock(cache_->mutex);
      cache_->bathymetry.emplace(e.region_id, std::make_shared<const Tensor3<float>>(clip.bathymetry));
    }
    if (clip.height() != header_.height || clip.width() != header_.width) {
      throw Error(ErrorKind::shape, e.file + ": grid size differs from the index");
    }
    clip.id = e.id;
    clip.storm_id = e.storm_id;
    clip.region_id = e.region_id;
    clip.frame_start = e.frame_start;
    return clip;
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::string, std::shared_ptr<const Tensor3<float>>> bathymetry;
  };

  std::filesystem::path dir_;
  Header header_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Writes clips and an index. Clip files are named `<clip id>.sclp`.
inline void write_dataset(const std::filesystem::path& dir, const std::vector<Clip>& clips,
                          const SplitManifest& split, const VariableRanges& ranges, const Colormap& cmap,
                          std::size_t height, std::size_t width) {
  std::filesystem::create_directories(dir);
  ClipDataset::Header h;
  h.height = height;
  h.width = width;
  h.split = split;
  h.ranges = ranges;
  h.colormap = cmap.points();
  for (const auto& c : clips) {
    if (c.height() != h.height || c.width() != h.width) {
      throw Error(ErrorKind::shape, "write_dataset: clips differ in grid size");
    }
    const std::string file = c.id + ".sclp";
    write_clip(dir / file, c);
    h.clips.push_back({c.id, c.storm_id, c.region_id, file, c.frame_start, c.frame_start + kClipFrames - 1});
  }
  ClipDataset::write_index(dir, h);
}

}  // namespace surgecast

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support/fixtures.hpp"
#include "surgecast/clips.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/synthetic.hpp"

using namespace surgecast;

namespace {

void expect_rgb(const Rgb& a, const Rgb& b, double tol = 0.0) {
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], tol) << "component " << k;
}

StormFrames gaussian_storm(std::size_t frames, double peak, std::size_t h = 4, std::size_t w = 4) {
  StormFrames s;
  s.storm_id = "storm_007";
  s.region_id = "r";
  const auto cmap = Colormap::default_map();
  for (std::size_t t = 0; t < frames; ++t) {
    const double z = 2.0 * std::exp(-0.5 * std::pow((t - peak) / 6.0, 2));
    GridField zeta(w, h, z), wind(w, h, 1.0), depth(w, h, 10.0);
    std::fill(zeta.mask.begin(), zeta.mask.end(), 1);
    ChannelFrame f = assemble_frame(zeta, wind, wind, depth, VariableRanges{}, cmap);
    f(channel::windx, 0, 0) = static_cast<float>(t) / frames;  // makes frames distinguishable
    s.frames.push_back(std::move(f));
    s.mean_zeta.push_back(z);
  }
  return s;
}

}  // namespace

TEST(Scale, ClampAndMidpoint) {
  const VariableRanges r;
  EXPECT_DOUBLE_EQ(clamp_scale(1.25, r.zeta), 0.5);
  EXPECT_DOUBLE_EQ(clamp_scale(3.0, r.zeta), 1.0);
  EXPECT_DOUBLE_EQ(clamp_scale(-40.0, r.windx), 0.0);
  EXPECT_DOUBLE_EQ(unscale(0.5, r.zeta), 1.25);
  EXPECT_THROW(clamp_scale(std::nan(""), r.zeta), Error);
}

TEST(Colormap, ControlColors) {
  const auto cmap = Colormap::default_map();
  expect_rgb(rgb_encode(0.0, cmap), {0.0, 0.0, 0.5});
  expect_rgb(rgb_encode(1.0, cmap), {0.5, 0.0, 0.0});
  expect_rgb(rgb_encode(0.5, cmap), {0.5, 1.0, 0.5});
  for (const auto& p : cmap.points()) EXPECT_EQ(rgb_decode(p.color, cmap), p.t);
}

TEST(Colormap, RoundTrip) {
  const auto cmap = Colormap::default_map();
  for (int k = 0; k <= 1000; ++k) {
    const double u = k / 1000.0;
    const auto c = rgb_encode(u, cmap);
    EXPECT_NEAR(rgb_decode(c, cmap), u, 1e-9);
    Rgb q;
    for (int j = 0; j < 3; ++j) q[j] = std::round(c[j] * 255.0) / 255.0;
    EXPECT_NEAR(rgb_decode(q, cmap), u, 0.004);
  }
}

TEST(Colormap, EncodeIsInjectiveOnGrid) {
  const auto cmap = Colormap::default_map();
  std::set<std::array<double, 3>> seen;
  for (int k = 0; k <= 1000; ++k) seen.insert(rgb_encode(k / 1000.0, cmap));
  EXPECT_EQ(seen.size(), 1001u);
}

TEST(Colormap, RejectsBadTables) {
  // Not starting at 0.
  EXPECT_THROW(Colormap({{0.1, {0, 0, 0}}, {1.0, {1, 1, 1}}}), Error);
  // Self-intersecting: returns to an earlier color.
  EXPECT_THROW(Colormap({{0.0, {0, 0, 0}}, {0.5, {1, 0, 0}}, {0.75, {1, 1, 0}}, {1.0, {0.5, 0, 0}}}), Error);
  // Folds straight back on itself.
  EXPECT_THROW(Colormap({{0.0, {0, 0, 0}}, {0.5, {1, 0, 0}}, {1.0, {0.5, 0, 0}}}), Error);
  // Color outside [0, 1].
  EXPECT_THROW(Colormap({{0.0, {0, 0, 0}}, {1.0, {1.5, 0, 0}}}), Error);
}

TEST(Colormap, LoadSaveRoundTrip) {
  const auto dir = fixtures::scratch_dir("cmap");
  const auto cmap = Colormap::default_map();
  cmap.save(dir / "map.txt");
  EXPECT_EQ(Colormap::load(dir / "map.txt").points(), cmap.points());
  std::ofstream(dir / "bad.txt") << "# t r g b\n0 0 0 0\n1 1 1\n";
  EXPECT_THROW(Colormap::load(dir / "bad.txt"), Error);
}

TEST(Assemble, AllZeroFields) {
  GridField zero(3, 2, 0.0);
  std::fill(zero.mask.begin(), zero.mask.end(), 1);
  const auto f = assemble_frame(zero, zero, zero, zero, VariableRanges{}, Colormap::default_map());
  ASSERT_EQ(f.channels(), kFrameChannels);
  for (std::size_t p = 0; p < f.plane(); ++p) {
    EXPECT_EQ(f.channel(0)[p], 0.0f);
    EXPECT_EQ(f.channel(1)[p], 0.0f);
    EXPECT_EQ(f.channel(2)[p], 0.5f);
    EXPECT_EQ(f.channel(channel::windx)[p], static_cast<float>(2.0 / 3.0));
    EXPECT_EQ(f.channel(channel::windy)[p], 0.5f);
    EXPECT_EQ(f.channel(channel::depth)[p], static_cast<float>(2.0 / 7.0));
  }
}

TEST(Assemble, ShapeMismatch) {
  GridField a(3, 2, 0.0), b(3, 3, 0.0);
  EXPECT_THROW(assemble_frame(a, b, a, a, VariableRanges{}, Colormap::default_map()), Error);
}

TEST(Assemble, DecodeZetaRecoversMeters) {
  GridField z(4, 1, 0.0), zero(4, 1, 0.0);
  z.values = {0.0, 0.6, 1.3, 2.5};
  const auto cmap = Colormap::default_map();
  const auto f = assemble_frame(z, zero, zero, zero, VariableRanges{}, cmap);
  const auto m = decode_zeta(f.slice_channels(0, 3), cmap, VariableRanges{}.zeta);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(m[k], z.values[k], 1e-5);
}

TEST(Clips, PeakAndWindow) {
  EXPECT_EQ(find_peak_frame(std::vector<double>{1, 3, 2}), 1u);
  EXPECT_EQ(find_peak_frame(std::vector<double>{2, 2, 2}), 0u);
  EXPECT_THROW(find_peak_frame(std::vector<double>{}), Error);
  EXPECT_EQ(event_window(30, 60), (FrameWindow{10, 50}));
  EXPECT_EQ(event_window(30, 60).length(), 41u);
  EXPECT_EQ(event_window(5, 60), (FrameWindow{0, 25}));
  EXPECT_EQ(event_window(58, 60), (FrameWindow{38, 59}));
}

TEST(Clips, GaussianStormYieldsTwelveClips) {
  const auto storm = gaussian_storm(60, 30.0);
  EXPECT_EQ(find_peak_frame(storm.mean_zeta), 30u);
  const auto clips = build_storm_clips(storm);
  ASSERT_EQ(clips.size(), 12u);
  for (std::size_t k = 0; k < clips.size(); ++k) {
    const auto& c = clips[k];
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.frame_start, 10 + k);
    EXPECT_EQ(c.id, make_clip_id("storm_007", 10 + k));
    for (std::size_t j = 0; j < kContextFrames; ++j) EXPECT_EQ(c.context[j], storm.frames[c.frame_start + j]);
    for (std::size_t j = 0; j < kTargetFrames; ++j) {
      const auto& src = storm.frames[c.frame_start + kContextFrames + j];
      EXPECT_EQ(c.target[j], src.slice_channels(0, 3));
      EXPECT_EQ(c.future_wind[j], src.slice_channels(channel::windx, 2));
    }
    EXPECT_EQ(c.bathymetry, storm.frames[c.frame_start].slice_channels(channel::depth, 1));
  }
}

TEST(Clips, SlideWindowCounts) {
  const auto storm = gaussian_storm(60, 30.0);
  EXPECT_EQ(slide_windows(storm, {0, 40}).size(), 12u);
  EXPECT_EQ(slide_windows(storm, {0, 29}).size(), 1u);
  EXPECT_EQ(slide_windows(storm, {0, 28}).size(), 0u);
  // Truncated windows: a storm peaking early has a short window.
  EXPECT_EQ(build_storm_clips(gaussian_storm(60, 5.0)).size(), 0u);     // (0, 25): 26 frames
  EXPECT_EQ(build_storm_clips(gaussian_storm(60, 58.0)).size(), 0u);    // (38, 59): 22 frames
  EXPECT_EQ(build_storm_clips(gaussian_storm(60, 12.0)).size(), 4u);    // (0, 32): 33 frames
}

TEST(Clips, TotalCountOverStorms) {
  const auto storms = synthetic::make_storm_frames(synthetic::Config{}, 4, 3);
  std::size_t expected = 0, got = 0;
  for (const auto& s : storms) {
    const auto w = event_window(find_peak_frame(s.mean_zeta), s.frames.size());
    expected += w.length() >= kClipFrames ? w.length() - kClipFrames + 1 : 0;
    got += build_storm_clips(s).size();
  }
  EXPECT_EQ(got, expected);
}

TEST(Split, SizesAndDeterminism) {
  std::vector<std::string> ids;
  for (int k = 0; k < 10; ++k) ids.push_back("s" + std::to_string(k));
  const auto m = split_storms(ids, 7);
  EXPECT_EQ(m.test_storms.size(), 1u);
  EXPECT_EQ(m.train_storms.size(), 9u);
  EXPECT_EQ(split_storms(ids, 7), m);
  std::vector<std::string> reversed(ids.rbegin(), ids.rend());
  EXPECT_EQ(split_storms(reversed, 7), m);
  EXPECT_EQ(held_out_count(446, 0.1), 45u);
  EXPECT_EQ(held_out_count(2, 0.1), 1u);
  EXPECT_THROW(split_storms({"only"}, 1), Error);
  EXPECT_THROW(split_storms({"a", "a"}, 1), Error);
}

TEST(Split, NoLeakage) {
  std::vector<std::string> ids;
  for (int k = 0; k < 37; ++k) ids.push_back("storm_" + std::to_string(k));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = split_storms(ids, seed);
    std::set<std::string> train(m.train_storms.begin(), m.train_storms.end());
    for (const auto& t : m.test_storms) EXPECT_FALSE(train.count(t));
    for (const auto& v : m.validation_storms) EXPECT_TRUE(train.count(v));
    EXPECT_EQ(m.train_storms.size() + m.test_storms.size(), ids.size());
    EXPECT_EQ(m.test_storms.size(), 4u);
  }
}

TEST(Dataset, WriteOpenLoad) {
  const auto dir = fixtures::scratch_dir("dataset");
  Rng rng(2);
  std::vector<Clip> clips;
  for (int k = 0; k < 3; ++k) {
    auto c = fixtures::random_clip(rng, 5, 4, "storm_00" + std::to_string(k) + "_000");
    c.storm_id = "storm_00" + std::to_string(k);
    if (k > 0) c.bathymetry = clips[0].bathymetry;  // one region, one bathymetry
    clips.push_back(c);
  }
  const auto split = split_storms({"storm_000", "storm_001", "storm_002"}, 4);
  write_dataset(dir, clips, split, VariableRanges{}, Colormap::default_map(), 5, 4);
  const auto ds = ClipDataset::open(dir);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.header().split, split);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ds.load(i), clips[i]);
  EXPECT_EQ(ds.indices(Partition::test).size(), 1u);
  EXPECT_EQ(ds.indices(Partition::all).size(), 3u);
  EXPECT_EQ(ds.indices(Partition::train).size() + ds.indices(Partition::validation).size() +
                ds.indices(Partition::test).size(),
            3u);
  EXPECT_EQ(ds.find("storm_001_000"), std::optional<std::size_t>(1));

  // SCLP layout: magic, version, H, W, then float payload.
  std::ifstream in(dir / "storm_000_000.sclp", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "SCLP");
  const auto size = std::filesystem::file_size(dir / "storm_000_000.sclp");
  EXPECT_EQ(size, 16u + 4u * 20u * (6 * 6 + 24 * 3 + 24 * 2 + 1));
}

TEST(Dataset, RejectsCorruptClip) {
  const auto dir = fixtures::scratch_dir("dataset_bad");
  Rng rng(2);
  const auto c = fixtures::random_clip(rng, 3, 3);
  write_clip(dir / "a.sclp", c);
  std::filesystem::resize_file(dir / "a.sclp", 40);
  EXPECT_THROW(read_clip(dir / "a.sclp"), Error);
}

TEST(Scale, MonotoneAndIdempotent) {
  Rng rng(41);
  const ValueRange r{-40, 20}, unit{0, 1};
  std::vector<double> xs(500);
  for (auto& x : xs) x = rng.uniform(-100, 100);
  std::sort(xs.begin(), xs.end());
  for (std::size_t k = 1; k < xs.size(); ++k) EXPECT_LE(clamp_scale(xs[k - 1], r), clamp_scale(xs[k], r));
  for (double x : xs) {
    const double once = clamp_scale(x, r);
    EXPECT_EQ(clamp_scale(once, unit), once);
  }
}

TEST(Assemble, RandomFiniteInputsStayInUnitRange) {
  Rng rng(42);
  const auto cmap = Colormap::default_map();
  for (int trial = 0; trial < 30; ++trial) {
    GridField zeta(5, 3, 0.0), wx(5, 3, 0.0), wy(5, 3, 0.0), depth(5, 3, 0.0);
    for (auto* g : {&zeta, &wx, &wy, &depth}) {
      for (auto& v : g->values) v = rng.uniform(-200, 200);
      for (auto& m : g->mask) m = rng.bernoulli(0.8);
    }
    const auto f = assemble_frame(zeta, wx, wy, depth, VariableRanges{}, cmap);
    ASSERT_EQ(f.channels(), kFrameChannels);
    for (float v : f.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(Clips, TargetsAreZetaSlicesOfSourceFrames) {
  const auto storm = gaussian_storm(60, 30);
  for (const auto& c : build_storm_clips(storm)) {
    c.validate();
    for (std::size_t k = 0; k < kTargetFrames; ++k) {
      const auto& src = storm.frames[c.frame_start + kContextFrames + k];
      EXPECT_EQ(c.target[k], src.slice_channels(0, kRgbChannels));
      EXPECT_EQ(c.future_wind[k], src.slice_channels(channel::windx, 2));
    }
    for (std::size_t k = 0; k < kContextFrames; ++k) EXPECT_EQ(c.context[k], storm.frames[c.frame_start + k]);
  }
}

#include <gtest/gtest.h>

#include <json.hpp>
#include <unistd.h>

#include "support/cli.hpp"
#include "support/fixtures.hpp"
#include "surgecast/clips.hpp"
#include "surgecast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace surgecast;
using cli::quote;

namespace {

const std::string kCli = SURGECAST_CLI;

/// Three rasterized storms of 60 frames (peaks at 30, 25, 34) and one of
/// 29 frames, on an 8x8 grid. Built once for the whole suite.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fixtures::scratch_dir("cli_" + std::to_string(::getpid()));
    write_mesh(root_ / "mesh.14", cli::square_mesh());
    const struct {
      const char* name;
      std::size_t frames, peak;
      double amp;
    } storms[] = {{"storm_a", 60, 30, 1.5}, {"storm_b", 60, 25, 1.0}, {"storm_c", 60, 34, 2.0}, {"short", 29, 14, 1.0}};
    for (const auto& s : storms) {
      cli::write_storm_series(root_ / "nodal" / s.name, cli::square_mesh(), s.frames, s.peak, s.amp);
      const auto r = rasterize(s.name);
      ASSERT_EQ(r.status, 0) << r.err;
    }
  }

  static cli::RunResult rasterize(const std::string& name) {
    const auto in = root_ / "nodal" / name;
    return cli::run(kCli + " rasterize --mesh " + quote(root_ / "mesh.14") + " --zeta " + quote(in / "zeta.sfld") +
                        " --windx " + quote(in / "windx.sfld") + " --windy " + quote(in / "windy.sfld") +
                        " --roi 0,1,0,1 --width 8 --height 8 --region-id square --out " +
                        quote(root_ / "grids" / name),
                    root_);
  }

  static cli::RunResult build(const std::string& grids, const fs::path& out, const std::string& extra = "") {
    return cli::run(kCli + " build-clips --grids " + grids + " --out " + quote(out) + " " + extra, root_);
  }

  static nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(cli::slurp(p)); }

  static std::string grid(const std::string& name) { return (root_ / "grids" / name).string(); }

  static inline fs::path root_;
};

}  // namespace

TEST_F(CliPipeline, RasterizeWritesGridsAndManifest) {
  const auto storm = read_rasterized_storm(root_ / "grids" / "storm_a");
  EXPECT_EQ(storm.zeta.size(), 60u);
  EXPECT_EQ(storm.roi.width, 8u);
  EXPECT_EQ(storm.storm_id, "storm_a");
  EXPECT_EQ(storm.region_id, "square");
  EXPECT_EQ(find_peak_frame(storm.mean_zeta), 30u);
  const auto manifest = read_json(root_ / "grids" / "storm_a" / "manifest.json");
  EXPECT_EQ(manifest.at("subcommand"), "rasterize");
  EXPECT_EQ(manifest.at("config").at("width"), "8");
}

TEST_F(CliPipeline, MissingMeshFails) {
  const auto r = cli::run(kCli + " rasterize --mesh " + quote(root_ / "nope.14") + " --zeta a --windx b --windy c" +
                              " --roi 0,1,0,1 --out " + quote(root_ / "bad"),
                          root_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("error["), std::string::npos) << r.err;
}

TEST_F(CliPipeline, MissingRequiredOptionFails) {
  const auto r = cli::run(kCli + " rasterize --out " + quote(root_ / "bad"), root_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("error[config]"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, ClipCountsAndShortStormWarning) {
  const auto out = root_ / "ds_counts";
  const auto r = build(grid("storm_a") + "," + grid("short") + "," + grid("storm_b"), out, "--seed 1");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.err.find("short"), std::string::npos) << r.err;
  const auto ds = ClipDataset::open(out);
  std::size_t from_a = 0, from_short = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    from_a += ds.entry(i).storm_id == "storm_a";
    from_short += ds.entry(i).storm_id == "short";
  }
  EXPECT_EQ(from_a, 12u);
  EXPECT_EQ(from_short, 0u);
  EXPECT_TRUE(ds.find("storm_a_010"));
  EXPECT_TRUE(ds.find("storm_a_021"));
  EXPECT_FALSE(ds.find("storm_a_022"));
}

TEST_F(CliPipeline, SplitIsReproducibleForASeed) {
  const std::string all = (root_ / "grids").string();
  ASSERT_EQ(build(all, root_ / "ds_seed1a", "--seed 1").status, 0);
  ASSERT_EQ(build(all, root_ / "ds_seed1b", "--seed 1").status, 0);
  EXPECT_EQ(cli::slurp(root_ / "ds_seed1a" / "index.json"), cli::slurp(root_ / "ds_seed1b" / "index.json"));
  const auto split = read_json(root_ / "ds_seed1a" / "index.json").at("split");
  EXPECT_EQ(split.at("test_storms").size(), 1u);
  EXPECT_EQ(split.at("train_storms").size() + split.at("test_storms").size(), 4u);
}

TEST_F(CliPipeline, SingleStormGoesToTraining) {
  const auto out = root_ / "ds_single";
  const auto r = build(grid("storm_a"), out);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const auto ds = ClipDataset::open(out);
  EXPECT_EQ(ds.indices(Partition::train).size(), 12u);
  EXPECT_TRUE(ds.indices(Partition::test).empty());

  // Nothing to evaluate in the empty test partition.
  const auto e = cli::run(kCli + " evaluate --model persistence --data " + quote(out) + " --out " +
                              quote(root_ / "eval_empty"),
                          root_);
  EXPECT_NE(e.status, 0);
  EXPECT_NE(e.err.find("error["), std::string::npos) << e.err;
}

TEST_F(CliPipeline, TrainForecastEvaluateExport) {
  const auto data = root_ / "ds_full";
  ASSERT_EQ(build(grid("storm_a") + "," + grid("storm_b") + "," + grid("storm_c"), data, "--seed 3").status, 0);
  const auto run_dir = root_ / "run";
  auto r = cli::run(kCli + " train --data " + quote(data) + " --out " + quote(run_dir) +
                        " --hidden-dims 3 --epochs 1 --seed 2",
                    root_);
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* f : {"best.ckpt", "last.ckpt", "epochs.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  }

  const auto ds = ClipDataset::open(data);
  const auto test = ds.indices(Partition::test);
  ASSERT_FALSE(test.empty());
  const std::string clip = ds.entry(test.front()).id;
  r = cli::run(kCli + " forecast --checkpoint " + quote(run_dir / "best.ckpt") + " --data " + quote(data) +
                   " --clip " + clip + " --out " + quote(root_ / "fc"),
               root_);
  ASSERT_EQ(r.status, 0) << r.err;
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(root_ / "fc")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 24u);
  EXPECT_TRUE(fs::exists(root_ / "fc" / (clip + "_01.png")));
  EXPECT_TRUE(fs::exists(root_ / "fc" / (clip + "_24.png")));

  r = cli::run(kCli + " evaluate --checkpoint " + quote(run_dir / "best.ckpt") + " --data " + quote(data) +
                   " --out " + quote(root_ / "ev"),
               root_);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto metrics = cli::slurp(root_ / "ev" / "metrics.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(metrics.begin(), metrics.end(), '\n')), 1 + 24 * test.size());
  EXPECT_TRUE(fs::exists(root_ / "ev" / "summary.csv"));
  EXPECT_TRUE(fs::exists(root_ / "ev" / "metrics_meters.csv"));

  r = cli::run(kCli + " evaluate --checkpoint " + quote(run_dir / "best.ckpt") + " --data " + quote(data) +
                   " --clip no_such_clip --out " + quote(root_ / "ev_bad"),
               root_);
  EXPECT_NE(r.status, 0);

  r = cli::run(kCli + " export-frames --data " + quote(data) + " --clip " + clip + " --frames context --out " +
                   quote(root_ / "ex"),
               root_);
  ASSERT_EQ(r.status, 0) << r.err;
  pngs = 0;
  for (const auto& e : fs::directory_iterator(root_ / "ex")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 6u);
}

TEST_F(CliPipeline, FlagsOverrideConfigFile) {
  const auto data = root_ / "ds_cfg";
  ASSERT_EQ(build(grid("storm_a") + "," + grid("storm_b"), data, "--seed 5").status, 0);
  std::ofstream(root_ / "train.conf") << "hidden-dims = 2\nepochs = 1\nlr = 0.5\nbatch-size = 4\n";
  const auto run_dir = root_ / "run_cfg";
  const auto r = cli::run(kCli + " train --config " + quote(root_ / "train.conf") + " --lr 0.002 --data " +
                              quote(data) + " --out " + quote(run_dir) + " --deterministic",
                          root_);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto manifest = read_json(run_dir / "manifest.json");
  const auto& cfg = manifest.at("config");
  EXPECT_EQ(cfg.at("lr"), "0.002");
  EXPECT_EQ(cfg.at("epochs"), "1");
  EXPECT_EQ(cfg.at("batch-size"), "4");
  EXPECT_EQ(cfg.at("dropout"), "0.1");
  EXPECT_EQ(manifest.at("seed"), 0);

  std::ofstream(root_ / "bad.conf") << "epochz = 3\n";
  const auto bad = cli::run(kCli + " train --config " + quote(root_ / "bad.conf") + " --data " + quote(data) +
                                " --out " + quote(root_ / "run_bad"),
                            root_);
  EXPECT_NE(bad.status, 0);
  EXPECT_NE(bad.err.find("error[config]"), std::string::npos) << bad.err;
}

// surgecast command-line driver.
//
// Every subcommand resolves its settings as defaults < config file < flags,
// writes manifest.json into its output directory, then does the work.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "surgecast/surgecast.hpp"

namespace fs = std::filesystem;
using namespace surgecast;

namespace {

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }
void info(const std::string& msg) { std::cerr << msg << '\n'; }

struct Option {
  std::string default_value;
  std::string flag_value;
  CLI::Option* handle = nullptr;
  bool required = false;
};

/// A subcommand whose options are all string-typed keys.
class Command {
 public:
  Command(CLI::App& parent, std::string name, std::string description)
      : name_(std::move(name)), app_(parent.add_subcommand(name_, std::move(description))) {
    app_->add_option("--config", config_path_, "key=value file; flags override its values");
    option("seed", "", "random seed (default: drawn from the system)");
    option("threads", "0", "worker threads (0 = SURGECAST_THREADS or hardware)");
    app_->add_flag("--deterministic", deterministic_, "reproducible outputs (seed defaults to 0)");
  }

  void option(const std::string& key, std::string default_value, const std::string& description,
              bool required = false) {
    auto& o = options_[key];
    o.default_value = std::move(default_value);
    o.required = required;
    o.handle = app_->add_option("--" + key, o.flag_value, description);
    if (!o.default_value.empty()) o.handle->default_str(o.default_value);
  }

  CLI::App* app() const noexcept { return app_; }
  const std::string& name() const noexcept { return name_; }

  /// defaults < config file < explicit flags.
  KeyValueConfig resolve() const {
    KeyValueConfig cfg;
    for (const auto& [k, o] : options_) cfg.set(k, o.default_value);
    cfg.set("deterministic", "false");
    if (!config_path_.empty()) {
      auto file = KeyValueConfig::load(config_path_);
      std::set<std::string> known{"deterministic"};
      for (const auto& [k, o] : options_) known.insert(k);
      file.check_keys(known);
      for (const auto& [k, v] : file.values()) cfg.set(k, v);
    }
    for (const auto& [k, o] : options_) {
      if (o.handle->count() > 0) cfg.set(k, o.flag_value);
    }
    if (deterministic_) cfg.set("deterministic", "true");
    for (const auto& [k, o] : options_) {
      if (o.required && cfg.values().at(k).empty()) {
        throw Error(ErrorKind::config, name_ + ": --" + k + " is required");
      }
    }
    return cfg;
  }

  const std::string& config_path() const noexcept { return config_path_; }

 private:
  std::string name_;
  CLI::App* app_;
  std::map<std::string, Option> options_;
  std::string config_path_;
  bool deterministic_ = false;
};

// --- typed access to resolved settings ---------------------------------------

std::string get_string(const KeyValueConfig& c, const std::string& key) {
  std::string v;
  c.read(key, v);
  return v;
}

template <typename T>
T get(const KeyValueConfig& c, const std::string& key) {
  T v{};
  c.read(key, v);
  return v;
}

std::vector<double> get_doubles(const KeyValueConfig& c, const std::string& key, std::size_t count) {
  std::vector<double> out;
  for (const auto& part : text::split(get_string(c, key), ',')) {
    double v = 0.0;
    if (!text::parse_number(text::trim(part), v)) throw Error(ErrorKind::config, key + ": cannot parse '" + part + "'");
    out.push_back(v);
  }
  if (out.size() != count) {
    throw Error(ErrorKind::config, key + ": expected " + std::to_string(count) + " comma-separated numbers");
  }
  return out;
}

ValueRange get_range(const KeyValueConfig& c, const std::string& key) {
  const auto v = get_doubles(c, key, 2);
  ValueRange r{v[0], v[1]};
  r.validate();
  return r;
}

struct RunContext {
  KeyValueConfig settings;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::size_t threads = 1;
};

RunContext make_context(const Command& cmd) {
  RunContext ctx;
  ctx.settings = cmd.resolve();
  ctx.deterministic = get<bool>(ctx.settings, "deterministic");
  const std::string seed = get_string(ctx.settings, "seed");
  if (!seed.empty()) {
    ctx.seed = get<std::uint64_t>(ctx.settings, "seed");
  } else if (!ctx.deterministic) {
    std::random_device rd;
    ctx.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  ctx.settings.set("seed", std::to_string(ctx.seed));
  ctx.threads = get<std::size_t>(ctx.settings, "threads");
  if (ctx.threads == 0) ctx.threads = default_thread_count();
  return ctx;
}

void write_manifest(const fs::path& out_dir, const Command& cmd, const RunContext& ctx,
                    const nlohmann::json& inputs, const nlohmann::json& outputs) {
  fs::create_directories(out_dir);
  nlohmann::json j;
  j["tool"] = "surgecast";
  j["version"] = SURGECAST_VERSION;
  j["subcommand"] = cmd.name();
  j["seed"] = ctx.seed;
  j["deterministic"] = ctx.deterministic;
  j["config"] = ctx.settings.values();
  if (!cmd.config_path().empty()) j["config_file"] = cmd.config_path();
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw Error(ErrorKind::io, "cannot write " + (out_dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

Colormap resolve_colormap(const std::string& path) {
  return path.empty() ? Colormap::default_map() : Colormap::load(path);
}

std::string two_digits(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", k);
  return buf;
}

std::vector<std::size_t> select_clips(const ClipDataset& ds, const std::string& clip_ids, const std::string& partition) {
  if (clip_ids.empty()) return ds.indices(parse_partition(partition));
  std::vector<std::size_t> out;
  for (const auto& id : text::split(clip_ids, ',')) {
    const auto i = ds.find(text::trim(id));
    if (!i) throw Error(ErrorKind::value, "clip '" + std::string(text::trim(id)) + "' is not in the dataset");
    out.push_back(*i);
  }
  return out;
}

Model<float> load_model(const Checkpoint& ck) { return Model<float>{ck.meta.network, ck.params}; }

void check_dataset_matches(const Checkpoint& ck, const ClipDataset& ds) {
  if (ck.meta.height != ds.header().height || ck.meta.width != ds.header().width) {
    warn("checkpoint was trained on " + std::to_string(ck.meta.height) + "x" + std::to_string(ck.meta.width) +
         " frames; dataset frames are " + std::to_string(ds.header().height) + "x" +
         std::to_string(ds.header().width));
  }
  if (!(ck.meta.ranges == ds.header().ranges) || ck.meta.colormap != ds.header().colormap) {
    warn("checkpoint and dataset use different value ranges or colormaps");
  }
}

// --- subcommands ---------------------------------------------------------------

void run_rasterize(const Command& cmd) {
  const auto ctx = make_context(cmd);
  const auto& s = ctx.settings;
  const fs::path out = get_string(s, "out");
  const auto roi_v = get_doubles(s, "roi", 4);
  Roi roi{roi_v[0], roi_v[1], roi_v[2], roi_v[3], get<std::size_t>(s, "width"), get<std::size_t>(s, "height")};
  roi.validate();
  std::string storm_id = get_string(s, "storm-id");
  if (storm_id.empty()) storm_id = fs::absolute(out).lexically_normal().filename().string();
  if (storm_id.empty()) storm_id = fs::absolute(out).lexically_normal().parent_path().filename().string();

  write_manifest(out, cmd, ctx,
                 {{"mesh", get_string(s, "mesh")},
                  {"zeta", get_string(s, "zeta")},
                  {"windx", get_string(s, "windx")},
                  {"windy", get_string(s, "windy")}},
                 {{"grids", {"zeta.sfld", "windx.sfld", "windy.sfld", "depth.sfld"}}, {"sidecar", kGridSidecar}});

  const auto mesh = load_mesh(get_string(s, "mesh"));
  const auto zeta = load_series(get_string(s, "zeta"), mesh);
  const auto windx = load_series(get_string(s, "windx"), mesh);
  const auto windy = load_series(get_string(s, "windy"), mesh);
  const auto index = build_index(mesh, roi);
  const auto storm = rasterize_storm(mesh, index, zeta, windx, windy, get<double>(s, "background"), storm_id,
                                     get_string(s, "region-id"));
  write_rasterized_storm(out, storm);
  std::size_t covered = 0;
  for (auto t : index.triangle) covered += t != kMiss;
  info("rasterized " + std::to_string(storm.frame_count()) + " frames of " + storm_id + " (" +
       std::to_string(covered) + "/" + std::to_string(index.triangle.size()) + " pixels covered)");
}

std::vector<fs::path> find_storm_dirs(const std::string& list) {
  std::vector<fs::path> out;
  for (const auto& item : text::split(list, ',')) {
    const fs::path p(std::string(text::trim(item)));
    if (fs::exists(p / kGridSidecar)) {
      out.push_back(p);
      continue;
    }
    if (!fs::is_directory(p)) throw Error(ErrorKind::io, "no storm grids at " + p.string());
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_directory() && fs::exists(e.path() / kGridSidecar)) found.push_back(e.path());
    }
    if (found.empty()) throw Error(ErrorKind::io, "no storm grids under " + p.string());
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

void run_build_clips(const Command& cmd) {
  const auto ctx = make_context(cmd);
  const auto& s = ctx.settings;
  const fs::path out = get_string(s, "out");
  VariableRanges ranges{get_range(s, "zeta-range"), get_range(s, "windx-range"), get_range(s, "windy-range"),
                        get_range(s, "depth-range")};
  const auto cmap = resolve_colormap(get_string(s, "colormap"));
  const auto dirs = find_storm_dirs(get_string(s, "grids"));

  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& d : dirs) inputs.push_back(d.string());
  write_manifest(out, cmd, ctx, {{"storms", inputs}}, {{"index", ClipDataset::kIndexName}});

  std::vector<RasterizedStorm> storms(dirs.size());
  parallel_for(dirs.size(), ctx.threads, [&](std::size_t i) { storms[i] = read_rasterized_storm(dirs[i]); });
  std::vector<std::vector<Clip>> per_storm(storms.size());
  parallel_for(storms.size(), ctx.threads, [&](std::size_t i) {
    per_storm[i] = build_storm_clips(encode_storm(storms[i], ranges, cmap));
  });

  std::vector<std::string> ids;
  std::vector<Clip> clips;
  const std::size_t height = storms.front().roi.height, width = storms.front().roi.width;
  for (std::size_t i = 0; i < storms.size(); ++i) {
    const auto& st = storms[i];
    if (st.roi.height != height || st.roi.width != width) {
      throw Error(ErrorKind::shape, dirs[i].string() + ": grid size differs from the first storm");
    }
    ids.push_back(st.storm_id);
    if (per_storm[i].empty()) {
      const auto w = event_window(find_peak_frame(st.mean_zeta), st.frame_count());
      warn(st.storm_id + ": event window has " + std::to_string(w.length()) + " frames (< " +
           std::to_string(kClipFrames) + "); no clips");
    }
    for (auto& c : per_storm[i]) clips.push_back(std::move(c));
  }

  SplitManifest split;
  if (ids.size() >= 2) {
    split = split_storms(ids, ctx.seed, get<double>(s, "test-fraction"));
  } else {
    warn("only one storm; every clip goes to the training partition");
    split.seed = ctx.seed;
    split.train_storms = ids;
  }
  write_dataset(out, clips, split, ranges, cmap, height, width);
  info("wrote " + std::to_string(clips.size()) + " clips from " + std::to_string(ids.size()) + " storms (" +
       std::to_string(split.test_storms.size()) + " test, " + std::to_string(split.validation_storms.size()) +
       " validation)");
}

void run_train(const Command& cmd) {
  const auto ctx = make_context(cmd);
  const auto& s = ctx.settings;
  const fs::path out = get_string(s, "out");
  const fs::path data = get_string(s, "data");

  nn::NetworkConfig net;
  net.hidden_dims = KeyValueConfig::parse_size_list(get_string(s, "hidden-dims"), "hidden-dims");
  net.kernel_size = get<std::size_t>(s, "kernel-size");
  net.dropout_p = get<double>(s, "dropout");
  net.validate();

  TrainConfig tc;
  tc.batch_size = get<std::size_t>(s, "batch-size");
  tc.lr = get<double>(s, "lr");
  tc.epochs = get<std::size_t>(s, "epochs");
  tc.teacher_forcing_p = get<double>(s, "teacher-forcing");
  tc.plateau_patience = get<std::size_t>(s, "patience");
  tc.plateau_factor = get<double>(s, "lr-factor");
  tc.min_lr = get<double>(s, "min-lr");
  tc.seed = derive_seed(ctx.seed, 0x747261696eULL);
  tc.threads = ctx.threads;
  tc.record_wall_time = !ctx.deterministic;
  tc.validate();

  write_manifest(out, cmd, ctx, {{"data", data.string()}},
                 {{"checkpoints", {"best.ckpt", "last.ckpt"}}, {"log", "epochs.csv"}});

  auto dataset = std::make_shared<const ClipDataset>(ClipDataset::open(data));
  DatasetClips train(dataset, Partition::train);
  DatasetClips validation(dataset, Partition::validation);
  if (train.size() == 0) throw Error(ErrorKind::value, "train: dataset has no training clips");
  const bool val_from_train = validation.size() == 0;
  if (val_from_train) warn("no validation storms; validating on the training clips");

  CheckpointMeta meta{net, dataset->header().ranges, dataset->header().colormap, dataset->header().height,
                      dataset->header().width};
  Model<float> model{net, nn::initialize<float>(net, derive_seed(ctx.seed, 0x696e6974ULL))};
  info("training " + std::to_string(model.params.parameter_count()) + " parameters on " +
       std::to_string(train.size()) + " clips");
  const auto result = train_run(out, model, meta, train, val_from_train ? train : validation, tc);
  info("best validation loss " + text::format_double(result.best_val_loss));
}

void run_forecast(const Command& cmd) {
  const auto ctx = make_context(cmd);
  const auto& s = ctx.settings;
  const fs::path out = get_string(s, "out");
  write_manifest(out, cmd, ctx, {{"checkpoint", get_string(s, "checkpoint")}, {"data", get_string(s, "data")}},
                 {{"frames", "{clip}_{step:02}.png"}});

  const auto ck = read_checkpoint(get_string(s, "checkpoint"));
  const auto ds = ClipDataset::open(get_string(s, "data"));
  check_dataset_matches(ck, ds);
  const auto model = load_model(ck);
  const auto selected = select_clips(ds, get_string(s, "clip"), get_string(s, "partition"));
  if (selected.empty()) throw Error(ErrorKind::value, "forecast: no clips selected");
  parallel_for(selected.size(), ctx.threads, [&](std::size_t i) {
    const auto clip = ds.load(selected[i]);
    const auto result = forecast_clip<float>(model, clip, RolloutConfig{});
    for (std::size_t k = 0; k < result.predictions.size(); ++k) {
      png::write_rgb_frame(out / (clip.id + "_" + two_digits(k + 1) + ".png"), result.predictions[k]);
    }
  });
  info("forecast " + std::to_string(selected.size()) + " clips");
}

void run_evaluate(const Command& cmd) {
  const auto ctx = make_context(cmd);
  const auto& s = ctx.settings;
  const fs::path out = get_string(s, "out");
  const std::string model_kind = get_string(s, "model");
  if (model_kind != "checkpoint" && model_kind != "persistence") {
    throw Error(ErrorKind::config, "evaluate: --model must be checkpoint or persistence");
  }
  write_manifest(out, cmd, ctx, {{"checkpoint", get_string(s, "checkpoint")}, {"data", get_string(s, "data")}},
                 {{"metrics", "metrics.csv"}, {"summary", "summary.csv"}, {"meters", "metrics_meters.csv"}});

  const auto ds = ClipDataset::open(get_string(s, "data"));
  const auto selected = select_clips(ds, get_string(s, "clip"), get_string(s, "partition"));
  if (selected.empty()) throw Error(ErrorKind::value, "evaluate: no clips to evaluate");
  std::vector<Clip> clips(selected.size());
  parallel_for(selected.size(), ctx.threads, [&](std::size_t i) { clips[i] = ds.load(selected[i]); });

  const auto cmap = ds.colormap();
  EvaluationReport report;
  if (model_kind == "persistence") {
    std::vector<std::vector<Tensor3<float>>> predictions;
    for (const auto& c : clips) predictions.push_back(persistence_forecast(c));
    report.rows = evaluate_predictions(clips, predictions);
    report.summary = summarize(report.rows);
    report.meters = evaluate_meters(clips, predictions, cmap, ds.header().ranges.zeta);
  } else {
    if (get_string(s, "checkpoint").empty()) throw Error(ErrorKind::config, "evaluate: --checkpoint is required");
    const auto ck = read_checkpoint(get_string(s, "checkpoint"));
    check_dataset_matches(ck, ds);
    report = evaluate_run(load_model(ck), clips, cmap, ds.header().ranges.zeta, ctx.threads);
  }
  write_metrics_csv(out / "metrics.csv", report.rows);
  write_summary_csv(out / "summary.csv", report.summary);
  write_meters_csv(out / "metrics_meters.csv", report.meters);
  info("evaluated " + std::to_string(clips.size()) + " clips");
}

void run_export_frames(const Command& cmd) {
  const auto ctx = make_context(cmd);
  const auto& s = ctx.settings;
  const fs::path out = get_string(s, "out");
  const std::string which = get_string(s, "frames");
  if (which != "target" && which != "context") {
    throw Error(ErrorKind::config, "export-frames: --frames must be target or context");
  }
  write_manifest(out, cmd, ctx, {{"data", get_string(s, "data")}}, {{"frames", "{clip}_{step:02}.png"}});

  const auto ds = ClipDataset::open(get_string(s, "data"));
  const auto selected = select_clips(ds, get_string(s, "clip"), get_string(s, "partition"));
  if (selected.empty()) throw Error(ErrorKind::value, "export-frames: no clips selected");
  parallel_for(selected.size(), ctx.threads, [&](std::size_t i) {
    const auto clip = ds.load(selected[i]);
    if (which == "target") {
      for (std::size_t k = 0; k < clip.target.size(); ++k) {
        png::write_rgb_frame(out / (clip.id + "_" + two_digits(k + 1) + ".png"), clip.target[k]);
      }
    } else {
      for (std::size_t k = 0; k < clip.context.size(); ++k) {
        png::write_rgb_frame(out / (clip.id + "_ctx" + two_digits(k + 1) + ".png"),
                             clip.context[k].slice_channels(0, kRgbChannels));
      }
    }
  });
  info("exported " + std::to_string(selected.size()) + " clips");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surgecast: storm surge frame forecasting with ConvLSTM"};
  app.set_version_flag("--version", std::string(SURGECAST_VERSION));
  app.require_subcommand(1);

  Command rasterize(app, "rasterize", "interpolate nodal mesh series onto an ROI pixel grid");
  rasterize.option("mesh", "", "ASCII mesh file", true);
  rasterize.option("zeta", "", "zeta SFLD series", true);
  rasterize.option("windx", "", "windx SFLD series", true);
  rasterize.option("windy", "", "windy SFLD series", true);
  rasterize.option("roi", "", "lon_min,lon_max,lat_min,lat_max", true);
  rasterize.option("width", "256", "pixels per row");
  rasterize.option("height", "256", "pixel rows");
  rasterize.option("background", "0", "value for dry and uncovered pixels");
  rasterize.option("storm-id", "", "storm identifier (default: output directory name)");
  rasterize.option("region-id", "default", "region identifier");
  rasterize.option("out", "", "output directory", true);

  Command build(app, "build-clips", "encode grids and cut peak-centered training clips");
  build.option("grids", "", "comma-separated storm grid directories or directories containing them", true);
  build.option("colormap", "", "colormap table (default: built-in ramp)");
  build.option("zeta-range", "0,2.5", "zeta lo,hi in m");
  build.option("windx-range", "-40,20", "windx lo,hi in m/s");
  build.option("windy-range", "-30,30", "windy lo,hi in m/s");
  build.option("depth-range", "-20,50", "depth lo,hi in m");
  build.option("test-fraction", "0.1", "fraction of storms held out for testing");
  build.option("out", "", "dataset directory", true);

  Command train(app, "train", "train a ConvLSTM forecaster on a clip dataset");
  train.option("data", "", "clip dataset directory", true);
  train.option("out", "", "run directory", true);
  train.option("hidden-dims", "128,128,64", "hidden channels per layer");
  train.option("kernel-size", "3", "odd convolution kernel size");
  train.option("dropout", "0.1", "dropout between layers");
  train.option("batch-size", "3", "clips per optimizer step");
  train.option("lr", "0.001", "initial learning rate");
  train.option("epochs", "50", "training epochs");
  train.option("teacher-forcing", "0.5", "probability of feeding the true previous frame");
  train.option("patience", "3", "plateau epochs before the learning rate drops");
  train.option("lr-factor", "0.5", "learning rate multiplier on plateau");
  train.option("min-lr", "1e-5", "learning rate floor");

  Command forecast(app, "forecast", "roll a trained model over clips and write PNG frames");
  forecast.option("checkpoint", "", "checkpoint file", true);
  forecast.option("data", "", "clip dataset directory", true);
  forecast.option("clip", "", "comma-separated clip ids (default: the whole partition)");
  forecast.option("partition", "test", "train, validation, test or all");
  forecast.option("out", "", "output directory", true);

  Command evaluate(app, "evaluate", "per-step forecast metrics over a partition");
  evaluate.option("checkpoint", "", "checkpoint file");
  evaluate.option("model", "checkpoint", "checkpoint or persistence");
  evaluate.option("data", "", "clip dataset directory", true);
  evaluate.option("clip", "", "comma-separated clip ids (default: the whole partition)");
  evaluate.option("partition", "test", "train, validation, test or all");
  evaluate.option("out", "", "output directory", true);

  Command exporter(app, "export-frames", "write clip frames as PNG images");
  exporter.option("data", "", "clip dataset directory", true);
  exporter.option("clip", "", "comma-separated clip ids (default: the whole partition)");
  exporter.option("partition", "test", "train, validation, test or all");
  exporter.option("frames", "target", "target or context");
  exporter.option("out", "", "output directory", true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[config]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (rasterize.app()->parsed()) run_rasterize(rasterize);
    else if (build.app()->parsed()) run_build_clips(build);
    else if (train.app()->parsed()) run_train(train);
    else if (forecast.app()->parsed()) run_forecast(forecast);
    else if (evaluate.app()->parsed()) run_evaluate(evaluate);
    else if (exporter.app()->parsed()) run_export_frames(exporter);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

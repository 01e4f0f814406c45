// Writes a synthetic mesh and nodal storm series in the formats the
// `surgecast rasterize` subcommand consumes.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "surgecast/surgecast.hpp"

namespace fs = std::filesystem;
using namespace surgecast;

int main(int argc, char** argv) {
  CLI::App app{"surgecast-synth: synthetic storm surge series for demos and tests"};
  std::string out;
  std::size_t storms = 30, frames = 60, mesh_nodes = 41;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--storms", storms, "number of storms")->capture_default_str();
  app.add_option("--frames", frames, "frames per storm")->capture_default_str();
  app.add_option("--mesh-nodes", mesh_nodes, "mesh nodes per side")->capture_default_str();
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[config]: " << e.what() << '\n';
    return 2;
  }

  try {
    synthetic::Config cfg;
    cfg.frames = frames;
    cfg.mesh_nx = cfg.mesh_ny = mesh_nodes;
    if (frames < 1 || mesh_nodes < 2) throw Error(ErrorKind::config, "need at least 1 frame and 2 mesh nodes");
    fs::create_directories(out);
    const auto mesh = synthetic::make_mesh(cfg);
    write_mesh(fs::path(out) / "mesh.14", mesh);

    nlohmann::json j;
    j["mesh"] = "mesh.14";
    j["roi"] = text::format_double(cfg.roi.lon_min) + "," + text::format_double(cfg.roi.lon_max) + "," +
               text::format_double(cfg.roi.lat_min) + "," + text::format_double(cfg.roi.lat_max);
    j["region_id"] = cfg.region_id;
    j["seed"] = seed;
    auto list = nlohmann::json::array();
    for (const auto& s : synthetic::make_nodal_storms(cfg, mesh, storms, seed)) {
      const fs::path dir = fs::path(out) / s.storm_id;
      fs::create_directories(dir);
      write_series(dir / "zeta.sfld", s.zeta);
      write_series(dir / "windx.sfld", s.windx);
      write_series(dir / "windy.sfld", s.windy);
      list.push_back({{"storm_id", s.storm_id}, {"peak_frame", s.track.peak_frame}});
    }
    j["storms"] = std::move(list);
    std::ofstream meta(fs::path(out) / "synth.json");
    if (!meta) throw Error(ErrorKind::io, "cannot write synth.json");
    meta << j.dump(2) << '\n';
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "surgecast/ingest.hpp"

namespace cli {

namespace fs = std::filesystem;
using namespace surgecast;

struct RunResult {
  int status = -1;
  std::string err;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs a shell command line, capturing stderr; stdout is discarded.
inline RunResult run(const std::string& command_line, const fs::path& scratch) {
  const auto err_path = scratch / "stderr.txt";
  const std::string full = command_line + " > /dev/null 2> '" + err_path.string() + "'";
  const int raw = std::system(full.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = slurp(err_path);
  return r;
}

/// Two triangles over the unit square, node depths 0 to 30 m.
inline Mesh square_mesh() {
  Mesh m;
  m.title = "square";
  m.lon = {0, 1, 1, 0};
  m.lat = {0, 0, 1, 1};
  m.depth = {0, 10, 20, 30};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

/// Writes zeta/windx/windy series for a storm whose mean zeta peaks at
/// frame `peak`, hourly output.
inline void write_storm_series(const fs::path& dir, const Mesh& mesh, std::size_t frames, std::size_t peak,
                               double amplitude) {
  fs::create_directories(dir);
  auto make = [&](const std::string& var, auto value) {
    NodalSeries s;
    s.variable = var;
    s.node_count = mesh.node_count();
    for (std::size_t t = 0; t < frames; ++t) {
      s.times.push_back(3600.0 * static_cast<double>(t));
      for (std::size_t n = 0; n < mesh.node_count(); ++n) s.values.push_back(static_cast<float>(value(t, n)));
    }
    write_series(dir / (var + ".sfld"), s);
  };
  const auto pulse = [&](std::size_t t) {
    const double d = (static_cast<double>(t) - static_cast<double>(peak)) / 6.0;
    return std::exp(-d * d);
  };
  make("zeta", [&](std::size_t t, std::size_t n) { return 0.2 + amplitude * pulse(t) * (0.6 + 0.4 * mesh.lon[n]); });
  make("windx", [&](std::size_t t, std::size_t n) { return -10.0 + 15.0 * pulse(t) * mesh.lat[n]; });
  make("windy", [&](std::size_t t, std::size_t n) { return 5.0 * pulse(t) - 2.0 * mesh.lon[n]; });
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace cli

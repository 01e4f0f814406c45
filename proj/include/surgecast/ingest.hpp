#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "surgecast/binary_io.hpp"
#include "surgecast/error.hpp"
#include "surgecast/text.hpp"

namespace surgecast {

using Triangle = std::array<std::uint32_t, 3>;

/// Unstructured triangular grid. Depth is positive below datum.
struct Mesh {
  std::string title;
  std::vector<double> lon;
  std::vector<double> lat;
  std::vector<double> depth;
  std::vector<Triangle> triangles;  // 0-based node ids

  std::size_t node_count() const noexcept { return lon.size(); }
  std::size_t element_count() const noexcept { return triangles.size(); }

  /// Twice the signed area of triangle `e` (positive when counter-clockwise).
  double signed_area2(std::size_t e) const noexcept {
    const auto& t = triangles[e];
    return (lon[t[1]] - lon[t[0]]) * (lat[t[2]] - lat[t[0]]) -
           (lon[t[2]] - lon[t[0]]) * (lat[t[1]] - lat[t[0]]);
  }
};

/// Throws on any violated mesh invariant. Degenerate elements are reported
/// all at once with their 1-based ids.
inline void validate_mesh(const Mesh& mesh) {
  const std::size_t n = mesh.node_count();
  if (mesh.lat.size() != n || mesh.depth.size() != n) {
    throw Error(ErrorKind::shape, "mesh: per-node arrays differ in length");
  }
  if (n < 3) throw Error(ErrorKind::value, "mesh: need at least 3 nodes");
  if (mesh.element_count() < 1) throw Error(ErrorKind::value, "mesh: need at least 1 element");

  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    for (auto id : mesh.triangles[e]) {
      if (id >= n) {
        throw Error(ErrorKind::index_range, "mesh: element " + std::to_string(e + 1) +
                                                " references node " + std::to_string(id + 1) +
                                                " but node_count is " + std::to_string(n));
      }
    }
  }

  const auto [lon_lo, lon_hi] = std::minmax_element(mesh.lon.begin(), mesh.lon.end());
  const auto [lat_lo, lat_hi] = std::minmax_element(mesh.lat.begin(), mesh.lat.end());
  const double scale = std::max(*lon_hi - *lon_lo, *lat_hi - *lat_lo);
  const double tol = 1e-12 * scale * scale;

  std::vector<std::size_t> degenerate;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (std::abs(mesh.signed_area2(e)) <= tol) degenerate.push_back(e + 1);
  }
  if (!degenerate.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < degenerate.size(); ++i) {
      if (i) ids += ",";
      ids += std::to_string(degenerate[i]);
    }
    throw Error(ErrorKind::degenerate, "mesh: degenerate elements: " + ids);
  }
}

namespace detail {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::vector<std::string_view> tokens(std::size_t expected_min) {
    if (!std::getline(in_, line_)) fail("unexpected end of file");
    ++line_no_;
    auto toks = text::split_whitespace(line_);
    if (toks.size() < expected_min) fail("expected at least " + std::to_string(expected_min) + " fields");
    return toks;
  }

  std::string raw_line() {
    if (!std::getline(in_, line_)) fail("unexpected end of file");
    ++line_no_;
    return line_;
  }

  template <typename T>
  T number(std::string_view tok) {
    T v{};
    if (!text::parse_number(tok, v)) fail("cannot parse '" + std::string(tok) + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::parse, source_ + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

/// Parses the ASCII grid layout: title line, `<elements> <nodes>`, node
/// records `<id> <lon> <lat> <depth>`, then element records `<id> 3 <n1> <n2> <n3>`.
/// Anything after the element block (e.g. boundary sections) is ignored.
inline Mesh parse_mesh(std::istream& in, const std::string& source = "<mesh>") {
  detail::LineReader reader(in, source);
  Mesh mesh;
  mesh.title = reader.raw_line();
  if (!mesh.title.empty() && mesh.title.back() == '\r') mesh.title.pop_back();

  auto header = reader.tokens(2);
  const auto element_count = reader.number<std::uint64_t>(header[0]);
  const auto node_count = reader.number<std::uint64_t>(header[1]);

  mesh.lon.resize(node_count);
  mesh.lat.resize(node_count);
  mesh.depth.resize(node_count);
  for (std::uint64_t i = 0; i < node_count; ++i) {
    auto t = reader.tokens(4);
    if (reader.number<std::uint64_t>(t[0]) != i + 1) {
      reader.fail("node ids must be consecutive from 1; expected " + std::to_string(i + 1));
    }
    mesh.lon[i] = reader.number<double>(t[1]);
    mesh.lat[i] = reader.number<double>(t[2]);
    mesh.depth[i] = reader.number<double>(t[3]);
    if (!std::isfinite(mesh.lon[i]) || !std::isfinite(mesh.lat[i]) || !std::isfinite(mesh.depth[i])) {
      reader.fail("non-finite node field");
    }
  }

  mesh.triangles.resize(element_count);
  for (std::uint64_t e = 0; e < element_count; ++e) {
    auto t = reader.tokens(5);
    if (reader.number<std::uint64_t>(t[0]) != e + 1) {
      reader.fail("element ids must be consecutive from 1; expected " + std::to_string(e + 1));
    }
    if (reader.number<std::uint64_t>(t[1]) != 3) reader.fail("only triangular elements are supported");
    for (int k = 0; k < 3; ++k) {
      const auto id = reader.number<std::uint64_t>(t[2 + k]);
      if (id < 1 || id > node_count) {
        throw Error(ErrorKind::index_range, source + ": element " + std::to_string(e + 1) +
                                                " references node " + std::to_string(id) +
                                                " outside [1, " + std::to_string(node_count) + "]");
      }
      mesh.triangles[e][k] = static_cast<std::uint32_t>(id - 1);
    }
  }

  validate_mesh(mesh);
  return mesh;
}

inline Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open mesh: " + path.string());
  return parse_mesh(in, path.string());
}

inline void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << (mesh.title.empty() ? "surgecast mesh" : mesh.title) << '\n';
  out << mesh.element_count() << ' ' << mesh.node_count() << '\n';
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    out << (i + 1) << ' ' << text::format_double(mesh.lon[i]) << ' '
        << text::format_double(mesh.lat[i]) << ' ' << text::format_double(mesh.depth[i]) << '\n';
  }
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    out << (e + 1) << " 3 " << (t[0] + 1) << ' ' << (t[1] + 1) << ' ' << (t[2] + 1) << '\n';
  }
}

inline void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  write_mesh(out, mesh);
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

inline constexpr double kDefaultFillValue = -99999.0;

/// Per-variable time-major nodal field.
struct NodalSeries {
  std::string variable;
  std::vector<double> times;   // seconds since simulation start
  std::size_t node_count = 0;
  std::vector<float> values;   // [n_times x node_count]
  double fill_value = kDefaultFillValue;

  std::size_t time_count() const noexcept { return times.size(); }

  std::span<const float> row(std::size_t t) const {
    return {values.data() + t * node_count, node_count};
  }
  std::span<float> row(std::size_t t) { return {values.data() + t * node_count, node_count}; }

  bool is_fill(float v) const noexcept { return static_cast<double>(v) == fill_value; }

  friend bool operator==(const NodalSeries&, const NodalSeries&) = default;
};

inline bool is_known_variable(std::string_view name) {
  return name == "zeta" || name == "windx" || name == "windy" || name == "depth";
}

inline void validate_series(const NodalSeries& s) {
  if (!is_known_variable(s.variable)) {
    throw Error(ErrorKind::value, "series: unknown variable '" + s.variable + "'");
  }
  if (s.values.size() != s.times.size() * s.node_count) {
    throw Error(ErrorKind::shape, "series: values do not match n_times x n_nodes");
  }
  for (std::size_t t = 1; t < s.times.size(); ++t) {
    if (!(s.times[t] > s.times[t - 1])) {
      throw Error(ErrorKind::value, "series: times not strictly increasing at index " + std::to_string(t));
    }
  }
  for (float v : s.values) {
    if (!s.is_fill(v) && !std::isfinite(v)) {
      throw Error(ErrorKind::value, "series: non-finite value");
    }
  }
}

inline constexpr std::uint32_t kSeriesVersion = 1;

inline void write_series(const std::filesystem::path& path, const NodalSeries& s) {
  validate_series(s);
  io::BinaryWriter w(path);
  w.magic("SFLD");
  w.scalar<std::uint32_t>(kSeriesVersion);
  w.scalar<std::uint16_t>(static_cast<std::uint16_t>(s.variable.size()));
  w.bytes(s.variable.data(), s.variable.size());
  w.scalar<std::uint64_t>(s.times.size());
  w.scalar<std::uint64_t>(s.node_count);
  w.scalar<double>(s.fill_value);
  w.array<double>(s.times);
  w.array<float>(s.values);
  w.close();
}

/// Reads an SFLD file without reference to a mesh (gridded outputs use
/// n_nodes = H*W).
inline NodalSeries read_series(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("SFLD");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kSeriesVersion) {
    throw Error(ErrorKind::format, path.string() + ": unsupported SFLD version " + std::to_string(version));
  }
  NodalSeries s;
  s.variable = r.string(r.scalar<std::uint16_t>());
  const auto n_times = r.scalar<std::uint64_t>();
  s.node_count = r.scalar<std::uint64_t>();
  s.fill_value = r.scalar<double>();
  s.times.resize(n_times);
  r.array<double>(s.times);
  s.values.resize(n_times * s.node_count);
  r.array<float>(s.values);
  if (!r.at_end()) throw Error(ErrorKind::format, path.string() + ": trailing bytes after the value block");
  validate_series(s);
  return s;
}

inline NodalSeries load_series(const std::filesystem::path& path, const Mesh& mesh) {
  NodalSeries s = read_series(path);
  if (s.node_count != mesh.node_count()) {
    throw Error(ErrorKind::shape, path.string() + ": n_nodes " + std::to_string(s.node_count) +
                                      " does not match mesh node_count " +
                                      std::to_string(mesh.node_count()));
  }
  return s;
}

}  // namespace surgecast

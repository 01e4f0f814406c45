#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgecast/binary_io.hpp"
#include "surgecast/clips.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/error.hpp"
#include "surgecast/nn/network.hpp"

namespace surgecast {

/// Everything needed to rebuild a model and interpret its outputs.
struct CheckpointMeta {
  nn::NetworkConfig network;
  VariableRanges ranges;
  std::vector<ControlPoint> colormap = Colormap::default_map().points();
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  CheckpointMeta meta;
  nn::NetworkParams<float> params;
};

inline nlohmann::json network_to_json(const nn::NetworkConfig& c) {
  return {{"hidden_dims", c.hidden_dims},
          {"kernel_size", c.kernel_size},
          {"input_channels", c.input_channels},
          {"output_channels", c.output_channels},
          {"dropout_p", c.dropout_p}};
}

inline nn::NetworkConfig network_from_json(const nlohmann::json& j) {
  nn::NetworkConfig c;
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.input_channels = j.at("input_channels").get<std::size_t>();
  c.output_channels = j.at("output_channels").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.validate();
  return c;
}

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// SSCK layout: magic, u32 version, u32 JSON length + JSON config, then one
/// record per parameter in sorted-name order: u16 name length, name, u8 rank,
/// u32 dims[rank], f32 data.
inline void write_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                             const nn::NetworkParams<float>& params) {
  nlohmann::json j;
  j["network"] = network_to_json(meta.network);
  j["ranges"] = ranges_to_json(meta.ranges);
  j["colormap"] = colormap_to_json(Colormap(meta.colormap));
  j["grid"] = {{"height", meta.height}, {"width", meta.width}};
  const std::string config = j.dump();

  io::BinaryWriter w(path);
  w.magic("SSCK");
  w.scalar<std::uint32_t>(kCheckpointVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.bytes(config.data(), config.size());
  for (const auto& v : params.views()) {
    w.scalar<std::uint16_t>(static_cast<std::uint16_t>(v.name.size()));
    w.bytes(v.name.data(), v.name.size());
    w.scalar<std::uint8_t>(static_cast<std::uint8_t>(v.dims.size()));
    for (auto d : v.dims) w.scalar<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.array<float>(v.data);
  }
  w.close();
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("SSCK");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::format, path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(r.string(r.scalar<std::uint32_t>()));
    ck.meta.network = network_from_json(j.at("network"));
    ck.meta.ranges = ranges_from_json(j.at("ranges"));
    ck.meta.colormap = colormap_from_json(j.at("colormap")).points();
    ck.meta.height = j.at("grid").at("height").get<std::size_t>();
    ck.meta.width = j.at("grid").at("width").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": bad checkpoint config: " + e.what());
  }
  ck.params = nn::NetworkParams<float>::zeros(ck.meta.network);
  std::map<std::string, nn::ParamView<float>> slots;
  for (auto& v : ck.params.views()) slots.emplace(v.name, v);

  std::size_t seen = 0;
  while (!r.at_end()) {
    const std::string name = r.string(r.scalar<std::uint16_t>());
    const auto rank = r.scalar<std::uint8_t>();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.scalar<std::uint32_t>();
    auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorKind::format, path.string() + ": unexpected parameter '" + name + "'");
    if (dims != it->second.dims) {
      throw Error(ErrorKind::shape, path.string() + ": parameter '" + name + "' has the wrong shape");
    }
    r.array<float>(it->second.data);
    ++seen;
  }
  if (seen != slots.size()) {
    throw Error(ErrorKind::format, path.string() + ": expected " + std::to_string(slots.size()) +
                                       " parameters, found " + std::to_string(seen));
  }
  return ck;
}

}  // namespace surgecast

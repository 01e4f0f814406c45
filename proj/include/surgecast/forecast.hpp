#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surgecast/clips.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/error.hpp"
#include "surgecast/nn/network.hpp"
#include "surgecast/random.hpp"
#include "surgecast/tensor.hpp"

namespace surgecast {

template <typename T>
struct Model {
  nn::NetworkConfig config;
  nn::NetworkParams<T> params;
};

struct RolloutConfig {
  std::size_t horizon = kTargetFrames;
  double teacher_forcing_p = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (horizon < 1) throw Error(ErrorKind::config, "rollout: horizon must be >= 1");
    if (!(teacher_forcing_p >= 0.0 && teacher_forcing_p <= 1.0)) {
      throw Error(ErrorKind::config, "rollout: teacher_forcing_p must be in [0, 1]");
    }
  }
};

/// Model input for one forecast step: [rgb, windx, windy, depth].
template <typename T>
Tensor3<T> assemble_step_input(const Tensor3<T>& rgb, const Tensor3<T>& wind, const Tensor3<T>& bathymetry) {
  if (rgb.channels() != kRgbChannels || wind.channels() != 2 || bathymetry.channels() != 1) {
    throw Error(ErrorKind::shape, "step input: expected 3 rgb, 2 wind and 1 depth channel");
  }
  const Tensor3<T>* parts[] = {&rgb, &wind, &bathymetry};
  return concat_channels<T>(parts);
}

template <typename T>
struct WarmupResult {
  std::vector<nn::CellState<T>> states;
  Tensor3<T> last_rgb;  // RGB channels of the final context frame
};

/// Runs the stack over the context frames from zero states.
template <typename T>
WarmupResult<T> warmup(const Model<T>& model, std::span<const Tensor3<T>> context, nn::Dropout* dropout = nullptr,
                       nn::Tape<T>* tape = nullptr) {
  if (context.size() != kContextFrames) {
    throw Error(ErrorKind::shape, "warmup: expected " + std::to_string(kContextFrames) + " context frames, got " +
                                      std::to_string(context.size()));
  }
  WarmupResult<T> out{nn::zero_states<T>(model.config, context.front().height(), context.front().width()), {}};
  for (const auto& frame : context) {
    nn::forward_step(model.config, model.params, frame, out.states, dropout, tape, false);
  }
  out.last_rgb = context.back().slice_channels(0, kRgbChannels);
  return out;
}

template <typename T>
struct RolloutResult {
  std::vector<Tensor3<T>> predictions;
  /// teacher_forced[k]: step k+1 consumed the ground-truth previous frame.
  std::vector<bool> teacher_forced;
  /// Tape index of the first rollout step (when recording).
  std::size_t first_tape_step = 0;
};

/// Autoregressive forecast. Step t consumes [Y^_{t-1}, wind_t, depth], where
/// Y^_0 is the last context RGB frame; with probability teacher_forcing_p the
/// ground truth Y_{t-1} replaces Y^_{t-1}. Wind is always the supplied truth;
/// frames past the horizon are ignored.
template <typename T>
RolloutResult<T> rollout(const Model<T>& model, std::vector<nn::CellState<T>>& states, const Tensor3<T>& y0,
                         std::span<const Tensor3<T>> future_wind, const Tensor3<T>& bathymetry,
                         const RolloutConfig& cfg, std::span<const Tensor3<T>> targets = {},
                         nn::Dropout* dropout = nullptr, nn::Tape<T>* tape = nullptr) {
  cfg.validate();
  if (future_wind.size() < cfg.horizon) {
    throw Error(ErrorKind::shape, "rollout: only " + std::to_string(future_wind.size()) + " wind frames for horizon " +
                                      std::to_string(cfg.horizon));
  }
  if (cfg.teacher_forcing_p > 0.0 && targets.size() < cfg.horizon) {
    throw Error(ErrorKind::value, "rollout: teacher forcing requires targets for every step");
  }
  RolloutResult<T> out;
  out.first_tape_step = tape ? tape->size() : 0;
  Rng rng(cfg.rng_seed);
  const Tensor3<T>* previous = &y0;
  for (std::size_t k = 0; k < cfg.horizon; ++k) {
    const bool forced = rng.bernoulli(cfg.teacher_forcing_p);
    out.teacher_forced.push_back(forced);
    if (forced && k > 0) previous = &targets[k - 1];
    const bool fed_back = k > 0 && !forced;
    auto x = assemble_step_input(*previous, future_wind[k], bathymetry);
    out.predictions.push_back(nn::forward_step(model.config, model.params, x, states, dropout, tape, fed_back));
    previous = &out.predictions.back();
  }
  return out;
}

namespace detail {

template <typename T>
std::vector<Tensor3<T>> convert_frames(const std::vector<Tensor3<float>>& frames) {
  std::vector<Tensor3<T>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.template cast<T>());
  return out;
}

}  // namespace detail

/// Warmup plus rollout over one clip. Targets are passed only when teacher
/// forcing is enabled.
template <typename T>
RolloutResult<T> forecast_clip(const Model<T>& model, const Clip& clip, const RolloutConfig& cfg,
                               nn::Dropout* dropout = nullptr, nn::Tape<T>* tape = nullptr) {
  const auto context = detail::convert_frames<T>(clip.context);
  const auto wind = detail::convert_frames<T>(clip.future_wind);
  const auto bathy = clip.bathymetry.template cast<T>();
  std::vector<Tensor3<T>> targets;
  if (cfg.teacher_forcing_p > 0.0) targets = detail::convert_frames<T>(clip.target);
  auto w = warmup<T>(model, context, dropout, tape);
  return rollout<T>(model, w.states, w.last_rgb, wind, bathy, cfg, targets, dropout, tape);
}

/// Persistence reference: the last context RGB frame repeated.
inline std::vector<Tensor3<float>> persistence_forecast(const Clip& clip, std::size_t horizon = kTargetFrames) {
  const auto last = clip.context.back().slice_channels(0, kRgbChannels);
  return std::vector<Tensor3<float>>(horizon, last);
}

}  // namespace surgecast

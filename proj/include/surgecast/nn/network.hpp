#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surgecast/error.hpp"
#include "surgecast/nn/conv.hpp"
#include "surgecast/nn/convlstm.hpp"
#include "surgecast/random.hpp"
#include "surgecast/tensor.hpp"

namespace surgecast::nn {

struct NetworkConfig {
  std::vector<std::size_t> hidden_dims{128, 128, 64};
  std::size_t kernel_size = 3;
  std::size_t input_channels = 6;
  std::size_t output_channels = 3;
  double dropout_p = 0.1;

  void validate() const {
    if (hidden_dims.empty()) throw Error(ErrorKind::config, "network: need at least one layer");
    for (auto d : hidden_dims) {
      if (d == 0) throw Error(ErrorKind::config, "network: hidden dims must be positive");
    }
    if (kernel_size % 2 == 0) throw Error(ErrorKind::config, "network: kernel size must be odd");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(ErrorKind::config, "network: dropout_p must be in [0, 1)");
    if (input_channels < output_channels) {
      throw Error(ErrorKind::config, "network: input must include the fed-back output channels");
    }
  }

  std::size_t layer_count() const noexcept { return hidden_dims.size(); }
  std::size_t layer_input(std::size_t l) const noexcept { return l == 0 ? input_channels : hidden_dims[l - 1]; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// A named view of one parameter tensor.
template <typename T>
struct ParamView {
  std::string name;
  std::vector<std::size_t> dims;
  std::span<T> data;
};

template <typename T>
struct NetworkParams {
  std::vector<ConvLstmCellParams<T>> layers;
  ConvKernel<T> decoder;  // 1x1, last hidden -> output channels

  static NetworkParams zeros(const NetworkConfig& cfg) {
    cfg.validate();
    NetworkParams p;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
      p.layers.push_back(ConvLstmCellParams<T>::zeros(cfg.layer_input(l), cfg.hidden_dims[l], cfg.kernel_size,
                                                      cfg.kernel_size));
    }
    p.decoder = ConvKernel<T>::same(cfg.output_channels, cfg.hidden_dims.back(), 1, 1);
    return p;
  }

  /// Every parameter tensor, sorted by name. Gate kernels are exposed
  /// individually as `layer<l>.<gate>.weight` / `.bias`.
  std::vector<ParamView<T>> views() {
    std::vector<ParamView<T>> out;
    out.push_back({"decoder.bias", {decoder.out_channels}, decoder.bias});
    out.push_back({"decoder.weight", {decoder.out_channels, decoder.in_channels, 1, 1}, decoder.weight});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& cell = layers[l];
      for (std::size_t g = 0; g < kGateCount; ++g) {
        const auto gate = static_cast<Gate>(g);
        const std::string prefix = "layer" + std::to_string(l) + "." + gate_name(gate);
        out.push_back({prefix + ".bias", {cell.hidden_channels}, cell.gate_bias(gate)});
        out.push_back({prefix + ".weight",
                       {cell.hidden_channels, cell.gates.in_channels, cell.gates.kernel_h, cell.gates.kernel_w},
                       cell.gate_weight(gate)});
      }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
  }

  std::vector<ParamView<const T>> views() const {
    auto mutable_views = const_cast<NetworkParams*>(this)->views();
    std::vector<ParamView<const T>> out;
    for (auto& v : mutable_views) out.push_back({v.name, v.dims, v.data});
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = decoder.weight.size() + decoder.bias.size();
    for (const auto& l : layers) n += l.gates.weight.size() + l.gates.bias.size();
    return n;
  }

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> p;
    for (const auto& l : layers) p.layers.push_back(l.template cast<U>());
    p.decoder = decoder.template cast<U>();
    return p;
  }

  void zero() {
    for (auto& l : layers) l.gates.zero();
    decoder.zero();
  }

  void scale(T factor) {
    for (auto& v : views()) {
      for (auto& x : v.data) x *= factor;
    }
  }

  void add(const NetworkParams& other) {
    auto a = views();
    auto b = other.views();
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t j = 0; j < a[k].data.size(); ++j) a[k].data[j] += b[k].data[j];
    }
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Gate weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases 0
/// except the forget gate bias, which starts at 1.
template <typename T>
NetworkParams<T> initialize(const NetworkConfig& cfg, std::uint64_t seed) {
  auto p = NetworkParams<T>::zeros(cfg);
  Rng rng(seed);
  auto glorot = [&](std::span<T> w, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : w) v = static_cast<T>(rng.uniform(-a, a));
  };
  for (auto& cell : p.layers) {
    const double taps = static_cast<double>(cell.gates.kernel_h * cell.gates.kernel_w);
    for (std::size_t g = 0; g < kGateCount; ++g) {
      glorot(cell.gate_weight(static_cast<Gate>(g)), static_cast<double>(cell.gates.in_channels) * taps,
             static_cast<double>(cell.hidden_channels) * taps);
    }
    for (auto& b : cell.gate_bias(Gate::forget)) b = T(1);
  }
  glorot(p.decoder.weight, static_cast<double>(p.decoder.in_channels), static_cast<double>(p.decoder.out_channels));
  return p;
}

template <typename T>
std::vector<CellState<T>> zero_states(const NetworkConfig& cfg, std::size_t height, std::size_t width) {
  std::vector<CellState<T>> states;
  for (auto d : cfg.hidden_dims) states.push_back(CellState<T>::zeros(d, height, width));
  return states;
}

/// Inverted dropout on the hidden grids passed between stacked layers.
struct Dropout {
  double p = 0.0;
  Rng rng;

  Dropout(double probability, std::uint64_t seed) : p(probability), rng(seed) {}
  bool active() const noexcept { return p > 0.0; }
};

/// Forward intermediates of one forward_step.
template <typename T>
struct StepRecord {
  std::vector<CellCache<T>> layers;
  std::vector<Tensor3<T>> masks;  // masks[l] scales the input of layer l (empty when none)
  Tensor3<T> output;              // squashed decoder output
  bool rgb_from_previous_output = false;
};

/// Records one sequence of forward steps, starting from zero states, for
/// reverse-mode differentiation. Loss gradients are attached per step.
template <typename T>
class Tape {
 public:
  std::size_t size() const noexcept { return steps_.size(); }
  bool empty() const noexcept { return steps_.empty(); }
  void clear() {
    steps_.clear();
    output_grads_.clear();
  }

  StepRecord<T>& push() {
    steps_.emplace_back();
    output_grads_.emplace_back();
    return steps_.back();
  }
  const StepRecord<T>& step(std::size_t s) const { return steps_.at(s); }

  /// dLoss/dOutput of step `s`, accumulated.
  void add_output_grad(std::size_t s, const Tensor3<T>& g) {
    auto& slot = output_grads_.at(s);
    if (slot.empty()) {
      slot = g;
      return;
    }
    if (!slot.same_shape(g)) throw Error(ErrorKind::shape, "tape: output gradient shape mismatch");
    for (std::size_t k = 0; k < g.size(); ++k) slot.data()[k] += g.data()[k];
  }
  const Tensor3<T>& output_grad(std::size_t s) const { return output_grads_.at(s); }

 private:
  std::vector<StepRecord<T>> steps_;
  std::vector<Tensor3<T>> output_grads_;
};

/// Runs the layer stack on one frame and decodes to squashed RGB in [0, 1].
/// `rgb_from_previous_output` marks that the frame's first output_channels
/// channels are the previous step's output, so gradients flow back through it.
template <typename T>
Tensor3<T> forward_step(const NetworkConfig& cfg, const NetworkParams<T>& params, const Tensor3<T>& frame,
                        std::vector<CellState<T>>& states, Dropout* dropout = nullptr, Tape<T>* tape = nullptr,
                        bool rgb_from_previous_output = false) {
  if (states.size() != cfg.layer_count() || params.layers.size() != cfg.layer_count()) {
    throw Error(ErrorKind::shape, "forward_step: state/config layer count mismatch");
  }
  if (frame.channels() != cfg.input_channels) {
    throw Error(ErrorKind::shape, "forward_step: frame has " + std::to_string(frame.channels()) +
                                      " channels, expected " + std::to_string(cfg.input_channels));
  }
  StepRecord<T>* rec = tape ? &tape->push() : nullptr;
  if (rec) {
    rec->rgb_from_previous_output = rgb_from_previous_output;
    rec->layers.resize(cfg.layer_count());
    rec->masks.resize(cfg.layer_count());
  }
  const bool drop = dropout && dropout->active();
  const T keep_scale = drop ? static_cast<T>(1.0 / (1.0 - dropout->p)) : T(1);

  Tensor3<T> layer_input;
  for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
    const Tensor3<T>* x = &frame;
    if (l > 0) {
      layer_input = states[l - 1].hidden;
      if (drop) {
        Tensor3<T> mask(layer_input.channels(), layer_input.height(), layer_input.width());
        for (std::size_t k = 0; k < mask.size(); ++k) {
          mask.data()[k] = dropout->rng.bernoulli(dropout->p) ? T(0) : keep_scale;
          layer_input.data()[k] *= mask.data()[k];
        }
        if (rec) rec->masks[l] = std::move(mask);
      }
      x = &layer_input;
    }
    states[l] = cell_step(*x, states[l], params.layers[l], rec ? &rec->layers[l] : nullptr);
  }

  Tensor3<T> out = conv2d(states.back().hidden, params.decoder);
  for (auto& v : out.values()) v = sigmoid(v);
  if (rec) rec->output = out;
  return out;
}

/// Reverse-mode gradients of the loss attached to `tape` with respect to
/// every parameter. Recurrent state gradients and fed-back outputs are
/// propagated through the whole recorded sequence.
template <typename T>
NetworkParams<T> gradients(const Tape<T>& tape, const NetworkConfig& cfg, const NetworkParams<T>& params) {
  if (tape.empty()) throw Error(ErrorKind::state, "gradients: no recorded forward pass");
  auto grads = NetworkParams<T>::zeros(cfg);
  const std::size_t L = cfg.layer_count();
  const auto& first = tape.step(0).output;
  const std::size_t H = first.height(), W = first.width();

  std::vector<Tensor3<T>> d_hidden_next, d_cell_next;
  for (auto d : cfg.hidden_dims) {
    d_hidden_next.emplace_back(d, H, W);
    d_cell_next.emplace_back(d, H, W);
  }
  Tensor3<T> d_feedback(cfg.output_channels, H, W);

  for (std::size_t s = tape.size(); s-- > 0;) {
    const auto& rec = tape.step(s);
    Tensor3<T> d_out = d_feedback;
    if (const auto& g = tape.output_grad(s); !g.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) d_out.data()[k] += g.data()[k];
    }
    for (std::size_t k = 0; k < d_out.size(); ++k) {
      const T y = rec.output.data()[k];
      d_out.data()[k] *= y * (T(1) - y);
    }
    Tensor3<T> d_above(cfg.hidden_dims.back(), H, W);
    conv2d_backward(rec.layers.back().hidden, params.decoder, d_out, grads.decoder, &d_above);

    Tensor3<T> d_frame;
    for (std::size_t l = L; l-- > 0;) {
      auto& dh = d_above;
      for (std::size_t k = 0; k < dh.size(); ++k) dh.data()[k] += d_hidden_next[l].data()[k];
      auto cg = cell_backward(rec.layers[l], params.layers[l], dh, d_cell_next[l], grads.layers[l]);
      d_hidden_next[l] = std::move(cg.d_hidden_prev);
      d_cell_next[l] = std::move(cg.d_cell_prev);
      if (l > 0) {
        d_above = std::move(cg.d_input);
        if (const auto& mask = rec.masks[l]; !mask.empty()) {
          for (std::size_t k = 0; k < d_above.size(); ++k) d_above.data()[k] *= mask.data()[k];
        }
      } else {
        d_frame = std::move(cg.d_input);
      }
    }
    if (rec.rgb_from_previous_output) {
      std::copy_n(d_frame.data(), d_feedback.size(), d_feedback.data());
    } else {
      d_feedback.fill(T{});
    }
  }
  return grads;
}

}  // namespace surgecast::nn

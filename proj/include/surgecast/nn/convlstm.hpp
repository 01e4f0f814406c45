#pragma once

#include <cassert>
#include <cmath>
#include <span>

#include "surgecast/nn/conv.hpp"
#include "surgecast/tensor.hpp"

namespace surgecast::nn {

enum class Gate : std::size_t { forget = 0, input = 1, candidate = 2, output = 3 };

inline constexpr std::size_t kGateCount = 4;

inline const char* gate_name(Gate g) {
  switch (g) {
    case Gate::forget: return "forget";
    case Gate::input: return "input";
    case Gate::candidate: return "candidate";
    case Gate::output: return "output";
  }
  return "?";
}

template <typename T>
T sigmoid(T z) noexcept {
  return T(1) / (T(1) + std::exp(-z));
}

/// Gate kernels W_f, W_i, W_c, W_o applied to the channel concatenation
/// [x, H]. Stored as one kernel with 4*D output channels in gate order, so
/// the four convolutions share a single unfolded input.
template <typename T>
struct ConvLstmCellParams {
  std::size_t input_channels = 0;
  std::size_t hidden_channels = 0;
  ConvKernel<T> gates;

  static ConvLstmCellParams zeros(std::size_t input_channels, std::size_t hidden_channels, std::size_t kh,
                                  std::size_t kw) {
    ConvLstmCellParams p;
    p.input_channels = input_channels;
    p.hidden_channels = hidden_channels;
    p.gates = ConvKernel<T>::same(kGateCount * hidden_channels, input_channels + hidden_channels, kh, kw);
    return p;
  }

  std::span<T> gate_weight(Gate g) noexcept {
    const std::size_t n = hidden_channels * gates.patch_size();
    return {gates.weight.data() + static_cast<std::size_t>(g) * n, n};
  }
  std::span<const T> gate_weight(Gate g) const noexcept {
    const std::size_t n = hidden_channels * gates.patch_size();
    return {gates.weight.data() + static_cast<std::size_t>(g) * n, n};
  }
  std::span<T> gate_bias(Gate g) noexcept {
    return {gates.bias.data() + static_cast<std::size_t>(g) * hidden_channels, hidden_channels};
  }
  std::span<const T> gate_bias(Gate g) const noexcept {
    return {gates.bias.data() + static_cast<std::size_t>(g) * hidden_channels, hidden_channels};
  }

  template <typename U>
  ConvLstmCellParams<U> cast() const {
    return {input_channels, hidden_channels, gates.template cast<U>()};
  }

  friend bool operator==(const ConvLstmCellParams&, const ConvLstmCellParams&) = default;
};

template <typename T>
struct CellState {
  Tensor3<T> hidden;
  Tensor3<T> cell;

  static CellState zeros(std::size_t channels, std::size_t h, std::size_t w) {
    return {Tensor3<T>(channels, h, w), Tensor3<T>(channels, h, w)};
  }
};

/// Forward intermediates kept for the backward pass.
template <typename T>
struct CellCache {
  Tensor3<T> xh;         // [x, H_prev]
  Tensor3<T> gates;      // activated F, I, C~, O stacked along channels
  Tensor3<T> cell_prev;
  Tensor3<T> cell;
  Tensor3<T> hidden;
};

/// One ConvLSTM update:
///   F = s(W_f*[x,H] + b_f), I = s(W_i*[x,H] + b_i), C~ = tanh(W_c*[x,H] + b_c),
///   C' = F.C + I.C~, O = s(W_o*[x,H] + b_o), H' = O.tanh(C').
template <typename T>
CellState<T> cell_step(const Tensor3<T>& x, const CellState<T>& state, const ConvLstmCellParams<T>& p,
                       CellCache<T>* cache = nullptr) {
  const std::size_t D = p.hidden_channels;
  if (x.channels() != p.input_channels) {
    throw Error(ErrorKind::shape, "cell_step: input has " + std::to_string(x.channels()) + " channels, expected " +
                                      std::to_string(p.input_channels));
  }
  if (state.hidden.channels() != D || state.cell.channels() != D || state.hidden.height() != x.height() ||
      state.hidden.width() != x.width() || !state.cell.same_shape(state.hidden)) {
    throw Error(ErrorKind::shape, "cell_step: state shape " + shape_string(state.hidden) + " does not match input " +
                                      shape_string(x) + " with D=" + std::to_string(D));
  }
  const Tensor3<T>* parts[] = {&x, &state.hidden};
  Tensor3<T> xh = concat_channels<T>(parts);
  Tensor3<T> z = conv2d(xh, p.gates);

  const std::size_t P = x.plane();
  const std::size_t n = D * P;
  T* f = z.data();
  T* i = f + n;
  T* g = i + n;
  T* o = g + n;
  CellState<T> next{Tensor3<T>(D, x.height(), x.width()), Tensor3<T>(D, x.height(), x.width())};
  const T* c_prev = state.cell.data();
  T* c = next.cell.data();
  T* h = next.hidden.data();
  for (std::size_t k = 0; k < n; ++k) {
    f[k] = sigmoid(f[k]);
    i[k] = sigmoid(i[k]);
    g[k] = std::tanh(g[k]);
    o[k] = sigmoid(o[k]);
    c[k] = f[k] * c_prev[k] + i[k] * g[k];
    h[k] = o[k] * std::tanh(c[k]);
    // Closed bounds: in float the squashes round to exactly 0 or 1 when saturated.
    assert(f[k] >= 0 && f[k] <= 1 && i[k] >= 0 && i[k] <= 1 && o[k] >= 0 && o[k] <= 1);
    assert(g[k] >= -1 && g[k] <= 1 && h[k] >= -1 && h[k] <= 1);
  }
  if (cache) {
    cache->xh = std::move(xh);
    cache->gates = std::move(z);
    cache->cell_prev = state.cell;
    cache->cell = next.cell;
    cache->hidden = next.hidden;
  }
  return next;
}

template <typename T>
struct CellGradients {
  Tensor3<T> d_input;        // w.r.t. x
  Tensor3<T> d_hidden_prev;  // w.r.t. H_prev
  Tensor3<T> d_cell_prev;    // w.r.t. C_prev
};

/// Reverse of cell_step given dL/dH' and dL/dC' (the latter from the next
/// time step only). Parameter gradients accumulate into `grad`.
template <typename T>
CellGradients<T> cell_backward(const CellCache<T>& cache, const ConvLstmCellParams<T>& p, const Tensor3<T>& d_hidden,
                               const Tensor3<T>& d_cell, ConvLstmCellParams<T>& grad) {
  const std::size_t D = p.hidden_channels;
  const std::size_t H = cache.cell.height(), W = cache.cell.width();
  const std::size_t n = D * H * W;
  const T* f = cache.gates.data();
  const T* i = f + n;
  const T* g = i + n;
  const T* o = g + n;
  const T* c = cache.cell.data();
  const T* c_prev = cache.cell_prev.data();
  const T* dh = d_hidden.data();
  const T* dc_next = d_cell.data();

  CellGradients<T> out{Tensor3<T>(p.input_channels, H, W), Tensor3<T>(D, H, W), Tensor3<T>(D, H, W)};
  Tensor3<T> dz(kGateCount * D, H, W);
  T* dzf = dz.data();
  T* dzi = dzf + n;
  T* dzg = dzi + n;
  T* dzo = dzg + n;
  T* dc_prev = out.d_cell_prev.data();
  for (std::size_t k = 0; k < n; ++k) {
    const T tc = std::tanh(c[k]);
    const T dc = dh[k] * o[k] * (T(1) - tc * tc) + dc_next[k];
    dzo[k] = dh[k] * tc * o[k] * (T(1) - o[k]);
    dzf[k] = dc * c_prev[k] * f[k] * (T(1) - f[k]);
    dzi[k] = dc * g[k] * i[k] * (T(1) - i[k]);
    dzg[k] = dc * i[k] * (T(1) - g[k] * g[k]);
    dc_prev[k] = dc * f[k];
  }
  Tensor3<T> d_xh(p.input_channels + D, H, W);
  conv2d_backward(cache.xh, p.gates, dz, grad.gates, &d_xh);
  const std::size_t split = p.input_channels * H * W;
  std::copy_n(d_xh.data(), split, out.d_input.data());
  std::copy_n(d_xh.data() + split, n, out.d_hidden_prev.data());
  return out;
}

}  // namespace surgecast::nn

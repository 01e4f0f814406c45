#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "surgecast/error.hpp"
#include "surgecast/tensor.hpp"

namespace surgecast::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// 2-D convolution kernel, weights laid out [out][in][kh][kw].
template <typename T>
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  AlignedVector<T> weight;
  AlignedVector<T> bias;

  /// Resolution-preserving kernel with zero weights; kernel sizes must be odd.
  static ConvKernel same(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw) {
    if (kh % 2 == 0 || kw % 2 == 0) throw Error(ErrorKind::config, "kernel sizes must be odd");
    ConvKernel k;
    k.out_channels = out;
    k.in_channels = in;
    k.kernel_h = kh;
    k.kernel_w = kw;
    k.pad_h = (kh - 1) / 2;
    k.pad_w = (kw - 1) / 2;
    k.weight.assign(out * in * kh * kw, T{});
    k.bias.assign(out, T{});
    return k;
  }

  std::size_t patch_size() const noexcept { return in_channels * kernel_h * kernel_w; }

  T& w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) noexcept {
    return weight[((o * in_channels + i) * kernel_h + y) * kernel_w + x];
  }
  const T& w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const noexcept {
    return weight[((o * in_channels + i) * kernel_h + y) * kernel_w + x];
  }

  std::size_t out_height(std::size_t h) const noexcept { return h + 2 * pad_h - kernel_h + 1; }
  std::size_t out_width(std::size_t w) const noexcept { return w + 2 * pad_w - kernel_w + 1; }

  void zero() {
    std::fill(weight.begin(), weight.end(), T{});
    std::fill(bias.begin(), bias.end(), T{});
  }

  template <typename U>
  ConvKernel<U> cast() const {
    ConvKernel<U> k;
    k.out_channels = out_channels;
    k.in_channels = in_channels;
    k.kernel_h = kernel_h;
    k.kernel_w = kernel_w;
    k.pad_h = pad_h;
    k.pad_w = pad_w;
    k.weight.assign(weight.begin(), weight.end());
    k.bias.assign(bias.begin(), bias.end());
    return k;
  }

  friend bool operator==(const ConvKernel&, const ConvKernel&) = default;
};

namespace detail {

/// Unfolds zero-padded patches: row (c, ky, kx), column (y, x) of the output.
template <typename T>
void im2col(const Tensor3<T>& in, const ConvKernel<T>& k, std::size_t oh, std::size_t ow, T* cols) {
  const std::size_t H = in.height(), W = in.width();
  const auto ph = static_cast<std::ptrdiff_t>(k.pad_h);
  const auto pw = static_cast<std::ptrdiff_t>(k.pad_w);
  for (std::size_t c = 0; c < in.channels(); ++c) {
    const T* src = in.data() + c * H * W;
    for (std::size_t ky = 0; ky < k.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < k.kernel_w; ++kx, cols += oh * ow) {
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
        // valid output columns: 0 <= x + dx < W
        const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const std::size_t x1 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W) - dx, 0, static_cast<std::ptrdiff_t>(ow)));
        for (std::size_t y = 0; y < oh; ++y) {
          T* dst = cols + y * ow;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - ph;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H) || x0 >= x1) {
            std::fill(dst, dst + ow, T{});
            continue;
          }
          const T* row = src + static_cast<std::size_t>(sy) * W;
          std::fill(dst, dst + x0, T{});
          for (std::size_t x = x0; x < x1; ++x) dst[x] = row[static_cast<std::ptrdiff_t>(x) + dx];
          std::fill(dst + x1, dst + ow, T{});
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters column gradients back onto the input grid.
template <typename T>
void col2im_add(const T* cols, const ConvKernel<T>& k, std::size_t oh, std::size_t ow, Tensor3<T>& d_in) {
  const std::size_t H = d_in.height(), W = d_in.width();
  const auto ph = static_cast<std::ptrdiff_t>(k.pad_h);
  const auto pw = static_cast<std::ptrdiff_t>(k.pad_w);
  for (std::size_t c = 0; c < d_in.channels(); ++c) {
    T* dst = d_in.data() + c * H * W;
    for (std::size_t ky = 0; ky < k.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < k.kernel_w; ++kx, cols += oh * ow) {
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
        const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const std::size_t x1 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W) - dx, 0, static_cast<std::ptrdiff_t>(ow)));
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - ph;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
          T* row = dst + static_cast<std::size_t>(sy) * W;
          const T* src = cols + y * ow;
          for (std::size_t x = x0; x < x1; ++x) row[static_cast<std::ptrdiff_t>(x) + dx] += src[x];
        }
      }
    }
  }
}

template <typename T>
bool is_pointwise(const ConvKernel<T>& k) noexcept {
  return k.kernel_h == 1 && k.kernel_w == 1 && k.pad_h == 0 && k.pad_w == 0;
}

}  // namespace detail

/// Zero-padded cross-correlation: out[o, y, x] = b[o] + sum_{i, ky, kx}
/// w[o, i, ky, kx] * in[i, y + ky - pad_h, x + kx - pad_w].
template <typename T>
Tensor3<T> conv2d(const Tensor3<T>& input, const ConvKernel<T>& k) {
  if (input.channels() != k.in_channels) {
    throw Error(ErrorKind::shape, "conv2d: input has " + std::to_string(input.channels()) +
                                      " channels, kernel expects " + std::to_string(k.in_channels));
  }
  const std::size_t oh = k.out_height(input.height()), ow = k.out_width(input.width());
  const std::size_t P = oh * ow, K = k.patch_size();
  Tensor3<T> out(k.out_channels, oh, ow);
  MatrixMap<T> Y(out.data(), static_cast<Eigen::Index>(k.out_channels), static_cast<Eigen::Index>(P));
  ConstMatrixMap<T> Wm(k.weight.data(), static_cast<Eigen::Index>(k.out_channels), static_cast<Eigen::Index>(K));
  if (detail::is_pointwise(k)) {
    ConstMatrixMap<T> X(input.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    Y.noalias() = Wm * X;
  } else {
    AlignedVector<T> cols(K * P);
    detail::im2col(input, k, oh, ow, cols.data());
    ConstMatrixMap<T> X(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    Y.noalias() = Wm * X;
  }
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    T* row = out.data() + o * P;
    const T b = k.bias[o];
    for (std::size_t p = 0; p < P; ++p) row[p] += b;
  }
  return out;
}

/// Accumulates weight/bias gradients into `grad` and, when `d_input` is
/// non-null, input gradients into `*d_input` (which must be shaped like input).
template <typename T>
void conv2d_backward(const Tensor3<T>& input, const ConvKernel<T>& k, const Tensor3<T>& d_out, ConvKernel<T>& grad,
                     Tensor3<T>* d_input) {
  const std::size_t oh = k.out_height(input.height()), ow = k.out_width(input.width());
  if (d_out.channels() != k.out_channels || d_out.height() != oh || d_out.width() != ow) {
    throw Error(ErrorKind::shape, "conv2d_backward: output gradient shape " + shape_string(d_out));
  }
  const std::size_t P = oh * ow, K = k.patch_size();
  const auto Ko = static_cast<Eigen::Index>(k.out_channels);
  const auto Ki = static_cast<Eigen::Index>(K);
  const auto Pi = static_cast<Eigen::Index>(P);
  ConstMatrixMap<T> dY(d_out.data(), Ko, Pi);
  ConstMatrixMap<T> Wm(k.weight.data(), Ko, Ki);
  MatrixMap<T> dW(grad.weight.data(), Ko, Ki);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dB(grad.bias.data(), Ko);
  dB += dY.rowwise().sum();

  if (detail::is_pointwise(k)) {
    ConstMatrixMap<T> X(input.data(), Ki, Pi);
    dW.noalias() += dY * X.transpose();
    if (d_input) {
      MatrixMap<T> dX(d_input->data(), Ki, Pi);
      dX.noalias() += Wm.transpose() * dY;
    }
    return;
  }
  AlignedVector<T> cols(K * P);
  detail::im2col(input, k, oh, ow, cols.data());
  {
    ConstMatrixMap<T> X(cols.data(), Ki, Pi);
    dW.noalias() += dY * X.transpose();
  }
  if (d_input) {
    MatrixMap<T> dX(cols.data(), Ki, Pi);
    dX.noalias() = Wm.transpose() * dY;
    detail::col2im_add(cols.data(), k, oh, ow, *d_input);
  }
}

}  // namespace surgecast::nn

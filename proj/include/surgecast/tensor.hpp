#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "surgecast/error.hpp"

namespace surgecast {

/// 64-byte aligned storage. Vectorized GEMM kernels pick their loop peeling
/// from the buffer address, so a fixed alignment keeps float results
/// independent of where the heap happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense channel-major [C x H x W] array. Used for model frames, hidden and
/// cell grids, and gradients alike.
template <typename T>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : channels_(channels), height_(height), width_(width),
        data_(channels * height * width, fill) {}

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  std::span<T> channel(std::size_t c) noexcept { return {data_.data() + c * plane(), plane()}; }
  std::span<const T> channel(std::size_t c) const noexcept {
    return {data_.data() + c * plane(), plane()};
  }

  /// Channels [first, first + count) as a new tensor.
  Tensor3 slice_channels(std::size_t first, std::size_t count) const {
    if (first + count > channels_) {
      throw Error(ErrorKind::shape, "channel slice out of range");
    }
    Tensor3 out(count, height_, width_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * plane()), count * plane(),
                out.data_.begin());
    return out;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool same_shape(const Tensor3& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  template <typename U>
  Tensor3<U> cast() const {
    Tensor3<U> out(channels_, height_, width_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  AlignedVector<T> data_;
};

/// Stacks tensors with equal H x W along the channel axis.
template <typename T>
Tensor3<T> concat_channels(std::span<const Tensor3<T>* const> parts) {
  if (parts.empty()) return {};
  const std::size_t h = parts.front()->height();
  const std::size_t w = parts.front()->width();
  std::size_t channels = 0;
  for (const auto* p : parts) {
    if (p->height() != h || p->width() != w) {
      throw Error(ErrorKind::shape, "concat_channels: spatial size mismatch");
    }
    channels += p->channels();
  }
  Tensor3<T> out(channels, h, w);
  T* dst = out.data();
  for (const auto* p : parts) dst = std::copy(p->data(), p->data() + p->size(), dst);
  return out;
}

inline std::string shape_string(std::size_t c, std::size_t h, std::size_t w) {
  return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

template <typename T>
std::string shape_string(const Tensor3<T>& t) {
  return shape_string(t.channels(), t.height(), t.width());
}

}  // namespace surgecast

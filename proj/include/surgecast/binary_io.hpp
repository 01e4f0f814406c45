#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "surgecast/error.hpp"

namespace surgecast::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts are not supported");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw Error(ErrorKind::io, "write failed: " + path_.string());
  }

  void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void scalar(T value) {
    bytes(&value, sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void array(std::span<const T> values) {
    bytes(values.data(), values.size_bytes());
  }

  void close() {
    out_.close();
    if (!out_) throw Error(ErrorKind::io, "close failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::io, "cannot open: " + path.string());
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorKind::format, "unexpected end of file: " + path_.string());
    }
  }

  void skip(std::size_t n) {
    in_.seekg(static_cast<std::streamoff>(n), std::ios::cur);
    if (!in_) throw Error(ErrorKind::format, "unexpected end of file: " + path_.string());
  }

  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    bytes(got.data(), got.size());
    if (got != tag) {
      throw Error(ErrorKind::format,
                  path_.string() + ": bad magic, expected '" + std::string(tag) + "'");
    }
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T scalar() {
    T value{};
    bytes(&value, sizeof(T));
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void array(std::span<T> out) {
    bytes(out.data(), out.size_bytes());
  }

  std::string string(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace surgecast::io

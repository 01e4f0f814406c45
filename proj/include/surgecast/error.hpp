#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace surgecast {

enum class ErrorKind {
  io,
  parse,
  format,
  shape,
  index_range,
  degenerate,
  value,
  config,
  state,
  numeric,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::format: return "format";
    case ErrorKind::shape: return "shape";
    case ErrorKind::index_range: return "index_range";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::value: return "value";
    case ErrorKind::config: return "config";
    case ErrorKind::state: return "state";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can print `error[<kind>]: <message>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace surgecast

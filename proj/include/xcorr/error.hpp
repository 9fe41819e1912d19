#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xcorr {

enum class ErrorKind {
  invalid_input,   // rejected values (non-positive price, bad parameter)
  structural,      // ragged rows, dimension mismatch
  degenerate,      // zero variance, too few entries
  io,              // file access and parse failures
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::structural: return "structural";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Non-fatal diagnostics (dropped assets, trimmed days, filled bars).
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink) sink->push_back(std::move(message));
}

}  // namespace xcorr

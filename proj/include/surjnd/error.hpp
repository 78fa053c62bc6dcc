#pragma once

#include <stdexcept>
#include <string>

namespace surjnd {

enum class ErrorKind {
  format,
  unsupported_format,
  truncation,
  bounds,
  configuration,
  shape,
  missing_score,
  range,
  incomplete_table,
  empty_input,
  missing_data,
  degenerate_sample,
  contract,
  numeric,
  insufficient_data,
  version,
  corrupt_file,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format error";
    case ErrorKind::unsupported_format: return "unsupported format";
    case ErrorKind::truncation: return "truncation error";
    case ErrorKind::bounds: return "bounds error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::missing_score: return "missing score";
    case ErrorKind::range: return "range error";
    case ErrorKind::incomplete_table: return "incomplete table";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::missing_data: return "missing data";
    case ErrorKind::degenerate_sample: return "degenerate sample";
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::version: return "version mismatch";
    case ErrorKind::corrupt_file: return "corrupt file";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

/// Library-wide exception. Every failure carries a kind so that callers
/// (notably the CLI) can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration:
    case ErrorKind::bounds:
      return kExitConfig;
    case ErrorKind::numeric:
    case ErrorKind::degenerate_sample:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

}  // namespace surjnd

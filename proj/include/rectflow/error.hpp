#pragma once

#include <stdexcept>
#include <string>

namespace rectflow {

// Error taxonomy shared by every module. The kind string is stable and is
// what the CLI reports on stderr.
enum class ErrorKind {
  dimension,
  config,
  domain,
  parse,
  schema,
  empty_input,
  fit,
  encode,
  decode,
  format,
  corrupt_file,
  diverged,
  solver,
  metric,
  io,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::dimension: return "dimension_error";
    case ErrorKind::config: return "config_error";
    case ErrorKind::domain: return "domain_error";
    case ErrorKind::parse: return "parse_error";
    case ErrorKind::schema: return "schema_error";
    case ErrorKind::empty_input: return "empty_input_error";
    case ErrorKind::fit: return "fit_error";
    case ErrorKind::encode: return "encode_error";
    case ErrorKind::decode: return "decode_error";
    case ErrorKind::format: return "format_error";
    case ErrorKind::corrupt_file: return "corrupt_file_error";
    case ErrorKind::diverged: return "diverged_training_error";
    case ErrorKind::solver: return "solver_error";
    case ErrorKind::metric: return "metric_error";
    case ErrorKind::io: return "io_error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) fail(kind, message);
}

}  // namespace rectflow

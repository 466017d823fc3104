#pragma once

#include <stdexcept>
#include <string>

namespace taguchi {

// Error categories. The CLI maps these onto process exit codes.
enum class ErrorCode {
  config,       // bad factor definitions, weights, flags, plan files
  capacity,     // design cannot hold the requested factor count
  parse,        // malformed CSV / JSON / config text
  incomplete,   // analysis requested on a store with missing rows
  degenerate,   // metrics outside the domain of a response or SNR formula
  runner,       // external trial runner failed
  argument,     // programming-level misuse (e.g. same factor twice)
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return "config";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::parse: return "parse";
    case ErrorCode::incomplete: return "incomplete";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::runner: return "runner";
    case ErrorCode::argument: return "argument";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace taguchi

#pragma once

#include <stdexcept>
#include <string>

namespace painmtl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied arguments, flags or configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input files; messages carry the offending line/field.
struct ParseError : Error {
  using Error::Error;
};

// Structurally invalid or degenerate data (mismatched dimensions, missing
// classes, insufficient baseline span, ...).
struct DataError : Error {
  using Error::Error;
};

// Numerical failure inside an iterative solver.
struct InferenceError : Error {
  InferenceError(const std::string& what, int sweep)
      : Error(what + " (sweep " + std::to_string(sweep) + ")"), sweep_index(sweep) {}
  int sweep_index;
};

}  // namespace painmtl

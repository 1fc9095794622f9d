#pragma once

#include <stdexcept>
#include <string>

namespace fedsandbox {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (CSV, schema); message carries the line number.
struct ParseError : Error {
  using Error::Error;
};

// Value that contradicts the declared schema (unknown category, bad header).
struct SchemaError : Error {
  using Error::Error;
};

// Invalid run configuration (k > rows, fixed-point headroom, bad grid).
struct ConfigError : Error {
  using Error::Error;
};

// Bad mechanism parameters (nonpositive epsilon, delta = 0 for Gaussian).
struct ParameterError : Error {
  using Error::Error;
};

// Secure-aggregation round violation (missing or duplicate share).
struct ProtocolError : Error {
  using Error::Error;
};

// Noise-multiplier search could not reach the target epsilon.
struct CalibrationError : Error {
  using Error::Error;
};

// Statistic undefined on the given data (zero variance in both groups, ...).
struct DegenerateDataError : Error {
  using Error::Error;
};

// Too few rows for a balanced split.
struct InsufficientDataError : Error {
  using Error::Error;
};

}  // namespace fedsandbox

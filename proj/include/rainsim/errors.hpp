#pragma once

#include <stdexcept>
#include <string>

namespace rainsim {

// Error taxonomy shared by the library and the CLI exit-code mapping.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (bad header, unparseable token, ...).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant (negative rainfall,
// duplicate grid cell, out-of-range state, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between two otherwise valid inputs.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: non-convergence, degenerate sample, ...
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid draw request (all-zero categorical weights, ...).
struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller asked for an unsupported combination (model 6 without zones, ...).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rainsim

#pragma once

#include <stdexcept>

namespace dcgnn {

// Incompatible operand dimensions.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Value outside an operation's mathematical domain (nonpositive log input,
// degenerate marginals, disconnected graph for resistance, ...).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// File reading/parsing problems; message names the path and line when known.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or a failed numeric check during a run.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dcgnn

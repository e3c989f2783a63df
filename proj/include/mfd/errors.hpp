#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfd {

/// Mismatched or unsupported dimensions.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A motion vector or label outside the active FlowDomain.
struct DomainError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Invalid configuration or parameter value.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed binary file. Carries the byte offset where decoding failed.
struct FormatError : std::runtime_error {
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset(offset) {}
  std::size_t offset;
};

/// Non-finite values produced inside an iterative solver.
struct NumericalError : std::runtime_error {
  NumericalError(const std::string& what, long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration(iteration) {}
  long iteration;
};

}  // namespace mfd

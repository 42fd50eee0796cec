#pragma once

#include <stdexcept>
#include <string>

namespace cck {

// State left the finite range during integration (usually a too-large dt).
struct NonFiniteState : std::runtime_error {
  explicit NonFiniteState(const std::string& what, long step_index = -1)
      : std::runtime_error(what), step_index(step_index) {}
  long step_index;
};

// Inverse kinematics target outside the reachable annulus.
struct Unreachable : std::runtime_error {
  explicit Unreachable(const std::string& what, double excess = 0.0)
      : std::runtime_error(what), excess(excess) {}
  double excess;  // distance outside the annulus, m
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InsufficientData : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularGram : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigInvalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what, long byte_offset = -1)
      : std::runtime_error(what), byte_offset(byte_offset) {}
  long byte_offset;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DictionaryMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cck

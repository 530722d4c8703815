#pragma once

#include <stdexcept>
#include <string>

namespace xtrl {

// Bad user-supplied parameters or inconsistent configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. line is 1-based, 0 when unknown.
struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_no = 0)
      : std::runtime_error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
};

// Query outside the valid domain (e.g. terrain bounds).
struct RangeError : std::runtime_error {
  explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Solver blew up; step_index is the physics step at which divergence was detected.
struct SimulationUnstableError : std::runtime_error {
  long step_index;
  explicit SimulationUnstableError(long step, const std::string& msg)
      : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_index(step) {}
};

// API misuse: calls out of order (step after done, backward without forward, ...).
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite action component handed to the vehicle.
struct InvalidActionError : std::runtime_error {
  explicit InvalidActionError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xtrl

#pragma once

#include <stdexcept>
#include <string>

namespace cibpu {

// Rejected parameters or malformed input. Maps to CLI exit status 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A structural invariant of the simulator was violated (a bug, not bad input).
// Maps to CLI exit status 3.
class InvariantFault : public std::logic_error {
 public:
  explicit InvariantFault(const std::string& what) : std::logic_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace cibpu

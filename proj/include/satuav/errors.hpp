#pragma once

#include <stdexcept>
#include <string>

namespace satuav {

// Malformed config file or CLI value.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// A scenario or program violates one of its structural invariants.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// No point satisfies the constraints (or a required delivery cannot finish
// within the mission horizon).
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// The numerical solver failed to reach the requested accuracy.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace satuav

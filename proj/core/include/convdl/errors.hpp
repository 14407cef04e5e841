#pragma once

#include <stdexcept>
#include <string>

namespace convdl {

// Incompatible domains, channel counts or atom counts.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (CLI flags, config files, presets).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No worker-grid factorization satisfies the minimum sub-domain edge.
struct GridError : std::runtime_error {
  GridError(const std::string& what, long long max_feasible_workers)
      : std::runtime_error(what), max_feasible(max_feasible_workers) {}
  long long max_feasible = 0;
};

// A message reached a worker that should never receive it.
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The divergence guard tripped or a non-finite objective was observed.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace convdl

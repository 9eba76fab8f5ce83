#pragma once

#include <stdexcept>
#include <string>

namespace cdpg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnumCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SNIS moment matching: requested moment not achievable on the sample.
struct UnattainableMomentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// exact_target with Z_c = 0: the constraint is infeasible for this context.
struct EmptyTargetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cdpg

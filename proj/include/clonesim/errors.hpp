#pragma once

#include <stdexcept>
#include <string>

namespace clonesim {

/// Bad parameters, malformed configuration, or an unsupported request.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A physical invariant was violated (unphysical covariance, sub-shot-noise
/// clone, failed calibration correction, ...).
class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clonesim

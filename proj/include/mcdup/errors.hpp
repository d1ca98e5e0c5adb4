#pragma once

#include <stdexcept>

namespace mcdup {

// Invalid scenario, profile, or policy configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mcdup

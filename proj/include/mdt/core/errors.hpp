#pragma once

#include <stdexcept>
#include <string>

namespace mdt {

// Invalid configuration, flags or file schemas. The CLI maps this to exit
// code 2; genuine runtime failures stay std::runtime_error (exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mdt

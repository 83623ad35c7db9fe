#pragma once

#include <stdexcept>
#include <string>

namespace tasdl {

/// Invalid argument or configuration value (bad powers, n_t > n_s, missing grid point, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem failure or malformed file contents. The message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tasdl

#pragma once

#include <stdexcept>
#include <string>

namespace akcache {

// Invalid configuration or parameter (zero window size, beta <= 1, bad
// config file, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine failed to converge; the message carries diagnostics.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace akcache

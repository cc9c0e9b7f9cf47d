#pragma once

#include <stdexcept>
#include <string>

namespace raforge {

/// Bad run configuration (solver parameters, instance config, missing API key).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// HTTP transport failure that survived the retry policy.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int status)
      : std::runtime_error(what), status_(status) {}

  /// Last HTTP status, or 0 when the connection itself failed.
  int status() const { return status_; }

 private:
  int status_ = 0;
};

}  // namespace raforge

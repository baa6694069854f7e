#pragma once

#include <stdexcept>
#include <string>

namespace flynn {

// Error taxonomy shared by the library and the CLI. The CLI maps each
// category to a distinct process exit code (see tools/).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied configuration or parameters.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Malformed or inconsistent data (CSV, model files, shapes, labels).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

// Communication failures between federation parties.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(what) {}
};

// Invariant violations that indicate a bug rather than bad input.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(what) {}
};

}  // namespace flynn

#pragma once

#include <stdexcept>
#include <string>

namespace depix {

// Base class for all failures raised by the library. The CLI maps these to
// process exit codes; tests match on the concrete type.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed data fed to a pure operation (non-finite pixels, bad shapes ...).
class InvalidInputError : public Error {
public:
  using Error::Error;
};

// Impossible or inconsistent configuration (bad sizes, missing assets ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

// A caller broke a documented precondition of an operation.
class ContractError : public Error {
public:
  using Error::Error;
};

// Dataset-level problems: unreadable media, missing frames, index mismatches.
class DataError : public Error {
public:
  using Error::Error;
};

// Numeric failure at runtime: NaN losses, undefined similarity, ...
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace depix

#pragma once

#include <stdexcept>
#include <string>

namespace diffmvr {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents do not line up for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (bad magic, truncation, inconsistent header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf reached a checked boundary.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Guidance images cannot be derived from the frame (too little visible content).
class GuidanceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace diffmvr

#pragma once

#include <stdexcept>
#include <string>

namespace attnpose {

// Base for all errors thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Quaternion input is not unit-norm within tolerance, or otherwise unusable.
class InvalidQuaternionError : public Error {
public:
  using Error::Error;
};

// Tensor/layer dimension mismatch.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Bad or inconsistent configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Dataset or file ingestion failure; message names the offending file/frame.
class IngestionError : public Error {
public:
  using Error::Error;
};

// Non-finite values where finite ones are required (e.g. loss blow-up).
class NumericError : public Error {
public:
  using Error::Error;
};

// Checkpoint file carries an unsupported format version.
class CheckpointVersionError : public Error {
public:
  using Error::Error;
};

// Checkpoint file is truncated or fails integrity checks.
class CheckpointCorruptError : public Error {
public:
  using Error::Error;
};

}  // namespace attnpose

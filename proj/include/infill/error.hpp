#pragma once

#include <stdexcept>
#include <string>

namespace infill {

/// Base of every error raised by the library. Each subclass maps onto one
/// failure family so the CLI can translate it into an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not line up (matmul inner dims, mask vs score matrix).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Token or row id outside the valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed template / pair / vocab text.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (unknown keys, odd d_model, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that cannot be used (empty corpus, vocab hash mismatch, bad checkpoint).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A (seg_id, offset_id) pair whose offset exceeds the position base.
class PositionOverflow : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached the optimizer.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace infill

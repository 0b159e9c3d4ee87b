// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace semsplat {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A raw parameter is non-finite or out of its domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (shape mismatch, stale cache, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

/// Fewer than two unmasked pixels are available for a correlation.
class DegenerateMask : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or inconsistent input data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace semsplat

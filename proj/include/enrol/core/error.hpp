// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace enrol {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A spec/config value violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed data handed to an operation (bad labels, invalid distributions).
class InputError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a primitive.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse (backward on a non-scalar, step without gradients).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Feature extraction cannot proceed (empty mask).
class ExtractionError : public Error {
 public:
  using Error::Error;
};

/// Training cannot proceed (single-class labels, missing features).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Metric is undefined for the given predictions.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// On-disk file is corrupt or of the wrong kind.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace enrol

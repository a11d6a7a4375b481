// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fusebox {

/// Input-side failure: malformed or truncated files equal exit code 2 in the
/// CLI. Messages name the offending file and, for binary formats, the byte
/// offset where parsing stopped.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: out-of-range parameters, unknown class ids,
/// missing size priors. Also exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken camera calibration (non-orthonormal rotation, degenerate
/// intrinsics).
class CalibrationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace fusebox

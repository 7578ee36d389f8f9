// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace volsurf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument does not hold (bad k, non-positive beta, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Gradient vanished where a normal was requested.
class DegenerateNormalError : public Error {
 public:
  using Error::Error;
};

/// Marching cubes found no zero crossing, or a shell layer came out empty.
class EmptyMeshError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent file content (scene, manifest, mesh, image).
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Optimisation produced a non-finite loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace volsurf

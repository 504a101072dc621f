// Copyright 2026 The ttaug Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ttaug {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure while talking to an embedding/TTS backend (CLI exit code 3).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Backend did not answer within the configured deadline.
class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Backend answered, but the response violates the wire contract
/// (wrong dim, missing field, unparsable JSON).
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Malformed or inconsistent on-disk data (CLI exit code 4).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Requested key is absent. Distinguishable from I/O failure or corruption.
class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

/// Key already present in a uniqueness-enforcing container.
class DuplicateKeyError : public DataError {
 public:
  using DataError::DataError;
};

/// Stored bytes fail a checksum or length check.
class CorruptionError : public DataError {
 public:
  using DataError::DataError;
};

/// Text or binary input that cannot be parsed.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// Mathematically degenerate input (zero vector, empty buffer, ...).
/// Raised instead of silently producing NaN.
class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

/// Vector or tensor dimensions do not agree.
class DimMismatchError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace ttaug

//
// Copyright 2026 The fedcert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef FEDCERT_ERRORS_H_
#define FEDCERT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fedcert {

// Base class for every error raised by the library. Subclasses name the
// category so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (bad magic, truncated payload, header mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters or an inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse: empty inputs, mismatched ledgers and similar.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Vector or parameter length mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Trigger pattern referencing features outside the example.
class PatternError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain where a bound is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedcert

#endif  // FEDCERT_ERRORS_H_

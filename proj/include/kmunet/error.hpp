// Copyright 2026 The kmunet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <stdexcept>
#include <string>

namespace kmunet {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (non-binary mask, non-scalar
// loss, tape reuse, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// File system and file-format problems. Messages always carry the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// A numerical check failed (NaN gradient, gradient check mismatch).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kmunet

// Copyright 2026 The MergeMix Lab Authors.
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

namespace mergemix {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or indices that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the domain an operation accepts.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf was produced; the message names the producing op.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid or incomplete configuration. Messages start with the field name.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system and file-format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mergemix

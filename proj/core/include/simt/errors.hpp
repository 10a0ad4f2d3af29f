// Copyright 2026 The simt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace simt {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that cannot be combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Bad data: out-of-vocabulary ids, malformed files, invalid task specs.
class InputError : public Error {
 public:
  using Error::Error;
};

/// API misuse (non-scalar backward, k outside the threshold range, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition; usually a policy bug.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

/// A delay schedule that never reaches the full source length.
class IncompleteScheduleError : public Error {
 public:
  using Error::Error;
};

/// Training loss became NaN or infinite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Input file line that could not be parsed; carries the 1-based line number.
class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace simt

// Copyright (c) the iqlab Authors
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

#ifndef IQLAB_ERROR_HPP_
#define IQLAB_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iqlab {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad inputs: malformed files, violated preconditions, inconsistent
/// configuration. Maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed structured text. Carries the position (1-based line for
/// line-oriented formats, byte offset for single records) that failed.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset)
      : ValidationError(what), line_(line), offset_(offset) {}

  static ParseError at_line(std::size_t line, const std::string& what) {
    return ParseError(what + " (line " + std::to_string(line) + ")", line, 0);
  }
  static ParseError at_offset(std::size_t offset, const std::string& what) {
    return ParseError(what + " (byte offset " + std::to_string(offset) + ")",
                      0, offset);
  }

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_ = 0;
  std::size_t offset_ = 0;
};

/// A correlation was requested on degenerate data (constant vector).
/// Surfaced rather than silently reported as zero.
class UndefinedCorrelationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite parameters detected during optimization. Maps to exit code 3.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Filesystem failure while writing artifacts. Maps to exit code 3.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqlab

#endif  // IQLAB_ERROR_HPP_

// speechchain/errors.hpp

// Copyright 2026  speechchain authors

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

#ifndef SPEECHCHAIN_ERRORS_HPP
#define SPEECHCHAIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace speechchain {

// Error categories map onto CLI exit codes: 2 config, 3 data, 4 numeric.
class Error : public std::runtime_error {
 public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

class DataError : public Error {
 public:
  explicit DataError(std::string msg) : Error(std::move(msg), 3) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(std::string msg) : Error(std::move(msg), 4) {}
};

// Operand shapes incompatible with an operation.
class ShapeError : public NumericError {
 public:
  explicit ShapeError(std::string msg) : NumericError(std::move(msg)) {}
};

}  // namespace speechchain

#endif  // SPEECHCHAIN_ERRORS_HPP

// Copyright 2026 The zennas Authors.
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

namespace zennas {

// Base of every error the library throws. Derived types map onto the CLI
// exit-code taxonomy (see tools/zennas_cli.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or channel counts that do not line up.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Malformed architecture / config / cost-model text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string location)
      : Error(location.empty() ? what : location + ": " + what),
        location_(std::move(location)) {}

  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Mutation could not produce a valid architecture within the attempt limit.
class MutationExhausted : public Error {
 public:
  using Error::Error;
};

// No architecture of the space satisfies the budget.
class SpaceInfeasible : public Error {
 public:
  using Error::Error;
};

// Every channel of the scored network died, so the score is undefined.
class DegenerateScore : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace zennas

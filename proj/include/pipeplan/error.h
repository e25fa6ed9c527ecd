// Copyright 2026 The Pipeplan Authors.
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

#ifndef PIPEPLAN_ERROR_H_
#define PIPEPLAN_ERROR_H_

#include <stdexcept>
#include <string>

namespace pipeplan {

// Base of every error the planner raises. Callers that only care about
// "planning failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed profile or plan document.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A cost lookup outside the profiled batch-size range.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

// No partition satisfies the structural constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Brute-force oracle asked to enumerate beyond its size guards.
class OracleTooLargeError : public Error {
 public:
  using Error::Error;
};

// Every point of a search space failed.
class NoFeasiblePlanError : public Error {
 public:
  using Error::Error;
};

// File system failure, message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pipeplan

#endif  // PIPEPLAN_ERROR_H_

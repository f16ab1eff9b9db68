// Copyright 2026 The obsctl Authors
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

#ifndef OBSCTL_ERROR_HPP_
#define OBSCTL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace oc {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf reached an operation that requires finite input.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// A weight matrix or an innovation matrix that must be inverted is not
// positive definite.
class SingularObjectiveError : public Error {
 public:
  using Error::Error;
};

// The supplied Hessian has a negative eigenvalue, so the point is not a
// local minimum of the objective.
class NotMinimumError : public Error {
 public:
  using Error::Error;
};

// An iterative solve failed to converge (e.g. unstabilizable Riccati pair).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Precondition on a scalar argument violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested algorithm/backend/plant combination is not supported.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail
}  // namespace oc

#endif  // OBSCTL_ERROR_HPP_

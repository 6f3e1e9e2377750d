// Copyright 2026 The diffsim Authors
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

#ifndef DIFFSIM_ERROR_HPP_
#define DIFFSIM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace diffsim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent model descriptions and bindings.
struct ModelError : Error {
  using Error::Error;
};

// Non-physical dynamics (e.g. singular articulated inertia).
struct DynamicsError : Error {
  using Error::Error;
};

// Solver failures: divergence, step underflow, evaluation budget.
struct IntegrationError : Error {
  using Error::Error;
};

// Optimizer failures that leave no usable iterate.
struct OptimError : Error {
  using Error::Error;
};

// Bad harness configuration or I/O.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace diffsim

#endif  // DIFFSIM_ERROR_HPP_

/*
 * Copyright 2026 The riskverse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace riskverse {

// Bad input data: malformed files, out-of-range values, schema mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model could not be fitted (single class, collinearity, degenerate
// variables, ...).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by fit_logistic_irls when two design columns are exactly collinear.
// Column indices refer to the design matrix passed in, with -1 standing for
// the implicit intercept.
class CollinearityError : public FitError {
 public:
  CollinearityError(int first, int second, const std::string& message)
      : FitError(message), first_(first), second_(second) {}
  int first() const noexcept { return first_; }
  int second() const noexcept { return second_; }

 private:
  int first_;
  int second_;
};

}  // namespace riskverse

// Copyright 2026 The dpwb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPWB_ERRORS_HPP
#define DPWB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dpwb {

// Malformed or out-of-contract inputs (bad sizes, non-finite values,
// parameters outside their legal range).
class InvalidInputError : public std::invalid_argument {
 public:
  explicit InvalidInputError(const std::string& what)
      : std::invalid_argument(what) {}
};

// A pluggable callback (teacher ensemble, tokenizer, scorer) violated its
// contract, e.g. answered outside the declared candidate domain.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Unknown key in a lookup table (model name, hardware name).
class LookupError : public std::out_of_range {
 public:
  explicit LookupError(const std::string& what) : std::out_of_range(what) {}
};

// Noise calibration could not reach the requested target inside its bracket.
class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what)
      : std::runtime_error(what) {}
};

// Numerical failure during training (divergence, non-finite weights).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dpwb

#endif  // DPWB_ERRORS_HPP

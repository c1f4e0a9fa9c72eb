/*
 Copyright 2026 The pvdfl Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace pvdfl {

// Values mirror the status codes of the C API (pvdfl.h).
enum class ErrorCode : int {
  LengthMismatch = 1,
  NegativeEnergy = 2,
  PriceInversion = 3,
  NonFinite = 4,
  InvalidBattery = 5,
  Infeasible = 6,
  MaxIterations = 7,
  ScheduleInfeasible = 8,
  SingularKkt = 9,
  PreconditionViolated = 10,
  NonFiniteLoss = 11,
  ConfigInvalid = 12,
  ParseError = 13,
  SchemaError = 14,
  ZeroMaxPv = 15,
  DegenerateScale = 16,
  ZeroVariance = 17,
  IoError = 18,
  MissingCheckpoint = 19,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace pvdfl

// Copyright 2026 The FlowDyn Authors
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

#ifndef FLOWDYN_ERROR_H_
#define FLOWDYN_ERROR_H_

#include <stdexcept>
#include <string>

namespace flowdyn {

// Failure classes. Each maps onto one CLI exit status.
enum class ErrorCode {
  kInvalidArgument,   // bad input to an operation or bad command usage
  kDataError,         // malformed, truncated, or mismatched files
  kNumericalFailure,  // non-finite values, solver non-convergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void ThrowInvalidArgument(const std::string& message);
[[noreturn]] void ThrowDataError(const std::string& message);
[[noreturn]] void ThrowNumericalFailure(const std::string& message);

// 1 usage, 2 data, 3 numerical.
int ExitStatusFor(ErrorCode code);

}  // namespace flowdyn

#endif  // FLOWDYN_ERROR_H_

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

#include "flowdyn/error.h"

namespace flowdyn {

void ThrowInvalidArgument(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

void ThrowDataError(const std::string& message) {
  throw Error(ErrorCode::kDataError, message);
}

void ThrowNumericalFailure(const std::string& message) {
  throw Error(ErrorCode::kNumericalFailure, message);
}

int ExitStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return 1;
    case ErrorCode::kDataError:
      return 2;
    case ErrorCode::kNumericalFailure:
      return 3;
  }
  return 1;
}

}  // namespace flowdyn

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

#ifndef FLOWDYN_ATOMIC_FILE_H_
#define FLOWDYN_ATOMIC_FILE_H_

#include <string>
#include <string_view>

namespace flowdyn {

// Writes to a sibling temp file, then renames over `path`. Readers never see
// a partially written file. Throws kDataError on I/O failure.
void WriteFileAtomic(const std::string& path, std::string_view contents);

// Whole-file read. Throws kDataError if the file cannot be opened.
std::string ReadFile(const std::string& path);

}  // namespace flowdyn

#endif  // FLOWDYN_ATOMIC_FILE_H_

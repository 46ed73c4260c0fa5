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

// In-process entry point of the flowdyn command-line tool.

#ifndef FLOWDYN_TOOLS_CLI_H_
#define FLOWDYN_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace flowdyn {

// args excludes the program name. Returns the process exit status:
// 0 success, 1 usage, 2 data error, 3 numerical failure.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace flowdyn

#endif  // FLOWDYN_TOOLS_CLI_H_

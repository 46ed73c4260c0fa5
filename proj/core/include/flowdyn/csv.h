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

#ifndef FLOWDYN_CSV_H_
#define FLOWDYN_CSV_H_

#include <string>
#include <string_view>
#include <vector>

namespace flowdyn {

// Shortest decimal form that round-trips to the same double.
std::string FormatDouble(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws kDataError when absent.
  size_t Column(std::string_view name) const;
};

// Plain comma separation, no quoting. Throws kDataError on ragged rows.
CsvTable ParseCsv(std::string_view text);

double ParseDouble(std::string_view field);

}  // namespace flowdyn

#endif  // FLOWDYN_CSV_H_

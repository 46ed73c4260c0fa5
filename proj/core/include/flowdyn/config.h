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

// Run configuration: plain-text sections of key = value lines.
//
//   [plant]
//   tension_limit = 50   # comment
//
// Unknown sections or keys are errors naming the offending line.

#ifndef FLOWDYN_CONFIG_H_
#define FLOWDYN_CONFIG_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flowdyn/dataio.h"
#include "flowdyn/flowmatch.h"
#include "flowdyn/rod_sim.h"
#include "flowdyn/rollout.h"

namespace flowdyn {

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  std::string location;  // "file:line"
};

// Throws kInvalidArgument naming "source:line" for malformed lines.
std::vector<ConfigEntry> ParseConfigText(std::string_view text,
                                         const std::string& source);

struct EvaluationConfig {
  std::vector<std::string> trajectories = {"circle"};
  int seeds = 5;
  uint64_t seed_base = 0;
  ReferenceParams reference;
  bool fixed_noise = false;
  int holdout_episodes = 10;
  uint64_t holdout_seed_base = 1000000;
};

struct PathsConfig {
  std::string dataset = "data.fdyn";
  std::string models = "models";
  std::string reports = "reports";
};

struct RunConfig {
  RodParams plant;
  DatasetSpec data;
  int table_resolution = 21;
  FlowTrainConfig training;
  EvaluationConfig evaluation;
  PathsConfig paths;
};

// Sets one field; `location` prefixes error messages.
void SetConfigValue(RunConfig& config, const std::string& section,
                    const std::string& key, const std::string& value,
                    const std::string& location);

void ApplyConfigEntries(RunConfig& config,
                        const std::vector<ConfigEntry>& entries);

// Reads and applies a config file on top of `config`.
void LoadConfigFile(RunConfig& config, const std::string& path);

// Every field in config-file syntax; parses back to the same RunConfig.
std::string FormatRunConfig(const RunConfig& config);

}  // namespace flowdyn

#endif  // FLOWDYN_CONFIG_H_

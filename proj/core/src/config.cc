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

#include "flowdyn/config.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include "flowdyn/atomic_file.h"
#include "flowdyn/csv.h"
#include "flowdyn/error.h"

namespace flowdyn {
namespace {

std::string Trim(std::string_view s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Bad(const std::string& location, const std::string& msg) {
  ThrowInvalidArgument(location + ": " + msg);
}

double ToDouble(const std::string& v, const std::string& loc) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    Bad(loc, "expected a number, got '" + v + "'");
  }
  return out;
}

int64_t ToInt(const std::string& v, const std::string& loc) {
  int64_t out = 0;
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    Bad(loc, "expected an integer, got '" + v + "'");
  }
  return out;
}

uint64_t ToU64(const std::string& v, const std::string& loc) {
  uint64_t out = 0;
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    Bad(loc, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

int ToCount(const std::string& v, const std::string& loc) {
  const int64_t n = ToInt(v, loc);
  if (n < 0 || n > INT32_MAX) Bad(loc, "count out of range: " + v);
  return static_cast<int>(n);
}

bool ToBool(const std::string& v, const std::string& loc) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  Bad(loc, "expected true or false, got '" + v + "'");
}

std::vector<std::string> SplitList(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string JoinList(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

}  // namespace

std::vector<ConfigEntry> ParseConfigText(std::string_view text,
                                         const std::string& source) {
  std::vector<ConfigEntry> entries;
  std::string section;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string loc = source + ":" + std::to_string(line_no);
    const size_t hash = raw.find('#');
    const std::string line = Trim(raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        Bad(loc, "malformed section header '" + line + "'");
      }
      section = Trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) Bad(loc, "expected key = value");
    if (section.empty()) Bad(loc, "key outside of any [section]");
    ConfigEntry e{section, Trim(std::string_view(line).substr(0, eq)),
                  Trim(std::string_view(line).substr(eq + 1)), loc};
    if (e.key.empty()) Bad(loc, "empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

void SetConfigValue(RunConfig& c, const std::string& section,
                    const std::string& key, const std::string& v,
                    const std::string& loc) {
  auto unknown = [&]() {
    Bad(loc, "unknown key '" + key + "' in [" + section + "]");
  };
  if (section == "plant") {
    RodParams& p = c.plant;
    if (key == "length") p.length = ToDouble(v, loc);
    else if (key == "diameter") p.diameter = ToDouble(v, loc);
    else if (key == "cable_offset") p.cable_offset = ToDouble(v, loc);
    else if (key == "youngs_modulus") p.youngs_modulus = ToDouble(v, loc);
    else if (key == "damping") p.damping = ToDouble(v, loc);
    else if (key == "density") p.density = ToDouble(v, loc);
    else if (key == "n_links") p.n_links = ToCount(v, loc);
    else if (key == "tension_limit") p.tension_limit = ToDouble(v, loc);
    else if (key == "substeps") p.substeps = ToCount(v, loc);
    else if (key == "gravity") {
      const std::vector<std::string> g = SplitList(v);
      if (g.size() != 3) Bad(loc, "gravity needs 3 comma-separated values");
      for (int i = 0; i < 3; ++i) p.gravity[i] = ToDouble(g[i], loc);
    } else {
      unknown();
    }
  } else if (section == "data") {
    ExcitationSpec& x = c.data.excitation;
    if (key == "episodes") c.data.episodes = ToU64(v, loc);
    else if (key == "seed") c.data.seed_base = ToU64(v, loc);
    else if (key == "degree") x.degree = ToCount(v, loc);
    else if (key == "duration") x.duration = ToDouble(v, loc);
    else if (key == "amplitude_bound") x.amplitude_bound = ToDouble(v, loc);
    else if (key == "dt") x.dt = ToDouble(v, loc);
    else if (key == "smoothing") {
      if (v == "none") x.smoothing.reset();
      else x.smoothing = ToDouble(v, loc);
    } else if (key == "table_resolution") {
      c.table_resolution = ToCount(v, loc);
    } else {
      unknown();
    }
  } else if (section == "training") {
    FlowTrainConfig& t = c.training;
    try {
      if (key == "variant") t.variant = ParseVariant(v);
      else if (key == "lambda_cons") t.lambda_cons = ToDouble(v, loc);
      else if (key == "inference_steps") t.inference_steps = ToCount(v, loc);
      else if (key == "epochs") t.epochs = ToCount(v, loc);
      else if (key == "batch_size") t.batch_size = ToCount(v, loc);
      else if (key == "lr") t.lr = ToDouble(v, loc);
      else if (key == "seed") t.seed = ToU64(v, loc);
      else if (key == "consistency_estimator") t.estimator = ParseEstimator(v);
      else if (key == "unroll_steps") t.unroll_steps = ToCount(v, loc);
      else if (key == "hidden_layers") t.hidden_layers = ToCount(v, loc);
      else if (key == "hidden_width") t.hidden_width = ToCount(v, loc);
      else if (key == "surrogate_layers") t.surrogate_layers = ToCount(v, loc);
      else if (key == "surrogate_width") t.surrogate_width = ToCount(v, loc);
      else if (key == "surrogate_epochs") t.surrogate_epochs = ToCount(v, loc);
      else unknown();
    } catch (const Error& e) {
      if (std::string_view(e.what()).starts_with(loc)) throw;
      Bad(loc, e.what());
    }
  } else if (section == "evaluation") {
    EvaluationConfig& e = c.evaluation;
    ReferenceParams& r = e.reference;
    if (key == "trajectories") {
      e.trajectories = SplitList(v);
      for (const std::string& name : e.trajectories) {
        try {
          ParseTrajectoryKind(name);
        } catch (const Error& err) {
          Bad(loc, err.what());
        }
      }
    } else if (key == "seeds") e.seeds = ToCount(v, loc);
    else if (key == "seed_base") e.seed_base = ToU64(v, loc);
    else if (key == "fixed_noise") e.fixed_noise = ToBool(v, loc);
    else if (key == "holdout_episodes") e.holdout_episodes = ToCount(v, loc);
    else if (key == "holdout_seed_base") e.holdout_seed_base = ToU64(v, loc);
    else if (key == "radius") r.radius = ToDouble(v, loc);
    else if (key == "radius_fraction") r.radius_fraction = ToDouble(v, loc);
    else if (key == "period") r.period = ToDouble(v, loc);
    else if (key == "duration") r.duration = ToDouble(v, loc);
    else if (key == "lead_in") r.lead_in = ToDouble(v, loc);
    else if (key == "burst_period_max") r.burst_period_max = ToDouble(v, loc);
    else if (key == "burst_period_min") r.burst_period_min = ToDouble(v, loc);
    else if (key == "trajectory_seed") r.seed = ToU64(v, loc);
    else unknown();
  } else if (section == "paths") {
    if (key == "dataset") c.paths.dataset = v;
    else if (key == "models") c.paths.models = v;
    else if (key == "reports") c.paths.reports = v;
    else unknown();
  } else {
    Bad(loc, "unknown section [" + section + "]");
  }
}

void ApplyConfigEntries(RunConfig& config,
                        const std::vector<ConfigEntry>& entries) {
  for (const ConfigEntry& e : entries) {
    SetConfigValue(config, e.section, e.key, e.value, e.location);
  }
}

void LoadConfigFile(RunConfig& config, const std::string& path) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const Error& e) {
    ThrowInvalidArgument(std::string("config: ") + e.what());
  }
  ApplyConfigEntries(config, ParseConfigText(text, path));
}

std::string FormatRunConfig(const RunConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* key, const std::string& value) {
    os << key << " = " << value << '\n';
  };
  auto num = [](double v) { return FormatDouble(v); };
  const RodParams& p = c.plant;
  os << "[plant]\n";
  kv("length", num(p.length));
  kv("diameter", num(p.diameter));
  kv("cable_offset", num(p.cable_offset));
  kv("youngs_modulus", num(p.youngs_modulus));
  kv("damping", num(p.damping));
  kv("density", num(p.density));
  kv("n_links", std::to_string(p.n_links));
  kv("gravity", num(p.gravity[0]) + "," + num(p.gravity[1]) + "," +
                    num(p.gravity[2]));
  kv("tension_limit", num(p.tension_limit));
  kv("substeps", std::to_string(p.substeps));
  const ExcitationSpec& x = c.data.excitation;
  os << "\n[data]\n";
  kv("episodes", std::to_string(c.data.episodes));
  kv("seed", std::to_string(c.data.seed_base));
  kv("degree", std::to_string(x.degree));
  kv("duration", num(x.duration));
  kv("amplitude_bound", num(x.amplitude_bound));
  kv("smoothing", x.smoothing ? num(*x.smoothing) : "none");
  kv("dt", num(x.dt));
  kv("table_resolution", std::to_string(c.table_resolution));
  const FlowTrainConfig& t = c.training;
  os << "\n[training]\n";
  kv("variant", std::string(VariantName(t.variant)));
  kv("lambda_cons", num(t.lambda_cons));
  kv("inference_steps", std::to_string(t.inference_steps));
  kv("epochs", std::to_string(t.epochs));
  kv("batch_size", std::to_string(t.batch_size));
  kv("lr", num(t.lr));
  kv("seed", std::to_string(t.seed));
  kv("consistency_estimator", std::string(EstimatorName(t.estimator)));
  kv("unroll_steps", std::to_string(t.unroll_steps));
  kv("hidden_layers", std::to_string(t.hidden_layers));
  kv("hidden_width", std::to_string(t.hidden_width));
  kv("surrogate_layers", std::to_string(t.surrogate_layers));
  kv("surrogate_width", std::to_string(t.surrogate_width));
  kv("surrogate_epochs", std::to_string(t.surrogate_epochs));
  const EvaluationConfig& e = c.evaluation;
  const ReferenceParams& r = e.reference;
  os << "\n[evaluation]\n";
  kv("trajectories", JoinList(e.trajectories));
  kv("seeds", std::to_string(e.seeds));
  kv("seed_base", std::to_string(e.seed_base));
  kv("fixed_noise", e.fixed_noise ? "true" : "false");
  kv("holdout_episodes", std::to_string(e.holdout_episodes));
  kv("holdout_seed_base", std::to_string(e.holdout_seed_base));
  kv("radius", num(r.radius));
  kv("radius_fraction", num(r.radius_fraction));
  kv("period", num(r.period));
  kv("duration", num(r.duration));
  kv("lead_in", num(r.lead_in));
  kv("burst_period_max", num(r.burst_period_max));
  kv("burst_period_min", num(r.burst_period_min));
  kv("trajectory_seed", std::to_string(r.seed));
  os << "\n[paths]\n";
  kv("dataset", c.paths.dataset);
  kv("models", c.paths.models);
  kv("reports", c.paths.reports);
  return os.str();
}

}  // namespace flowdyn

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

#include "cli.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "flowdyn/atomic_file.h"
#include "flowdyn/binary_io.h"
#include "flowdyn/config.h"
#include "flowdyn/csv.h"
#include "flowdyn/dataio.h"
#include "flowdyn/error.h"
#include "flowdyn/flowmatch.h"
#include "flowdyn/parallel.h"
#include "flowdyn/rollout.h"
#include "flowdyn/static_table.h"

namespace flowdyn {
namespace {

namespace fs = std::filesystem;

// A flag that overrides one config field when given.
struct Override {
  std::string section;
  std::string key;
  std::string flag;
  std::optional<std::string> value;
};

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  bool dry_run = false;
  std::vector<std::unique_ptr<Override>> overrides;
  std::map<std::string, std::string> values;  // command-local flags
  std::vector<std::string> models;

  void Bind(const std::string& flag, const std::string& section,
            const std::string& key, const std::string& help) {
    auto o = std::make_unique<Override>(Override{section, key, flag, {}});
    app->add_option(flag, o->value, help);
    overrides.push_back(std::move(o));
  }
  void Local(const std::string& flag, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, flag](const std::string& v) { values[flag] = v; }, help);
  }
  std::optional<std::string> Get(const std::string& name) const {
    const auto it = values.find(name);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }
};

RunConfig Resolve(const Command& cmd) {
  RunConfig config;
  if (!cmd.config_path.empty()) LoadConfigFile(config, cmd.config_path);
  for (const auto& o : cmd.overrides) {
    if (o->value) {
      SetConfigValue(config, o->section, o->key, *o->value, o->flag);
    }
  }
  return config;
}

void EnsureParent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) ThrowDataError("cannot create directory " + parent.string());
  }
}

void Write(const std::string& path, std::string_view contents) {
  EnsureParent(path);
  WriteFileAtomic(path, contents);
}

void RequireFile(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) {
    ThrowDataError(what + " not found: " + path);
  }
}

std::string Stem(const std::string& path) {
  return fs::path(path).stem().string();
}

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string LossLogPath(const std::string& model_path) {
  fs::path p(model_path);
  p.replace_extension(".loss.csv");
  return p.string();
}

void PrintDryRun(std::ostream& out, const RunConfig& config,
                 const std::vector<std::pair<std::string, std::string>>& extra) {
  out << FormatRunConfig(config);
  if (!extra.empty()) out << "\n[command]\n";
  for (const auto& [k, v] : extra) out << k << " = " << v << '\n';
}

StaticTable TableFor(const RunConfig& config) {
  return BuildStaticTable(config.plant, config.table_resolution);
}

int GenData(const Command& cmd, std::ostream& out) {
  const RunConfig config = Resolve(cmd);
  const std::string path = cmd.Get("--out").value_or(config.paths.dataset);
  const auto csv = cmd.Get("--csv");
  if (cmd.dry_run) {
    PrintDryRun(out, config, {{"out", path}, {"csv", csv.value_or("")}});
    return 0;
  }
  config.plant.Validate();
  config.data.excitation.Validate(config.plant);
  const StaticTable table = TableFor(config);
  const Dataset ds =
      GenerateDataset(config.data, config.plant, table, WorkerCount());
  Write(path, EncodeDataset(ds));
  if (csv) {
    Write(*csv, TransitionsCsv(ds.tuples, ds.metadata.dt,
                               ds.metadata.steps_per_episode));
  }
  out << "gen-data: " << ds.tuples.size() << " tuples from "
      << ds.metadata.episode_count << " episodes -> " << path << '\n';
  return 0;
}

int Train(const Command& cmd, std::ostream& out, std::ostream& err) {
  const RunConfig config = Resolve(cmd);
  const FlowTrainConfig& tc = config.training;
  const std::string data = config.paths.dataset;
  const std::string model_path = cmd.Get("--out").value_or(
      Join(config.paths.models, std::string(VariantName(tc.variant)) + ".fmnn"));
  const std::string loss_path =
      cmd.Get("--loss-log").value_or(LossLogPath(model_path));
  const auto surrogate_from = cmd.Get("--surrogate");
  if (cmd.dry_run) {
    PrintDryRun(out, config,
                {{"out", model_path},
                 {"loss_log", loss_path},
                 {"surrogate", surrogate_from.value_or("")}});
    return 0;
  }
  tc.Validate();
  RequireFile(data, "dataset");
  std::optional<Surrogate> surrogate;
  if (surrogate_from) {
    RequireFile(*surrogate_from, "surrogate model");
    InverseModel donor = LoadModel(*surrogate_from);
    if (!donor.surrogate) {
      ThrowDataError(*surrogate_from + ": model has no surrogate record");
    }
    surrogate = std::move(donor.surrogate);
  }
  const Dataset ds = LoadDataset(data);
  if (ds.params.Hash() != config.plant.Hash()) {
    err << "train: note: dataset plant parameters differ from the config; "
           "using the dataset's\n";
  }
  const TrainResult result =
      TrainInverse(ds, tc, surrogate ? &*surrogate : nullptr);
  EnsureParent(model_path);
  SaveModel(model_path, result.model);
  Write(loss_path, LossLogCsv(result.log));
  const LossRow& last = result.log.back();
  out << "train: " << VariantName(tc.variant) << " epochs=" << tc.epochs
      << " loss_total " << FormatDouble(result.log.front().loss_total)
      << " -> " << FormatDouble(last.loss_total) << "; " << model_path
      << ", " << loss_path << '\n';
  return 0;
}

std::vector<TrajectoryKind> Trajectories(const RunConfig& config) {
  std::vector<TrajectoryKind> kinds;
  for (const std::string& name : config.evaluation.trajectories) {
    const TrajectoryKind k = ParseTrajectoryKind(name);
    if (k == TrajectoryKind::kFromEpisode) {
      ThrowInvalidArgument("trajectory 'episode' is not available here");
    }
    kinds.push_back(k);
  }
  if (kinds.empty()) ThrowInvalidArgument("no trajectories selected");
  return kinds;
}

std::vector<InverseModel> LoadModels(const std::vector<std::string>& paths) {
  if (paths.empty()) ThrowInvalidArgument("--model is required");
  std::vector<InverseModel> models;
  for (const std::string& p : paths) {
    RequireFile(p, "model");
    models.push_back(LoadModel(p));
  }
  for (const InverseModel& m : models) {
    if (m.params.Hash() != models.front().params.Hash()) {
      ThrowDataError("models were trained on different plants");
    }
  }
  return models;
}

int Evaluate(const Command& cmd, std::ostream& out) {
  const RunConfig config = Resolve(cmd);
  const std::string path =
      cmd.Get("--out").value_or(Join(config.paths.reports, "metrics.csv"));
  const EvaluationConfig& ec = config.evaluation;
  if (cmd.dry_run) {
    std::string models;
    for (const auto& m : cmd.models) models += (models.empty() ? "" : ",") + m;
    PrintDryRun(out, config, {{"model", models}, {"out", path}});
    return 0;
  }
  if (ec.seeds < 1) ThrowInvalidArgument("--seeds must be >= 1");
  const std::vector<TrajectoryKind> kinds = Trajectories(config);
  const std::vector<InverseModel> models = LoadModels(cmd.models);
  const RodParams& plant = models.front().params;
  const StaticTable table = BuildStaticTable(plant, config.table_resolution);
  std::vector<ReferenceTrajectory> refs;
  for (TrajectoryKind k : kinds) {
    refs.push_back(GenReference(k, ec.reference, kControlDt, plant, table));
  }
  const size_t seeds = static_cast<size_t>(ec.seeds);
  const size_t jobs = models.size() * refs.size() * seeds;
  std::vector<MetricsRow> rows(jobs);
  ParallelFor(jobs, WorkerCount(), [&](size_t j) {
    const size_t m = j / (refs.size() * seeds);
    const size_t r = (j / seeds) % refs.size();
    const uint64_t seed = ec.seed_base + j % seeds;
    const Evaluation ev =
        EvaluateReference(models[m], refs[r], seed, ec.fixed_noise, 1);
    rows[j] = {Stem(cmd.models[m]),
               std::string(VariantName(models[m].variant)),
               std::string(TrajectoryName(refs[r].kind)),
               seed,
               ev.report.rmse * 1e3,
               ev.report.phase_lag,
               ev.report.input_energy,
               ev.report.peak_speed};
  });
  Write(path, MetricsCsv(rows));
  for (size_t m = 0; m < models.size(); ++m) {
    for (size_t r = 0; r < refs.size(); ++r) {
      std::vector<double> rmse;
      for (size_t s = 0; s < seeds; ++s) {
        rmse.push_back(rows[(m * refs.size() + r) * seeds + s].rmse_mm);
      }
      std::sort(rmse.begin(), rmse.end());
      out << "evaluate: " << Stem(cmd.models[m]) << ' '
          << TrajectoryName(refs[r].kind) << " median rmse "
          << FormatDouble(rmse[rmse.size() / 2]) << " mm over " << seeds
          << " seeds\n";
    }
  }
  out << "evaluate: " << rows.size() << " rows -> " << path << '\n';
  return 0;
}

int Rollout(const Command& cmd, std::ostream& out) {
  const RunConfig config = Resolve(cmd);
  const std::string traj = cmd.Get("--traj").value_or(
      config.evaluation.trajectories.empty()
          ? "circle"
          : config.evaluation.trajectories.front());
  const uint64_t seed = config.evaluation.seed_base;
  const std::string path = cmd.Get("--out").value_or(
      Join(config.paths.reports, "rollout_" + traj + ".csv"));
  if (cmd.dry_run) {
    PrintDryRun(out, config, {{"traj", traj}, {"out", path}});
    return 0;
  }
  if (cmd.models.size() != 1) ThrowInvalidArgument("rollout needs one --model");
  const TrajectoryKind kind = ParseTrajectoryKind(traj);
  const InverseModel model = LoadModels(cmd.models).front();
  const StaticTable table =
      BuildStaticTable(model.params, config.table_resolution);
  const ReferenceTrajectory ref = GenReference(
      kind, config.evaluation.reference, kControlDt, model.params, table);
  const Evaluation ev = EvaluateReference(model, ref, seed,
                                          config.evaluation.fixed_noise,
                                          WorkerCount());
  Write(path, TrajectoryCsv(ref, ev.achieved, ev.controls));
  out << "rollout: " << TrajectoryName(kind) << " rmse "
      << FormatDouble(ev.report.rmse * 1e3) << " mm, lag "
      << FormatDouble(ev.report.phase_lag) << " s, energy "
      << FormatDouble(ev.report.input_energy) << ", peak speed "
      << FormatDouble(ev.report.peak_speed) << " m/s, clamped "
      << ev.report.clamped << " -> " << path << '\n';
  return 0;
}

int Reconstruct(const Command& cmd, std::ostream& out) {
  const RunConfig config = Resolve(cmd);
  const EvaluationConfig& ec = config.evaluation;
  const std::string path =
      cmd.Get("--out").value_or(Join(config.paths.reports, "reconstruct.csv"));
  if (cmd.dry_run) {
    PrintDryRun(out, config, {{"out", path}});
    return 0;
  }
  if (cmd.models.size() != 1) {
    ThrowInvalidArgument("reconstruct needs one --model");
  }
  if (ec.holdout_episodes < 1) ThrowInvalidArgument("--episodes must be >= 1");
  const InverseModel model = LoadModels(cmd.models).front();
  const size_t n = static_cast<size_t>(ec.holdout_episodes);
  std::vector<Reconstruction> recs(n);
  ParallelFor(n, WorkerCount(), [&](size_t i) {
    ExcitationSpec spec = config.data.excitation;
    spec.seed = ec.holdout_seed_base + i;
    const Episode ep = RolloutEpisode(spec, model.params);
    recs[i] = ReconstructInputs(model, ep, ec.seed_base + i);
  });
  std::ostringstream csv;
  csv << "episode_seed,mae_u1,mae_u2,mae_pct_u1,mae_pct_u2\n";
  Eigen::Vector2d mean_pct = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < n; ++i) {
    const Reconstruction& r = recs[i];
    csv << ec.holdout_seed_base + i << ',' << FormatDouble(r.mae[0]) << ','
        << FormatDouble(r.mae[1]) << ',' << FormatDouble(r.mae_percent[0])
        << ',' << FormatDouble(r.mae_percent[1]) << '\n';
    mean_pct += r.mae_percent / static_cast<double>(n);
  }
  Write(path, csv.str());
  out << "reconstruct: " << n << " episodes, mean MAE "
      << FormatDouble(mean_pct[0]) << "% / " << FormatDouble(mean_pct[1])
      << "% of range -> " << path << '\n';
  return 0;
}

int BenchLatency(const Command& cmd, std::ostream& out) {
  const RunConfig config = Resolve(cmd);
  const std::string path =
      cmd.Get("--out").value_or(Join(config.paths.reports, "latency.csv"));
  const int n = std::stoi(cmd.Get("--n").value_or("1000"));
  const int warmup = std::stoi(cmd.Get("--warmup").value_or("100"));
  if (cmd.dry_run) {
    PrintDryRun(out, config, {{"out", path}, {"n", std::to_string(n)}});
    return 0;
  }
  if (n < 1 || warmup < 0) ThrowInvalidArgument("--n must be >= 1");
  if (cmd.models.size() != 1) {
    ThrowInvalidArgument("bench-latency needs one --model");
  }
  const InverseModel model = LoadModels(cmd.models).front();
  const int k = cmd.Get("-K") ? std::stoi(*cmd.Get("-K")) : model.inference_steps;
  if (k < 1) ThrowInvalidArgument("-K must be >= 1");
  Rng rng(config.evaluation.seed_base);
  auto random_state = [&] {
    Vector6d v;
    for (int i = 0; i < 6; ++i) v[i] = rng.Normal();
    return TaskState::FromVector(
        Vector6d(Transform(v, model.scaler.state, Direction::kInverse)));
  };
  std::vector<double> ms;
  double sink = 0.0;
  for (int q = 0; q < warmup + n; ++q) {
    const TaskState a = random_state();
    const TaskState b = random_state();
    const Eigen::Vector2d z(rng.Normal(), rng.Normal());
    const auto t0 = std::chrono::steady_clock::now();
    const ControlSample s = SampleControl(model, a, b, z, k);
    const auto t1 = std::chrono::steady_clock::now();
    sink += s.u[0];
    if (q >= warmup) {
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms.size() % 2 ? ms[ms.size() / 2]
                                      : 0.5 * (ms[ms.size() / 2 - 1] +
                                               ms[ms.size() / 2]);
  const size_t p95_idx = std::min(
      ms.size() - 1,
      static_cast<size_t>(std::ceil(0.95 * static_cast<double>(ms.size()))) - 1);
  const double p95 = ms[p95_idx];
  std::ostringstream csv;
  csv << "median_ms,p95_ms,K,n\n"
      << FormatDouble(median) << ',' << FormatDouble(p95) << ',' << k << ','
      << n << '\n';
  Write(path, csv.str());
  std::string dims;
  for (int d : model.net.dims) dims += (dims.empty() ? "" : "-") + std::to_string(d);
  out << "bench-latency: median " << FormatDouble(median) << " ms, p95 "
      << FormatDouble(p95) << " ms, K=" << k << ", n=" << n << ", net "
      << dims << (std::isfinite(sink) ? "" : " (non-finite output)") << " -> "
      << path << '\n';
  return 0;
}

int Export(const Command& cmd, std::ostream& out) {
  const auto in = cmd.Get("--in");
  const std::string format = cmd.Get("--format").value_or("csv");
  const auto dest = cmd.Get("--out");
  if (!in) ThrowInvalidArgument("export needs --in");
  if (format != "csv") {
    ThrowInvalidArgument("unknown export format '" + format + "' (only csv)");
  }
  if (!dest) ThrowInvalidArgument("export needs --out");
  if (cmd.dry_run) {
    PrintDryRun(out, Resolve(cmd),
                {{"in", *in}, {"format", format}, {"out", *dest}});
    return 0;
  }
  RequireFile(*in, "export source");
  const std::string bytes = ReadFile(*in);
  std::string csv;
  std::string kind;
  if (bytes.size() >= 4 && bytes.compare(0, 4, "FDYN") == 0) {
    const Dataset ds = DecodeDataset(bytes, *in);
    csv = TransitionsCsv(ds.tuples, ds.metadata.dt,
                         ds.metadata.steps_per_episode);
    kind = "transitions";
  } else if (bytes.starts_with("model,variant,trajectory,seed,")) {
    csv = MetricsCsv(ParseMetricsCsv(bytes));
    kind = "metrics";
  } else if (bytes.starts_with("t,ref_x,")) {
    const CsvTable t = ParseCsv(bytes);
    std::ostringstream os;
    for (size_t i = 0; i < t.header.size(); ++i) {
      os << (i ? "," : "") << t.header[i];
    }
    os << '\n';
    for (const auto& row : t.rows) {
      for (size_t i = 0; i < row.size(); ++i) {
        os << (i ? "," : "")
           << (row[i].empty() ? "" : FormatDouble(ParseDouble(row[i])));
      }
      os << '\n';
    }
    csv = os.str();
    kind = "trajectory";
  } else {
    ThrowDataError(*in + ": not a dataset, metrics report, or trajectory");
  }
  Write(*dest, csv);
  out << "export: " << kind << " -> " << *dest << '\n';
  return 0;
}

void AddCommon(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_path,
                      "Sectioned key=value config file");
  cmd.app->add_flag("--dry-run", cmd.dry_run,
                    "Print the resolved configuration and exit");
  cmd.Bind("--table-resolution", "data", "table_resolution",
           "Static table lattice points per axis");
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"flowdyn: rectified-flow inverse dynamics for a cable-driven "
               "rod"};
  app.name("flowdyn");
  app.require_subcommand(1);
  std::map<std::string, Command> cmds;
  auto sub = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, help);
    AddCommon(c);
    return c;
  };

  Command& gen = sub("gen-data", "Generate a transition dataset");
  gen.Bind("--episodes", "data", "episodes", "Episode count");
  gen.Bind("--seed", "data", "seed", "Seed of episode 0");
  gen.Bind("--duration", "data", "duration", "Episode length, s");
  gen.Bind("--amplitude", "data", "amplitude_bound", "Peak tension bound, N");
  gen.Bind("--degree", "data", "degree", "Polynomial degree");
  gen.Local("--out", "Dataset output path");
  gen.Local("--csv", "Also export transitions as CSV");

  Command& train = sub("train", "Train an inverse model");
  train.Bind("--variant", "training", "variant", "rf, rf-fwd, rf-physical, mlp");
  train.Bind("--data", "paths", "dataset", "Dataset path");
  train.Bind("--epochs", "training", "epochs", "Training epochs");
  train.Bind("--seed", "training", "seed", "Training seed");
  train.Bind("--lambda-cons", "training", "lambda_cons", "Consistency weight");
  train.Bind("--batch-size", "training", "batch_size", "Minibatch size");
  train.Bind("--lr", "training", "lr", "Adam learning rate");
  train.Bind("--estimator", "training", "consistency_estimator",
             "terminal or unrolled");
  train.Bind("--steps", "training", "inference_steps", "Euler steps K");
  train.Bind("--surrogate-epochs", "training", "surrogate_epochs",
             "Surrogate training epochs");
  train.Local("--out", "Model output path");
  train.Local("--loss-log", "Loss CSV path");
  train.Local("--surrogate", "Reuse the surrogate stored in this model file");

  auto model_flag = [](Command& c) {
    c.app->add_option("--model", c.models, "Model file")->take_all();
  };
  auto eval_flags = [](Command& c) {
    c.Bind("--seed", "evaluation", "seed_base", "Noise seed");
    c.Bind("--radius", "evaluation", "radius", "Shape radius, m");
    c.Bind("--period", "evaluation", "period", "Shape period, s");
    c.Bind("--duration", "evaluation", "duration", "Shape duration, s");
    c.app->add_flag_function(
        "--fixed-noise",
        [&c](int64_t) { c.overrides.push_back(std::make_unique<Override>(
                            Override{"evaluation", "fixed_noise",
                                     "--fixed-noise", "true"})); },
        "Reuse one noise draw for every step");
  };

  Command& eval = sub("evaluate", "Track references and write metrics");
  model_flag(eval);
  eval_flags(eval);
  eval.Bind("--traj", "evaluation", "trajectories", "Comma-separated shapes");
  eval.Bind("--seeds", "evaluation", "seeds", "Noise seeds per trajectory");
  eval.Local("--out", "Metrics CSV path");

  Command& roll = sub("rollout", "Run one reference and export the trajectory");
  model_flag(roll);
  eval_flags(roll);
  roll.Local("--traj", "Shape name");
  roll.Local("--out", "Trajectory CSV path");

  Command& rec = sub("reconstruct", "Forward-then-inverse input reconstruction");
  model_flag(rec);
  rec.Bind("--seed", "evaluation", "seed_base", "Noise seed");
  rec.Bind("--episodes", "evaluation", "holdout_episodes", "Held-out episodes");
  rec.Bind("--episode-seed", "evaluation", "holdout_seed_base",
           "Seed of the first held-out episode");
  rec.Local("--out", "Report CSV path");

  Command& bench = sub("bench-latency", "Time single sample_control calls");
  model_flag(bench);
  bench.Bind("--seed", "evaluation", "seed_base", "Query seed");
  bench.Local("--n", "Timed queries");
  bench.Local("-K", "Euler steps (default: the model's)");
  bench.Local("--warmup", "Untimed warmup queries");
  bench.Local("--out", "Report CSV path");

  Command& exp = sub("export", "Convert a dataset, metrics report, or "
                               "trajectory to CSV");
  exp.Local("--in", "Source file");
  exp.Local("--format", "Output format (csv)");
  exp.Local("--out", "Destination path");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "flowdyn: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }
  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const Command& cmd = cmds.at(name);
    if (name == "gen-data") return GenData(cmd, out);
    if (name == "train") return Train(cmd, out, err);
    if (name == "evaluate") return Evaluate(cmd, out);
    if (name == "rollout") return Rollout(cmd, out);
    if (name == "reconstruct") return Reconstruct(cmd, out);
    if (name == "bench-latency") return BenchLatency(cmd, out);
    return Export(cmd, out);
  } catch (const Error& e) {
    err << "flowdyn: " << e.what() << '\n';
    return ExitStatusFor(e.code());
  } catch (const std::invalid_argument& e) {
    err << "flowdyn: bad number: " << e.what() << '\n';
    return 1;
  } catch (const std::out_of_range& e) {
    err << "flowdyn: number out of range: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace flowdyn

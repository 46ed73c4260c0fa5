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

#include "flowdyn/dataio.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "flowdyn/atomic_file.h"
#include "flowdyn/csv.h"
#include "flowdyn/error.h"
#include "flowdyn/parallel.h"
#include "flowdyn/rng.h"

namespace flowdyn {
namespace {

constexpr double kMinAmplitudeFraction = 0.3;
constexpr double kMaxAmplitudeFraction = 1.0;
constexpr uint64_t kTupleFields = 18;

double EvalPolynomial(const std::vector<double>& c, double t) {
  double acc = 0.0;
  for (size_t k = c.size(); k-- > 0;) acc = acc * t + c[k];
  return acc;
}

void PutTaskState(const TaskState& s, BinaryWriter& w) {
  w.F64(s.position[0]);
  w.F64(s.position[1]);
  w.F64(s.position[2]);
  w.F64(s.velocity[0]);
  w.F64(s.velocity[1]);
  w.F64(s.velocity[2]);
}

TaskState GetTaskState(BinaryReader& r) {
  TaskState s;
  for (int i = 0; i < 3; ++i) s.position[i] = r.F64();
  for (int i = 0; i < 3; ++i) s.velocity[i] = r.F64();
  return s;
}

void PutActuation(const Actuation& u, BinaryWriter& w) {
  w.F64(u[0]);
  w.F64(u[1]);
}

Actuation GetActuation(BinaryReader& r) {
  const double a = r.F64();
  const double b = r.F64();
  return Actuation(a, b);
}

}  // namespace

void ExcitationSpec::Validate(const RodParams& params) const {
  if (degree < 0) ThrowInvalidArgument("ExcitationSpec: degree must be >= 0");
  if (!(duration > 0.0)) {
    ThrowInvalidArgument("ExcitationSpec: duration must be > 0");
  }
  if (!(dt > 0.0)) ThrowInvalidArgument("ExcitationSpec: dt must be > 0");
  if (!(amplitude_bound >= 0.0) || amplitude_bound > params.tension_limit) {
    ThrowInvalidArgument("ExcitationSpec: amplitude_bound " +
                         std::to_string(amplitude_bound) +
                         " outside [0, tension_limit]");
  }
  if (smoothing && !(*smoothing > 0.0)) {
    ThrowInvalidArgument("ExcitationSpec: smoothing must be > 0 when set");
  }
  if (Steps() < 1) ThrowInvalidArgument("ExcitationSpec: duration < dt");
}

int ExcitationSpec::Steps() const {
  return static_cast<int>(std::lround(duration / dt));
}

std::vector<Actuation> PolynomialProfile(
    const std::array<std::vector<double>, 2>& coefficients,
    const Actuation& peak, int steps, double dt,
    std::optional<double> smoothing) {
  std::vector<Actuation> out(static_cast<size_t>(steps), Actuation::Zero());
  const double denom = steps > 1 ? static_cast<double>(steps - 1) : 1.0;
  for (int c = 0; c < 2; ++c) {
    double max_abs = 0.0;
    for (int k = 0; k < steps; ++k) {
      const double v = EvalPolynomial(coefficients[c], k / denom);
      out[k][c] = v;
      max_abs = std::max(max_abs, std::abs(v));
    }
    const double scale = max_abs > 0.0 ? peak[c] / max_abs : 0.0;
    for (int k = 0; k < steps; ++k) out[k][c] *= scale;
  }
  if (smoothing) {
    const double alpha = dt / (*smoothing + dt);
    Actuation y = Actuation::Zero();
    for (Actuation& u : out) {
      y += alpha * (u - y);
      u = y;
    }
  }
  return out;
}

std::vector<Actuation> GenExcitation(const ExcitationSpec& spec) {
  Rng rng(spec.seed);
  std::array<std::vector<double>, 2> coefficients;
  Actuation peak;
  for (int c = 0; c < 2; ++c) {
    coefficients[c].resize(static_cast<size_t>(spec.degree) + 1);
    for (double& v : coefficients[c]) v = rng.Uniform(-1.0, 1.0);
    peak[c] = spec.amplitude_bound *
              rng.Uniform(kMinAmplitudeFraction, kMaxAmplitudeFraction);
  }
  return PolynomialProfile(coefficients, peak, spec.Steps(), spec.dt,
                           spec.smoothing);
}

Episode RolloutEpisode(const ExcitationSpec& spec, const RodParams& params) {
  params.Validate();
  spec.Validate(params);
  Episode e;
  e.dt = spec.dt;
  e.spec = spec;
  e.controls = GenExcitation(spec);
  std::vector<RodState> traj;
  try {
    traj = Simulate(RestState(params), e.controls, params, spec.dt);
  } catch (const Error& err) {
    throw Error(err.code(), "episode seed " + std::to_string(spec.seed) +
                                ": " + err.what());
  }
  e.states.reserve(traj.size());
  for (const RodState& s : traj) e.states.push_back(TipState(s, params));
  return e;
}

std::vector<TransitionTuple> ExtractTransitions(const Episode& episode,
                                                const StaticTable& table) {
  if (episode.states.size() != episode.controls.size() + 1) {
    ThrowInvalidArgument("ExtractTransitions: inconsistent episode lengths");
  }
  std::vector<TransitionTuple> out(episode.controls.size());
  for (size_t t = 0; t < episode.controls.size(); ++t) {
    TransitionTuple& tt = out[t];
    tt.x_t = episode.states[t];
    tt.x_next = episode.states[t + 1];
    tt.u_t = episode.controls[t];
    tt.u_phys = PhysicsPrior(tt.x_next.position, table).u;
    tt.eta = tt.u_t - tt.u_phys;
  }
  return out;
}

Scaler FitScaler(std::span<const TransitionTuple> tuples) {
  if (tuples.size() < 2) {
    ThrowInvalidArgument("FitScaler: need at least 2 tuples, got " +
                         std::to_string(tuples.size()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(tuples.size());
  Eigen::MatrixXd states(6, 2 * n);
  Eigen::MatrixXd controls(2, n);
  Eigen::MatrixXd residuals(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    states.col(i) = tuples[i].x_t.AsVector();
    states.col(n + i) = tuples[i].x_next.AsVector();
    controls.col(i) = tuples[i].u_t;
    residuals.col(i) = tuples[i].eta;
  }
  return Scaler{FitChannels(states), FitChannels(controls),
                FitChannels(residuals)};
}

std::vector<Episode> GenerateEpisodes(const DatasetSpec& spec,
                                      const RodParams& params, int workers) {
  std::vector<Episode> episodes(spec.episodes);
  ParallelFor(episodes.size(), workers, [&](size_t i) {
    ExcitationSpec ex = spec.excitation;
    ex.seed = spec.seed_base + i;
    episodes[i] = RolloutEpisode(ex, params);
  });
  return episodes;
}

Dataset GenerateDataset(const DatasetSpec& spec, const RodParams& params,
                        const StaticTable& table, int workers) {
  params.Validate();
  spec.excitation.Validate(params);
  std::vector<std::vector<TransitionTuple>> per_episode(spec.episodes);
  ParallelFor(per_episode.size(), workers, [&](size_t i) {
    ExcitationSpec ex = spec.excitation;
    ex.seed = spec.seed_base + i;
    per_episode[i] = ExtractTransitions(RolloutEpisode(ex, params), table);
  });
  Dataset ds;
  for (auto& tuples : per_episode) {
    ds.tuples.insert(ds.tuples.end(), tuples.begin(), tuples.end());
  }
  if (ds.tuples.size() >= 2) ds.scaler = FitScaler(ds.tuples);
  ds.metadata.episode_count = spec.episodes;
  ds.metadata.steps_per_episode =
      static_cast<uint64_t>(spec.excitation.Steps());
  ds.metadata.dt = spec.excitation.dt;
  ds.metadata.params_hash = params.Hash();
  ds.params = params;
  ds.table = table;
  return ds;
}

void EncodeRodParams(const RodParams& p, BinaryWriter& out) {
  for (double v : {p.length, p.diameter, p.cable_offset, p.youngs_modulus,
                   p.damping, p.density, p.gravity[0], p.gravity[1],
                   p.gravity[2], p.tension_limit}) {
    out.F64(v);
  }
  out.U64(static_cast<uint64_t>(p.n_links));
  out.U64(static_cast<uint64_t>(p.substeps));
}

RodParams DecodeRodParams(BinaryReader& in) {
  RodParams p;
  p.length = in.F64();
  p.diameter = in.F64();
  p.cable_offset = in.F64();
  p.youngs_modulus = in.F64();
  p.damping = in.F64();
  p.density = in.F64();
  p.gravity[0] = in.F64();
  p.gravity[1] = in.F64();
  p.gravity[2] = in.F64();
  p.tension_limit = in.F64();
  p.n_links = static_cast<int>(in.U64());
  p.substeps = static_cast<int>(in.U64());
  return p;
}

void EncodeStaticTable(const StaticTable& table, BinaryWriter& out) {
  out.U64(static_cast<uint64_t>(table.resolution()));
  out.F64(table.u_max());
  out.U64(table.params_hash());
  out.U64(table.tips().size());
  for (const Eigen::Vector3d& p : table.tips()) {
    out.F64(p[0]);
    out.F64(p[1]);
    out.F64(p[2]);
  }
}

StaticTable DecodeStaticTable(BinaryReader& in) {
  const uint64_t resolution = in.U64();
  const double u_max = in.F64();
  const uint64_t hash = in.U64();
  const uint64_t count = in.Count(24);
  if (count != resolution * resolution) {
    ThrowDataError("static table: " + std::to_string(count) +
                   " samples for resolution " + std::to_string(resolution));
  }
  std::vector<Eigen::Vector3d> tips(count);
  for (auto& p : tips) {
    p[0] = in.F64();
    p[1] = in.F64();
    p[2] = in.F64();
  }
  return StaticTable(static_cast<int>(resolution), u_max, hash,
                     std::move(tips));
}

std::string EncodeDataset(const Dataset& ds) {
  std::vector<Record> records;
  {
    BinaryWriter w;
    EncodeRodParams(ds.params, w);
    records.push_back({kTagRodParams, w.Take()});
  }
  if (!ds.table.empty()) {
    BinaryWriter w;
    EncodeStaticTable(ds.table, w);
    records.push_back({kTagStaticTable, w.Take()});
  }
  BinaryWriter w;
  w.U64(ds.metadata.episode_count);
  w.U64(ds.metadata.steps_per_episode);
  w.F64(ds.metadata.dt);
  w.U64(ds.metadata.params_hash);
  w.U32(ds.metadata.format_version);
  EncodeScaler(ds.scaler, w);
  w.U64(ds.tuples.size());
  w.U64(kTupleFields);
  for (const TransitionTuple& t : ds.tuples) {
    PutTaskState(t.x_t, w);
    PutTaskState(t.x_next, w);
    PutActuation(t.u_t, w);
    PutActuation(t.u_phys, w);
    PutActuation(t.eta, w);
  }
  records.push_back({kTagDataset, w.Take()});
  return EncodeContainer(kDataMagic, records);
}

Dataset DecodeDataset(std::string_view bytes, const std::string& context) {
  const std::vector<Record> records =
      DecodeContainer(bytes, kDataMagic, context);
  Dataset ds;
  if (auto prms = FindRecord(records, kTagRodParams)) {
    BinaryReader r(*prms, context + " [PRMS]");
    ds.params = DecodeRodParams(r);
  }
  if (auto stbl = FindRecord(records, kTagStaticTable)) {
    BinaryReader r(*stbl, context + " [STBL]");
    ds.table = DecodeStaticTable(r);
  }
  auto dset = FindRecord(records, kTagDataset);
  if (!dset) ThrowDataError(context + ": no DSET record");
  BinaryReader r(*dset, context + " [DSET]");
  ds.metadata.episode_count = r.U64();
  ds.metadata.steps_per_episode = r.U64();
  ds.metadata.dt = r.F64();
  ds.metadata.params_hash = r.U64();
  ds.metadata.format_version = r.U32();
  if (ds.metadata.format_version != kContainerVersion) {
    ThrowDataError(context + ": unsupported version " +
                   std::to_string(ds.metadata.format_version));
  }
  ds.scaler = DecodeScaler(r);
  const uint64_t count = r.U64();
  const uint64_t fields = r.U64();
  if (fields != kTupleFields) {
    ThrowDataError(context + ": tuple width " + std::to_string(fields) +
                   " (expected " + std::to_string(kTupleFields) + ")");
  }
  if (count > r.remaining() / (fields * 8)) {
    ThrowDataError(context + ": truncated (" + std::to_string(count) +
                   " tuples declared)");
  }
  ds.tuples.resize(count);
  for (TransitionTuple& t : ds.tuples) {
    t.x_t = GetTaskState(r);
    t.x_next = GetTaskState(r);
    t.u_t = GetActuation(r);
    t.u_phys = GetActuation(r);
    t.eta = GetActuation(r);
  }
  if (ds.metadata.steps_per_episode * ds.metadata.episode_count !=
      ds.tuples.size()) {
    ThrowDataError(context + ": metadata counts (" +
                   std::to_string(ds.metadata.episode_count) + " x " +
                   std::to_string(ds.metadata.steps_per_episode) +
                   ") do not match " + std::to_string(ds.tuples.size()) +
                   " tuples");
  }
  return ds;
}

void SaveDataset(const std::string& path, const Dataset& dataset) {
  WriteFileAtomic(path, EncodeDataset(dataset));
}

Dataset LoadDataset(const std::string& path) {
  return DecodeDataset(ReadFile(path), path);
}

void SaveStaticTable(const std::string& path, const StaticTable& table) {
  BinaryWriter w;
  EncodeStaticTable(table, w);
  const Record rec{kTagStaticTable, w.Take()};
  WriteFileAtomic(path, EncodeContainer(kDataMagic, std::span(&rec, 1)));
}

StaticTable LoadStaticTable(const std::string& path) {
  const std::vector<Record> records =
      DecodeContainer(ReadFile(path), kDataMagic, path);
  auto stbl = FindRecord(records, kTagStaticTable);
  if (!stbl) ThrowDataError(path + ": no STBL record");
  BinaryReader r(*stbl, path + " [STBL]");
  return DecodeStaticTable(r);
}

std::string TransitionsCsv(std::span<const TransitionTuple> tuples, double dt,
                           uint64_t steps_per_episode) {
  std::string out = "t,px,py,pz,vx,vy,vz,u1,u2,uphys1,uphys2\n";
  for (size_t i = 0; i < tuples.size(); ++i) {
    const TransitionTuple& t = tuples[i];
    const uint64_t step = steps_per_episode > 0 ? i % steps_per_episode : i;
    const double values[] = {static_cast<double>(step) * dt,
                             t.x_t.position[0], t.x_t.position[1],
                             t.x_t.position[2], t.x_t.velocity[0],
                             t.x_t.velocity[1], t.x_t.velocity[2],
                             t.u_t[0], t.u_t[1], t.u_phys[0], t.u_phys[1]};
    for (size_t k = 0; k < std::size(values); ++k) {
      if (k) out += ',';
      out += FormatDouble(values[k]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace flowdyn

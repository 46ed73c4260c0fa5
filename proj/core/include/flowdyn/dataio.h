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

// Excitation generation, episode rollout, transition extraction and dataset
// persistence.

#ifndef FLOWDYN_DATAIO_H_
#define FLOWDYN_DATAIO_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowdyn/binary_io.h"
#include "flowdyn/rod_sim.h"
#include "flowdyn/scaler.h"
#include "flowdyn/static_table.h"

namespace flowdyn {

constexpr double kControlDt = 0.01;

struct ExcitationSpec {
  uint64_t seed = 0;
  int degree = 5;                       // polynomial degree per channel
  double duration = 2.0;                // s
  double amplitude_bound = 30.0;        // N
  std::optional<double> smoothing = 0.05;  // first-order low-pass tau, s
  double dt = kControlDt;

  void Validate(const RodParams& params) const;
  int Steps() const;
};

// Random polynomial actuation profile. Per channel: coefficients ~ U(-1, 1)
// of a polynomial in normalized time t in [0, 1], rescaled so the peak
// magnitude equals a seeded fraction in [0.3, 1.0] of amplitude_bound, then
// optionally low-pass filtered from zero.
std::vector<Actuation> GenExcitation(const ExcitationSpec& spec);

// Deterministic core of GenExcitation with explicit coefficients and peak
// amplitudes; coefficients[c][k] multiplies t^k on channel c.
std::vector<Actuation> PolynomialProfile(
    const std::array<std::vector<double>, 2>& coefficients,
    const Actuation& peak, int steps, double dt,
    std::optional<double> smoothing);

struct Episode {
  std::vector<TaskState> states;    // states.size() == controls.size() + 1
  std::vector<Actuation> controls;
  double dt = kControlDt;
  ExcitationSpec spec;
};

// Simulates the excitation from rest and records tip states every dt.
Episode RolloutEpisode(const ExcitationSpec& spec, const RodParams& params);

struct TransitionTuple {
  TaskState x_t;
  TaskState x_next;
  Actuation u_t = Actuation::Zero();
  Actuation u_phys = Actuation::Zero();  // prior at x_next.position
  Actuation eta = Actuation::Zero();     // u_t - u_phys
};

std::vector<TransitionTuple> ExtractTransitions(const Episode& episode,
                                                const StaticTable& table);

// State stats pool x_t and x_next; actuation stats use u_t and u_phys is
// normalized with them; residual stats use eta. Needs >= 2 tuples.
Scaler FitScaler(std::span<const TransitionTuple> tuples);

struct DatasetMetadata {
  uint64_t episode_count = 0;
  uint64_t steps_per_episode = 0;
  double dt = kControlDt;
  uint64_t params_hash = 0;
  uint32_t format_version = kContainerVersion;
};

struct Dataset {
  std::vector<TransitionTuple> tuples;
  Scaler scaler = Scaler::Identity();
  DatasetMetadata metadata;
  RodParams params;
  StaticTable table;  // prior table the tuples were labelled with
};

struct DatasetSpec {
  uint64_t episodes = 300;
  uint64_t seed_base = 0;
  ExcitationSpec excitation;  // seed field is overridden per episode
};

// Episode i uses seed seed_base + i. Episodes run on up to `workers`
// threads and are merged in seed order, so output is schedule independent.
Dataset GenerateDataset(const DatasetSpec& spec, const RodParams& params,
                        const StaticTable& table, int workers);

std::vector<Episode> GenerateEpisodes(const DatasetSpec& spec,
                                      const RodParams& params, int workers);

// Binary persistence (records PRMS, STBL, DSET in an FDYN container).
void SaveDataset(const std::string& path, const Dataset& dataset);
Dataset LoadDataset(const std::string& path);
std::string EncodeDataset(const Dataset& dataset);
Dataset DecodeDataset(std::string_view bytes, const std::string& context);

void SaveStaticTable(const std::string& path, const StaticTable& table);
StaticTable LoadStaticTable(const std::string& path);

void EncodeRodParams(const RodParams& params, BinaryWriter& out);
RodParams DecodeRodParams(BinaryReader& in);
void EncodeStaticTable(const StaticTable& table, BinaryWriter& out);
StaticTable DecodeStaticTable(BinaryReader& in);

// CSV with header t,px,py,pz,vx,vy,vz,u1,u2,uphys1,uphys2; one row per
// tuple, t restarting at 0 for every episode of steps_per_episode tuples.
std::string TransitionsCsv(std::span<const TransitionTuple> tuples, double dt,
                           uint64_t steps_per_episode);

}  // namespace flowdyn

#endif  // FLOWDYN_DATAIO_H_

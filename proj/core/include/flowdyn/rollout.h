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

// Reference trajectories, open-loop control construction and execution,
// and tracking metrics.

#ifndef FLOWDYN_ROLLOUT_H_
#define FLOWDYN_ROLLOUT_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "flowdyn/dataio.h"
#include "flowdyn/flowmatch.h"
#include "flowdyn/rod_sim.h"
#include "flowdyn/static_table.h"

namespace flowdyn {

enum class TrajectoryKind { kCircle, kHeart, kRandomSmooth, kBurstCircle, kFromEpisode };

// "circle", "heart", "random", "burst", "episode".
std::string_view TrajectoryName(TrajectoryKind kind);
TrajectoryKind ParseTrajectoryKind(std::string_view name);

struct ReferenceParams {
  // Shape scale in m. Non-positive selects radius_fraction of the static
  // reachable radius.
  double radius = 0.0;
  double radius_fraction = 0.6;
  double period = 2.0;            // s, circle and heart
  double duration = 0.0;          // s after the lead-in; <= 0 picks per kind
  double lead_in = 1.0;           // s, quintic ramp out of the rest pose
  double burst_period_max = 5.0;  // s
  double burst_period_min = 1.2;  // s
  uint64_t seed = 0;              // random_smooth
};

struct ReferenceTrajectory {
  std::vector<TaskState> states;
  TrajectoryKind kind = TrajectoryKind::kCircle;
  ReferenceParams params;
  double dt = kControlDt;
  double radius = 0.0;            // resolved shape scale, m
  double reachable_radius = 0.0;  // of the table used, m
  bool infeasible = false;        // radius clamped or a lift failed
};

// Planar shapes around the rod axis, lifted onto the static tip surface so
// z follows the reachable set. x and y velocities are analytic; z velocity
// uses central differences. All shapes grow out of the rest pose over
// params.lead_in.
ReferenceTrajectory GenReference(TrajectoryKind kind,
                                 const ReferenceParams& params, double dt,
                                 const RodParams& rod,
                                 const StaticTable& table);

ReferenceTrajectory ReferenceFromEpisode(const Episode& episode);

// Lateral speed profile helpers used by GenReference. BurstPhase sweeps the
// period geometrically from period_max to period_min over [0, sweep], holds
// period_min afterwards, and runs at period_max for t < 0.
double BurstPhase(double t, double sweep, double period_max,
                  double period_min);
double QuinticRamp(double s);

// Inverse map g(x_t, x_next) for control step `step`.
using InverseFn =
    std::function<Actuation(size_t step, const TaskState&, const TaskState&)>;

// u_t = g(x*_t, x*_{t+1}) for t = 0 .. T-1. Steps are independent, so they
// may run on `workers` threads without changing the result.
std::vector<Actuation> BuildControlSequence(const InverseFn& inverse,
                                            const ReferenceTrajectory& ref,
                                            int workers = 1);

struct ControlSequence {
  std::vector<Actuation> controls;
  int clamped = 0;
  int prior_out_of_range = 0;
};

// Model-backed construction: step t draws z = StepNoise(seed, t), or
// StepNoise(seed, 0) for every step when fixed_noise is set.
ControlSequence BuildControlSequence(const InverseModel& model,
                                     const ReferenceTrajectory& ref,
                                     uint64_t seed, bool fixed_noise = false,
                                     int workers = 1);

struct OpenLoopResult {
  std::vector<TaskState> states;  // controls.size() + 1 tip states
  int clamped = 0;
};

// Runs the plant from s0 under the given controls with no feedback.
// Controls beyond +/- tension_limit are clamped and counted.
OpenLoopResult ExecuteOpenLoop(std::span<const Actuation> controls,
                               const RodParams& params, const RodState& s0,
                               double dt = kControlDt);

constexpr double kSkipFraction = 0.1;
constexpr double kDefaultMaxLag = 0.5;  // s

size_t DefaultSkip(size_t samples);

// Root-mean-square 3-D position error over samples [skip, n).
double Rmse(std::span<const TaskState> achieved,
            std::span<const TaskState> ref, size_t skip);
std::vector<double> PositionErrors(std::span<const TaskState> achieved,
                                   std::span<const TaskState> ref);

// sum_t |u_t|^2 dt.
double InputEnergy(std::span<const Actuation> controls, double dt);

struct PhaseLagResult {
  double lag = 0.0;  // s
  bool degenerate = false;
};

// Delay l in [0, max_lag] maximizing the normalized cross-correlation
// sum_t a'(t) . r'(t - l) / sqrt(sum_t |a'(t)|^2 * sum_t |r'(t - l)|^2)
// over the overlap t in [l, n), where a' and r' are the mean-removed
// positions. Identical signals peak at l = 0.
PhaseLagResult PhaseLag(std::span<const TaskState> achieved,
                        std::span<const TaskState> ref, double dt,
                        double max_lag);

double PeakSpeed(std::span<const TaskState> states);
// Largest lateral (xy) distance from the rod axis.
double MaxLateralRadius(std::span<const TaskState> states);

struct MetricsReport {
  double rmse = 0.0;       // m
  double phase_lag = 0.0;  // s
  bool phase_degenerate = false;
  double input_energy = 0.0;  // N^2 s
  double peak_speed = 0.0;    // m/s, achieved
  double max_radius = 0.0;    // m, achieved
  std::vector<double> errors;  // per-sample position error, m
  int clamped = 0;
  int prior_out_of_range = 0;
};

struct Evaluation {
  std::vector<Actuation> controls;
  std::vector<TaskState> achieved;
  MetricsReport report;
};

// Build controls, execute open loop from rest, and score. Metrics use the
// samples after DefaultSkip.
Evaluation EvaluateReference(const InverseModel& model,
                             const ReferenceTrajectory& ref, uint64_t seed,
                             bool fixed_noise = false, int workers = 1);

MetricsReport ScoreRollout(std::span<const TaskState> achieved,
                           const ReferenceTrajectory& ref,
                           std::span<const Actuation> controls);

struct Reconstruction {
  std::vector<Actuation> controls;
  Eigen::Vector2d mae = Eigen::Vector2d::Zero();          // N
  Eigen::Vector2d mae_percent = Eigen::Vector2d::Zero();  // of 2 * limit
};

Reconstruction ReconstructInputs(const InverseFn& inverse,
                                 const Episode& episode, double tension_limit);
Reconstruction ReconstructInputs(const InverseModel& model,
                                 const Episode& episode, uint64_t seed);

struct MetricsRow {
  std::string model;
  std::string variant;
  std::string trajectory;
  uint64_t seed = 0;
  double rmse_mm = 0.0;
  double phase_lag_s = 0.0;
  double input_energy = 0.0;
  double peak_speed = 0.0;
};

// Header model,variant,trajectory,seed,rmse_mm,phase_lag_s,input_energy,
// peak_speed.
std::string MetricsCsv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> ParseMetricsCsv(std::string_view text);

// Header t,ref_x,ref_y,ref_z,x,y,z,u1,u2; one row per sample. The last row
// has no control.
std::string TrajectoryCsv(const ReferenceTrajectory& ref,
                          std::span<const TaskState> achieved,
                          std::span<const Actuation> controls);

}  // namespace flowdyn

#endif  // FLOWDYN_ROLLOUT_H_

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

#include "flowdyn/rollout.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flowdyn/csv.h"
#include "flowdyn/error.h"
#include "flowdyn/parallel.h"
#include "flowdyn/rng.h"

namespace flowdyn {
namespace {

using Eigen::Vector2d;
using Eigen::Vector3d;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Shapes wider than this fraction of the reachable radius are clamped.
constexpr double kMaxRadiusFraction = 0.95;
constexpr int kRandomTerms = 5;
constexpr double kRandomMinHz = 0.1;
constexpr double kRandomMaxHz = 1.9;

struct PlanarSample {
  Vector2d pos;
  Vector2d vel;
};

double DefaultDuration(TrajectoryKind kind, const ReferenceParams& p) {
  switch (kind) {
    case TrajectoryKind::kCircle: return 5.0 * p.period;
    case TrajectoryKind::kHeart: return 3.0 * p.period;
    case TrajectoryKind::kRandomSmooth: return 10.0;
    case TrajectoryKind::kBurstCircle: return 14.0;
    case TrajectoryKind::kFromEpisode: break;
  }
  return 0.0;
}

// Unit-scale heart centred on its bounding box.
struct Heart {
  double center_y = 0.0;
  double scale = 1.0;

  Heart() {
    double lo = 1e300, hi = -1e300;
    constexpr int kGrid = 20000;
    for (int i = 0; i < kGrid; ++i) {
      const double y = RawY(kTwoPi * i / kGrid);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    center_y = 0.5 * (lo + hi);
    double extent = 0.0;
    for (int i = 0; i < kGrid; ++i) {
      const double th = kTwoPi * i / kGrid;
      extent = std::max(extent, std::hypot(RawX(th), RawY(th) - center_y));
    }
    scale = 1.0 / extent;
  }
  static double RawX(double th) { return 16.0 * std::pow(std::sin(th), 3); }
  static double RawY(double th) {
    return 13.0 * std::cos(th) - 5.0 * std::cos(2 * th) -
           2.0 * std::cos(3 * th) - std::cos(4 * th);
  }
  Vector2d Pos(double th) const {
    return scale * Vector2d(RawX(th), RawY(th) - center_y);
  }
  Vector2d Deriv(double th) const {
    const double s = std::sin(th);
    return scale * Vector2d(48.0 * s * s * std::cos(th),
                            -13.0 * s + 10.0 * std::sin(2 * th) +
                                6.0 * std::sin(3 * th) +
                                4.0 * std::sin(4 * th));
  }
};

struct RandomShape {
  struct Term {
    double amp, freq, phase;
  };
  std::array<std::vector<Term>, 2> axes;
  double scale = 1.0;

  Vector2d Pos(double t) const {
    Vector2d p;
    for (int a = 0; a < 2; ++a) {
      p[a] = 0.0;
      for (const Term& k : axes[a]) {
        p[a] += k.amp * std::sin(kTwoPi * k.freq * t + k.phase);
      }
    }
    return scale * p;
  }
  Vector2d Deriv(double t) const {
    Vector2d d;
    for (int a = 0; a < 2; ++a) {
      d[a] = 0.0;
      for (const Term& k : axes[a]) {
        d[a] += k.amp * kTwoPi * k.freq *
                std::cos(kTwoPi * k.freq * t + k.phase);
      }
    }
    return scale * d;
  }
};

RandomShape MakeRandomShape(uint64_t seed, double t_end, double dt) {
  RandomShape shape;
  Rng rng(seed);
  for (auto& axis : shape.axes) {
    for (int k = 0; k < kRandomTerms; ++k) {
      const double amp = rng.Uniform(0.2, 1.0);
      const double freq = rng.Uniform(kRandomMinHz, kRandomMaxHz);
      const double phase = rng.Uniform(0.0, kTwoPi);
      axis.push_back({amp, freq, phase});
    }
  }
  double extent = 0.0;
  for (double t = 0.0; t <= t_end + 0.5 * dt; t += 0.25 * dt) {
    extent = std::max(extent, shape.Pos(t).norm());
  }
  shape.scale = extent > 0.0 ? 1.0 / extent : 1.0;
  return shape;
}

double QuinticRampRate(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 30.0 * s * s - 60.0 * s * s * s + 30.0 * s * s * s * s;
}

double BurstRate(double t, double sweep, double pmax, double pmin) {
  const double frac = std::clamp(t / sweep, 0.0, 1.0);
  return kTwoPi / (pmax * std::pow(pmin / pmax, frac));
}

void CheckSameLength(size_t a, size_t b, const char* what) {
  if (a != b) {
    ThrowInvalidArgument(std::string(what) + ": length mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

std::string Lower(std::string_view name) {
  std::string s(name);
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  return s;
}

}  // namespace

std::string_view TrajectoryName(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kCircle: return "circle";
    case TrajectoryKind::kHeart: return "heart";
    case TrajectoryKind::kRandomSmooth: return "random";
    case TrajectoryKind::kBurstCircle: return "burst";
    case TrajectoryKind::kFromEpisode: return "episode";
  }
  return "unknown";
}

TrajectoryKind ParseTrajectoryKind(std::string_view name) {
  const std::string s = Lower(name);
  if (s == "circle") return TrajectoryKind::kCircle;
  if (s == "heart") return TrajectoryKind::kHeart;
  if (s == "random" || s == "random-smooth") return TrajectoryKind::kRandomSmooth;
  if (s == "burst" || s == "burst-circle") return TrajectoryKind::kBurstCircle;
  if (s == "episode" || s == "from-episode") return TrajectoryKind::kFromEpisode;
  ThrowInvalidArgument("unknown trajectory '" + std::string(name) +
                       "' (expected circle, heart, random, burst)");
}

double QuinticRamp(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double BurstPhase(double t, double sweep, double period_max,
                  double period_min) {
  const double rho = period_max / period_min;
  if (t < 0.0) return kTwoPi / period_max * t;
  const double tc = std::min(t, sweep);
  double phase = kTwoPi / period_max * sweep / std::log(rho) *
                 (std::pow(rho, tc / sweep) - 1.0);
  if (t > sweep) phase += kTwoPi / period_min * (t - sweep);
  return phase;
}

ReferenceTrajectory GenReference(TrajectoryKind kind,
                                 const ReferenceParams& params, double dt,
                                 const RodParams& rod,
                                 const StaticTable& table) {
  if (kind == TrajectoryKind::kFromEpisode) {
    ThrowInvalidArgument("GenReference: use ReferenceFromEpisode for episodes");
  }
  if (!(dt > 0.0)) ThrowInvalidArgument("GenReference: dt must be > 0");
  if (!(params.period > 0.0)) ThrowInvalidArgument("period must be > 0");
  if (!(params.lead_in >= 0.0)) ThrowInvalidArgument("lead_in must be >= 0");
  if (!(params.burst_period_min > 0.0) ||
      !(params.burst_period_max > params.burst_period_min)) {
    ThrowInvalidArgument("burst periods need 0 < period_min < period_max");
  }
  if (table.empty()) ThrowInvalidArgument("GenReference: empty static table");
  rod.Validate();

  ReferenceTrajectory ref;
  ref.kind = kind;
  ref.params = params;
  ref.dt = dt;
  ref.reachable_radius = table.ReachableRadius();
  ref.radius = params.radius > 0.0
                   ? params.radius
                   : params.radius_fraction * ref.reachable_radius;
  if (!(ref.radius > 0.0)) ThrowInvalidArgument("shape radius must be > 0");
  if (ref.radius > kMaxRadiusFraction * ref.reachable_radius) {
    ref.radius = kMaxRadiusFraction * ref.reachable_radius;
    ref.infeasible = true;
  }
  const double duration =
      params.duration > 0.0 ? params.duration : DefaultDuration(kind, params);
  const double total = params.lead_in + duration;
  const auto samples = static_cast<size_t>(std::llround(total / dt)) + 1;

  const Heart heart;
  RandomShape random;
  if (kind == TrajectoryKind::kRandomSmooth) {
    random = MakeRandomShape(params.seed, total, dt);
  }
  const double r = ref.radius;
  auto shape = [&](double t) -> PlanarSample {
    switch (kind) {
      case TrajectoryKind::kCircle: {
        const double w = kTwoPi / params.period;
        const double ph = w * t;
        return {r * Vector2d(std::cos(ph), std::sin(ph)),
                r * w * Vector2d(-std::sin(ph), std::cos(ph))};
      }
      case TrajectoryKind::kBurstCircle: {
        const double ph = BurstPhase(t, duration, params.burst_period_max,
                                     params.burst_period_min);
        const double w = t > duration
                             ? kTwoPi / params.burst_period_min
                             : BurstRate(t, duration, params.burst_period_max,
                                         params.burst_period_min);
        return {r * Vector2d(std::cos(ph), std::sin(ph)),
                r * w * Vector2d(-std::sin(ph), std::cos(ph))};
      }
      case TrajectoryKind::kHeart: {
        const double w = kTwoPi / params.period;
        return {r * heart.Pos(w * t), r * w * heart.Deriv(w * t)};
      }
      case TrajectoryKind::kRandomSmooth:
        return {r * random.Pos(t), r * random.Deriv(t)};
      case TrajectoryKind::kFromEpisode:
        break;
    }
    return {Vector2d::Zero(), Vector2d::Zero()};
  };

  // Burst time runs from the end of the lead-in so the sweep covers the
  // full duration (the lead-in turns at the slowest rate); other shapes
  // start their clock at t = 0.
  const double shape_offset =
      kind == TrajectoryKind::kBurstCircle ? -params.lead_in : 0.0;
  std::vector<double> z(samples);
  ref.states.resize(samples);
  for (size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) * dt;
    double s = 1.0, s_rate = 0.0;
    if (params.lead_in > 0.0) {
      s = QuinticRamp(t / params.lead_in);
      s_rate = QuinticRampRate(t / params.lead_in) / params.lead_in;
    }
    const PlanarSample g = shape(t + shape_offset);
    const Vector2d xy = s * g.pos;
    const Vector2d vxy = s_rate * g.pos + s * g.vel;
    const StaticLiftResult lift = LiftToStaticSurface(xy, rod, table);
    ref.infeasible = ref.infeasible || lift.out_of_range;
    z[i] = lift.tip.z();
    ref.states[i].position = Vector3d(xy.x(), xy.y(), z[i]);
    ref.states[i].velocity = Vector3d(vxy.x(), vxy.y(), 0.0);
  }
  for (size_t i = 0; i < samples; ++i) {
    double vz = 0.0;
    if (samples >= 3) {
      if (i == 0) {
        vz = (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * dt);
      } else if (i + 1 == samples) {
        vz = (3.0 * z[i] - 4.0 * z[i - 1] + z[i - 2]) / (2.0 * dt);
      } else {
        vz = (z[i + 1] - z[i - 1]) / (2.0 * dt);
      }
    }
    ref.states[i].velocity.z() = vz;
  }
  return ref;
}

ReferenceTrajectory ReferenceFromEpisode(const Episode& episode) {
  if (episode.states.size() < 2) {
    ThrowInvalidArgument("ReferenceFromEpisode: episode has < 2 states");
  }
  ReferenceTrajectory ref;
  ref.kind = TrajectoryKind::kFromEpisode;
  ref.dt = episode.dt;
  ref.states = episode.states;
  double radius = 0.0;
  for (const TaskState& s : episode.states) {
    radius = std::max(radius, s.position.head<2>().norm());
  }
  ref.radius = radius;
  return ref;
}

std::vector<Actuation> BuildControlSequence(const InverseFn& inverse,
                                            const ReferenceTrajectory& ref,
                                            int workers) {
  if (ref.states.size() < 2) {
    ThrowInvalidArgument("BuildControlSequence: reference needs >= 2 states");
  }
  const size_t steps = ref.states.size() - 1;
  std::vector<Actuation> controls(steps);
  ParallelFor(steps, workers, [&](size_t t) {
    try {
      controls[t] = inverse(t, ref.states[t], ref.states[t + 1]);
    } catch (const Error& e) {
      throw Error(e.code(), "control step " + std::to_string(t) + ": " +
                                e.what());
    }
  });
  return controls;
}

ControlSequence BuildControlSequence(const InverseModel& model,
                                     const ReferenceTrajectory& ref,
                                     uint64_t seed, bool fixed_noise,
                                     int workers) {
  model.Validate();
  if (ref.states.size() < 2) {
    ThrowInvalidArgument("BuildControlSequence: reference needs >= 2 states");
  }
  const size_t steps = ref.states.size() - 1;
  std::vector<ControlSample> samples(steps);
  ParallelFor(steps, workers, [&](size_t t) {
    try {
      samples[t] = SampleControl(model, ref.states[t], ref.states[t + 1],
                                 StepNoise(seed, fixed_noise ? 0 : t),
                                 model.inference_steps);
    } catch (const Error& e) {
      throw Error(e.code(), "control step " + std::to_string(t) + ": " +
                                e.what());
    }
  });
  ControlSequence out;
  out.controls.reserve(steps);
  for (const ControlSample& s : samples) {
    out.controls.push_back(s.u);
    out.clamped += s.clamped ? 1 : 0;
    out.prior_out_of_range += s.prior_out_of_range ? 1 : 0;
  }
  return out;
}

OpenLoopResult ExecuteOpenLoop(std::span<const Actuation> controls,
                               const RodParams& params, const RodState& s0,
                               double dt) {
  params.Validate();
  OpenLoopResult out;
  std::vector<Actuation> applied(controls.begin(), controls.end());
  const double limit = params.tension_limit;
  for (Actuation& u : applied) {
    if (!u.allFinite()) {
      ThrowNumericalFailure("ExecuteOpenLoop: non-finite control");
    }
    const Actuation c = u.cwiseMax(-limit).cwiseMin(limit);
    if (c != u) ++out.clamped;
    u = c;
  }
  const std::vector<RodState> traj = Simulate(s0, applied, params, dt);
  out.states.reserve(traj.size());
  for (const RodState& s : traj) out.states.push_back(TipState(s, params));
  return out;
}

size_t DefaultSkip(size_t samples) {
  return static_cast<size_t>(std::floor(kSkipFraction * samples));
}

std::vector<double> PositionErrors(std::span<const TaskState> achieved,
                                   std::span<const TaskState> ref) {
  CheckSameLength(achieved.size(), ref.size(), "PositionErrors");
  std::vector<double> e(achieved.size());
  for (size_t i = 0; i < e.size(); ++i) {
    e[i] = (achieved[i].position - ref[i].position).norm();
  }
  return e;
}

double Rmse(std::span<const TaskState> achieved,
            std::span<const TaskState> ref, size_t skip) {
  CheckSameLength(achieved.size(), ref.size(), "Rmse");
  if (skip >= achieved.size()) {
    ThrowInvalidArgument("Rmse: skip must be smaller than the sample count");
  }
  double sum = 0.0;
  for (size_t i = skip; i < achieved.size(); ++i) {
    sum += (achieved[i].position - ref[i].position).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(achieved.size() - skip));
}

double InputEnergy(std::span<const Actuation> controls, double dt) {
  if (!(dt > 0.0)) ThrowInvalidArgument("InputEnergy: dt must be > 0");
  double sum = 0.0;
  for (const Actuation& u : controls) sum += u.squaredNorm() * dt;
  return sum;
}

PhaseLagResult PhaseLag(std::span<const TaskState> achieved,
                        std::span<const TaskState> ref, double dt,
                        double max_lag) {
  CheckSameLength(achieved.size(), ref.size(), "PhaseLag");
  if (!(dt > 0.0)) ThrowInvalidArgument("PhaseLag: dt must be > 0");
  const size_t n = achieved.size();
  const double duration = static_cast<double>(n) * dt;
  if (!(max_lag >= 0.0) || !(max_lag < 0.5 * duration)) {
    ThrowInvalidArgument("PhaseLag: max_lag must be in [0, duration / 2)");
  }
  Vector3d mean_a = Vector3d::Zero(), mean_r = Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    mean_a += achieved[i].position;
    mean_r += ref[i].position;
  }
  mean_a /= static_cast<double>(n);
  mean_r /= static_cast<double>(n);
  double var_a = 0.0, var_r = 0.0;
  for (size_t i = 0; i < n; ++i) {
    var_a += (achieved[i].position - mean_a).squaredNorm();
    var_r += (ref[i].position - mean_r).squaredNorm();
  }
  PhaseLagResult out;
  constexpr double kDegenerateVariance = 1e-24;
  if (var_a <= kDegenerateVariance || var_r <= kDegenerateVariance) {
    out.degenerate = true;
    return out;
  }
  const auto lags = static_cast<size_t>(std::floor(max_lag / dt + 1e-9));
  double best = -2.0;
  size_t best_lag = 0;
  for (size_t l = 0; l <= lags; ++l) {
    double c = 0.0, aa = 0.0, rr = 0.0;
    for (size_t t = l; t < n; ++t) {
      const Vector3d a = achieved[t].position - mean_a;
      const Vector3d r = ref[t - l].position - mean_r;
      c += a.dot(r);
      aa += a.squaredNorm();
      rr += r.squaredNorm();
    }
    if (aa <= 0.0 || rr <= 0.0) continue;
    c /= std::sqrt(aa * rr);
    if (c > best) {
      best = c;
      best_lag = l;
    }
  }
  out.lag = static_cast<double>(best_lag) * dt;
  return out;
}

double PeakSpeed(std::span<const TaskState> states) {
  double peak = 0.0;
  for (const TaskState& s : states) peak = std::max(peak, s.velocity.norm());
  return peak;
}

double MaxLateralRadius(std::span<const TaskState> states) {
  double r = 0.0;
  for (const TaskState& s : states) r = std::max(r, s.position.head<2>().norm());
  return r;
}

MetricsReport ScoreRollout(std::span<const TaskState> achieved,
                           const ReferenceTrajectory& ref,
                           std::span<const Actuation> controls) {
  const std::span<const TaskState> target(ref.states);
  CheckSameLength(achieved.size(), target.size(), "ScoreRollout");
  MetricsReport m;
  const size_t skip = DefaultSkip(achieved.size());
  m.rmse = Rmse(achieved, target, skip);
  m.errors = PositionErrors(achieved, target);
  const size_t window = achieved.size() - skip;
  const double max_lag = std::min(
      kDefaultMaxLag, 0.49 * static_cast<double>(window) * ref.dt);
  const PhaseLagResult lag = PhaseLag(achieved.subspan(skip),
                                      target.subspan(skip), ref.dt, max_lag);
  m.phase_lag = lag.lag;
  m.phase_degenerate = lag.degenerate;
  m.input_energy = InputEnergy(controls, ref.dt);
  m.peak_speed = PeakSpeed(achieved);
  m.max_radius = MaxLateralRadius(achieved);
  return m;
}

Evaluation EvaluateReference(const InverseModel& model,
                             const ReferenceTrajectory& ref, uint64_t seed,
                             bool fixed_noise, int workers) {
  Evaluation ev;
  const ControlSequence seq =
      BuildControlSequence(model, ref, seed, fixed_noise, workers);
  ev.controls = seq.controls;
  const OpenLoopResult run = ExecuteOpenLoop(ev.controls, model.params,
                                             RestState(model.params), ref.dt);
  ev.achieved = run.states;
  ev.report = ScoreRollout(ev.achieved, ref, ev.controls);
  ev.report.clamped = seq.clamped + run.clamped;
  ev.report.prior_out_of_range = seq.prior_out_of_range;
  return ev;
}

Reconstruction ReconstructInputs(const InverseFn& inverse,
                                 const Episode& episode, double tension_limit) {
  if (episode.states.size() != episode.controls.size() + 1) {
    ThrowInvalidArgument("ReconstructInputs: inconsistent episode lengths");
  }
  if (!(tension_limit > 0.0)) {
    ThrowInvalidArgument("ReconstructInputs: tension_limit must be > 0");
  }
  Reconstruction out;
  const size_t n = episode.controls.size();
  out.controls.reserve(n);
  for (size_t t = 0; t < n; ++t) {
    out.controls.push_back(
        inverse(t, episode.states[t], episode.states[t + 1]));
    out.mae += (out.controls.back() - episode.controls[t]).cwiseAbs();
  }
  if (n > 0) out.mae /= static_cast<double>(n);
  out.mae_percent = out.mae / (2.0 * tension_limit) * 100.0;
  return out;
}

Reconstruction ReconstructInputs(const InverseModel& model,
                                 const Episode& episode, uint64_t seed) {
  model.Validate();
  return ReconstructInputs(
      [&](size_t t, const TaskState& a, const TaskState& b) {
        return SampleControl(model, a, b, StepNoise(seed, t),
                             model.inference_steps)
            .u;
      },
      episode, model.params.tension_limit);
}

std::string MetricsCsv(std::span<const MetricsRow> rows) {
  std::ostringstream os;
  os << "model,variant,trajectory,seed,rmse_mm,phase_lag_s,input_energy,"
        "peak_speed\n";
  for (const MetricsRow& r : rows) {
    os << r.model << ',' << r.variant << ',' << r.trajectory << ',' << r.seed
       << ',' << FormatDouble(r.rmse_mm) << ',' << FormatDouble(r.phase_lag_s)
       << ',' << FormatDouble(r.input_energy) << ','
       << FormatDouble(r.peak_speed) << '\n';
  }
  return os.str();
}

std::vector<MetricsRow> ParseMetricsCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text);
  const size_t c_model = t.Column("model"), c_variant = t.Column("variant"),
               c_traj = t.Column("trajectory"), c_seed = t.Column("seed"),
               c_rmse = t.Column("rmse_mm"), c_lag = t.Column("phase_lag_s"),
               c_energy = t.Column("input_energy"),
               c_speed = t.Column("peak_speed");
  std::vector<MetricsRow> rows;
  for (const auto& f : t.rows) {
    MetricsRow r;
    r.model = f[c_model];
    r.variant = f[c_variant];
    r.trajectory = f[c_traj];
    try {
      r.seed = std::stoull(f[c_seed]);
    } catch (const std::exception&) {
      ThrowDataError("metrics CSV: bad seed '" + f[c_seed] + "'");
    }
    r.rmse_mm = ParseDouble(f[c_rmse]);
    r.phase_lag_s = ParseDouble(f[c_lag]);
    r.input_energy = ParseDouble(f[c_energy]);
    r.peak_speed = ParseDouble(f[c_speed]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string TrajectoryCsv(const ReferenceTrajectory& ref,
                          std::span<const TaskState> achieved,
                          std::span<const Actuation> controls) {
  CheckSameLength(achieved.size(), ref.states.size(), "TrajectoryCsv");
  if (!achieved.empty()) {
    CheckSameLength(controls.size() + 1, achieved.size(), "TrajectoryCsv");
  }
  std::ostringstream os;
  os << "t,ref_x,ref_y,ref_z,x,y,z,u1,u2\n";
  for (size_t i = 0; i < achieved.size(); ++i) {
    const Vector3d& r = ref.states[i].position;
    const Vector3d& a = achieved[i].position;
    os << FormatDouble(static_cast<double>(i) * ref.dt);
    for (int k = 0; k < 3; ++k) os << ',' << FormatDouble(r[k]);
    for (int k = 0; k < 3; ++k) os << ',' << FormatDouble(a[k]);
    if (i < controls.size()) {
      os << ',' << FormatDouble(controls[i][0]) << ','
         << FormatDouble(controls[i][1]);
    } else {
      os << ",,";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace flowdyn

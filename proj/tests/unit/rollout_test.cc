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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "flowdyn/csv.h"
#include "flowdyn/error.h"
#include "flowdyn/rng.h"
#include "support/test_util.h"

namespace flowdyn {
namespace {

constexpr double kPi = std::numbers::pi;

class RolloutTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    table_ = new StaticTable(BuildStaticTable(rod_, 11));
  }
  static void TearDownTestSuite() { delete table_; }

  static ReferenceTrajectory Make(TrajectoryKind kind,
                                  ReferenceParams p = ReferenceParams()) {
    return GenReference(kind, p, kControlDt, rod_, *table_);
  }

  static InverseModel RandomRfModel(uint64_t seed) {
    InverseModel m;
    m.variant = Variant::kRf;
    const std::vector<int> dims = {NetworkInputDim(Variant::kRf), 16, 2};
    m.net = MlpInit(dims, seed);
    m.scaler.actuation.stddev.setConstant(10.0);
    m.inference_steps = 5;
    return m;
  }

  static inline RodParams rod_;
  static inline StaticTable* table_ = nullptr;
};

std::vector<TaskState> Points(std::initializer_list<Eigen::Vector3d> pts) {
  std::vector<TaskState> out;
  for (const auto& p : pts) {
    TaskState s;
    s.position = p;
    out.push_back(s);
  }
  return out;
}

TEST_F(RolloutTest, CircleShapeAfterLeadIn) {
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle);
  ASSERT_EQ(ref.states.size(), 1101u);
  EXPECT_NEAR(ref.radius, 0.6 * table_->ReachableRadius(), 1e-15);
  EXPECT_FALSE(ref.infeasible);
  const double speed = 2.0 * kPi * ref.radius / 2.0;
  for (size_t i = 100; i < ref.states.size(); ++i) {
    const TaskState& s = ref.states[i];
    EXPECT_NEAR(s.position.head<2>().norm(), ref.radius, 1e-12);
    EXPECT_NEAR(s.velocity.head<2>().norm(), speed, 1e-12);
    if (i + 200 < ref.states.size()) {
      EXPECT_NEAR((ref.states[i + 200].position - s.position).norm(), 0.0,
                  1e-9);
    }
  }
}

TEST_F(RolloutTest, LeadInStartsAtRestTip) {
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle);
  const TaskState rest = TipState(RestState(rod_), rod_);
  EXPECT_NEAR((ref.states[0].position - rest.position).norm(), 0.0, 1e-9);
  EXPECT_NEAR(ref.states[0].velocity.head<2>().norm(), 0.0, 1e-15);
}

TEST_F(RolloutTest, StatesLieOnStaticSurface) {
  const ReferenceTrajectory ref = Make(TrajectoryKind::kHeart);
  for (size_t i = 0; i < ref.states.size(); i += 37) {
    const StaticLiftResult lift = LiftToStaticSurface(
        ref.states[i].position.head<2>(), rod_, *table_);
    EXPECT_EQ(lift.tip.z(), ref.states[i].position.z());
    EXPECT_FALSE(lift.out_of_range);
  }
}

TEST_F(RolloutTest, VelocityMatchesCentralDifferences) {
  for (auto kind : {TrajectoryKind::kCircle, TrajectoryKind::kHeart,
                    TrajectoryKind::kRandomSmooth,
                    TrajectoryKind::kBurstCircle}) {
    ReferenceParams p;
    p.seed = 4;
    const ReferenceTrajectory ref = Make(kind, p);
    double worst = 0.0;
    for (size_t i = 1; i + 1 < ref.states.size(); ++i) {
      const Eigen::Vector3d fd =
          (ref.states[i + 1].position - ref.states[i - 1].position) /
          (2.0 * kControlDt);
      worst = std::max(worst, (fd - ref.states[i].velocity).head<2>().norm());
      EXPECT_EQ(fd.z(), ref.states[i].velocity.z());
    }
    EXPECT_LT(worst, 2e-3) << TrajectoryName(kind);
  }
}

TEST_F(RolloutTest, OversizedRadiusIsClampedAndFlagged) {
  ReferenceParams p;
  p.radius = 1.0;
  p.duration = 1.0;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  EXPECT_TRUE(ref.infeasible);
  EXPECT_NEAR(ref.radius, 0.95 * table_->ReachableRadius(), 1e-15);
}

TEST_F(RolloutTest, RandomShapeDependsOnSeed) {
  ReferenceParams a, b;
  a.seed = 1;
  b.seed = 2;
  const auto ra = Make(TrajectoryKind::kRandomSmooth, a);
  const auto ra2 = Make(TrajectoryKind::kRandomSmooth, a);
  const auto rb = Make(TrajectoryKind::kRandomSmooth, b);
  EXPECT_EQ(ra.states[500].position, ra2.states[500].position);
  EXPECT_NE(ra.states[500].position, rb.states[500].position);
  EXPECT_LE(MaxLateralRadius(ra.states), ra.radius + 1e-12);
}

TEST(ReferenceTest, RejectsBadParameters) {
  RodParams rod;
  const StaticTable table = BuildStaticTable(rod, 5);
  ReferenceParams p;
  p.period = 0.0;
  EXPECT_THROW(GenReference(TrajectoryKind::kCircle, p, 0.01, rod, table),
               Error);
  p = ReferenceParams();
  EXPECT_THROW(GenReference(TrajectoryKind::kCircle, p, 0.0, rod, table),
               Error);
  EXPECT_THROW(GenReference(TrajectoryKind::kCircle, p, 0.01, rod,
                            StaticTable()),
               Error);
  p.burst_period_min = 6.0;
  EXPECT_THROW(GenReference(TrajectoryKind::kBurstCircle, p, 0.01, rod, table),
               Error);
}

TEST(ReferenceTest, KindNames) {
  for (auto k : {TrajectoryKind::kCircle, TrajectoryKind::kHeart,
                 TrajectoryKind::kRandomSmooth, TrajectoryKind::kBurstCircle,
                 TrajectoryKind::kFromEpisode}) {
    EXPECT_EQ(ParseTrajectoryKind(TrajectoryName(k)), k);
  }
  EXPECT_EQ(ParseTrajectoryKind("Burst-Circle"), TrajectoryKind::kBurstCircle);
  EXPECT_THROW(ParseTrajectoryKind("square"), Error);
}

TEST(BurstTest, PhaseRateSweepsBetweenPeriods) {
  const double sweep = 14.0, pmax = 5.0, pmin = 1.2, h = 1e-6;
  EXPECT_EQ(BurstPhase(0.0, sweep, pmax, pmin), 0.0);
  auto rate = [&](double t) {
    return (BurstPhase(t + h, sweep, pmax, pmin) -
            BurstPhase(t - h, sweep, pmax, pmin)) /
           (2.0 * h);
  };
  EXPECT_NEAR(rate(h), 2.0 * kPi / pmax, 1e-5);
  EXPECT_NEAR(rate(-0.5), 2.0 * kPi / pmax, 1e-5);
  EXPECT_LT(BurstPhase(-1.0, sweep, pmax, pmin), 0.0);
  EXPECT_NEAR(rate(sweep - h), 2.0 * kPi / pmin, 1e-5);
  EXPECT_NEAR(rate(sweep + 1.0), 2.0 * kPi / pmin, 1e-5);
  // Period is geometric in time: halfway the period is sqrt(pmax * pmin).
  EXPECT_NEAR(rate(sweep / 2.0), 2.0 * kPi / std::sqrt(pmax * pmin), 1e-5);
}

TEST_F(RolloutTest, BurstStartsAfterLeadIn) {
  const ReferenceTrajectory ref = Make(TrajectoryKind::kBurstCircle);
  ASSERT_EQ(ref.states.size(), 1501u);
  const double r = ref.radius;
  const TaskState& start = ref.states[100];
  EXPECT_NEAR(start.position.x(), r, 1e-12);
  EXPECT_NEAR(start.position.y(), 0.0, 1e-12);
  EXPECT_NEAR(ref.states.back().velocity.head<2>().norm(),
              2.0 * kPi / 1.2 * r, 1e-9);
}

TEST(RampTest, QuinticEndpoints) {
  EXPECT_EQ(QuinticRamp(0.0), 0.0);
  EXPECT_EQ(QuinticRamp(1.0), 1.0);
  EXPECT_EQ(QuinticRamp(-1.0), 0.0);
  EXPECT_EQ(QuinticRamp(2.0), 1.0);
  EXPECT_DOUBLE_EQ(QuinticRamp(0.5), 0.5);
}

TEST_F(RolloutTest, ControlSequenceLengthAndStepArguments) {
  ReferenceParams p;
  p.duration = 0.5;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  std::vector<size_t> seen;
  const auto controls = BuildControlSequence(
      [&](size_t t, const TaskState& a, const TaskState& b) {
        EXPECT_EQ(a.position, ref.states[t].position);
        EXPECT_EQ(b.position, ref.states[t + 1].position);
        return Actuation(static_cast<double>(t), 0.0);
      },
      ref, 1);
  ASSERT_EQ(controls.size(), ref.states.size() - 1);
  for (size_t t = 0; t < controls.size(); ++t) EXPECT_EQ(controls[t][0], t);
}

TEST_F(RolloutTest, ControlErrorsNameTheStep) {
  ReferenceParams p;
  p.duration = 0.2;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  try {
    BuildControlSequence(
        [](size_t t, const TaskState&, const TaskState&) -> Actuation {
          if (t == 7) ThrowNumericalFailure("boom");
          return Actuation::Zero();
        },
        ref, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericalFailure);
    EXPECT_NE(std::string(e.what()).find("control step 7"), std::string::npos);
  }
}

TEST_F(RolloutTest, ModelControlsIndependentOfWorkers) {
  ReferenceParams p;
  p.duration = 1.0;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  const InverseModel m = RandomRfModel(3);
  const ControlSequence a = BuildControlSequence(m, ref, 11, false, 1);
  const ControlSequence b = BuildControlSequence(m, ref, 11, false, 4);
  const ControlSequence c = BuildControlSequence(m, ref, 12, false, 1);
  ASSERT_EQ(a.controls.size(), ref.states.size() - 1);
  EXPECT_EQ(a.controls, b.controls);
  EXPECT_NE(a.controls, c.controls);
}

TEST_F(RolloutTest, FixedNoiseReusesFirstDraw) {
  ReferenceParams p;
  p.duration = 0.3;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  const InverseModel m = RandomRfModel(4);
  const ControlSequence seq = BuildControlSequence(m, ref, 5, true, 1);
  for (size_t t = 0; t < seq.controls.size(); t += 7) {
    EXPECT_EQ(seq.controls[t],
              SampleControl(m, ref.states[t], ref.states[t + 1],
                            StepNoise(5, 0), m.inference_steps)
                  .u);
  }
}

TEST_F(RolloutTest, ControlsAreFeedforward) {
  ReferenceParams p;
  p.duration = 0.5;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  ReferenceTrajectory tampered = ref;
  for (size_t i = 80; i < tampered.states.size(); ++i) {
    tampered.states[i].position.x() += 0.05;
  }
  const InverseModel m = RandomRfModel(6);
  const auto a = BuildControlSequence(m, ref, 2).controls;
  const auto b = BuildControlSequence(m, tampered, 2).controls;
  for (size_t t = 0; t + 1 < 80; ++t) EXPECT_EQ(a[t], b[t]) << t;
  EXPECT_NE(a[79], b[79]);
}

TEST_F(RolloutTest, PlantChangesDoNotFeedBackIntoControls) {
  ReferenceParams p;
  p.duration = 0.5;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  const InverseModel m = RandomRfModel(8);
  const auto controls = BuildControlSequence(m, ref, 3).controls;
  RodParams stiff = rod_;
  stiff.damping *= 4.0;
  const OpenLoopResult nominal = ExecuteOpenLoop(controls, rod_, RestState(rod_));
  const OpenLoopResult perturbed =
      ExecuteOpenLoop(controls, stiff, RestState(stiff));
  EXPECT_NE(nominal.states.back().position, perturbed.states.back().position);
  // Rebuilding after either run yields the same sequence.
  EXPECT_EQ(BuildControlSequence(m, ref, 3).controls, controls);
}

TEST_F(RolloutTest, ReplayOfRecordedControlsReproducesEpisode) {
  ExcitationSpec spec;
  spec.seed = 12;
  spec.duration = 1.0;
  const Episode ep = RolloutEpisode(spec, rod_);
  const ReferenceTrajectory ref = ReferenceFromEpisode(ep);
  const auto controls = BuildControlSequence(
      [&](size_t t, const TaskState&, const TaskState&) {
        return ep.controls[t];
      },
      ref, 2);
  const OpenLoopResult run =
      ExecuteOpenLoop(controls, rod_, RestState(rod_), ep.dt);
  ASSERT_EQ(run.states.size(), ep.states.size());
  for (size_t i = 0; i < run.states.size(); ++i) {
    ASSERT_EQ(run.states[i].position, ep.states[i].position) << i;
  }
  EXPECT_EQ(Rmse(run.states, ref.states, DefaultSkip(ref.states.size())), 0.0);
  EXPECT_EQ(run.clamped, 0);

  const Reconstruction rec = ReconstructInputs(
      [&](size_t t, const TaskState&, const TaskState&) {
        return ep.controls[t];
      },
      ep, rod_.tension_limit);
  EXPECT_EQ(rec.mae, Eigen::Vector2d::Zero());
}

TEST_F(RolloutTest, ZeroControlsStayAtRest) {
  const std::vector<Actuation> zeros(50, Actuation::Zero());
  const OpenLoopResult run = ExecuteOpenLoop(zeros, rod_, RestState(rod_));
  const TaskState rest = TipState(RestState(rod_), rod_);
  for (const TaskState& s : run.states) EXPECT_EQ(s.position, rest.position);
}

TEST_F(RolloutTest, MirroredControlsMirrorTip) {
  Rng rng(8);
  std::vector<Actuation> u, mirrored;
  for (int i = 0; i < 100; ++i) {
    u.emplace_back(rng.Uniform(-20, 20), rng.Uniform(-20, 20));
    mirrored.emplace_back(-u.back()[0], u.back()[1]);
  }
  const auto a = ExecuteOpenLoop(u, rod_, RestState(rod_)).states;
  const auto b = ExecuteOpenLoop(mirrored, rod_, RestState(rod_)).states;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b[i].position.x(), -a[i].position.x());
    EXPECT_EQ(b[i].position.y(), a[i].position.y());
  }
}

TEST_F(RolloutTest, OpenLoopClampsAndRejectsNan) {
  std::vector<Actuation> u = {Actuation(80.0, 0.0), Actuation(0.0, 0.0)};
  EXPECT_EQ(ExecuteOpenLoop(u, rod_, RestState(rod_)).clamped, 1);
  u[1][1] = std::nan("");
  EXPECT_THROW(ExecuteOpenLoop(u, rod_, RestState(rod_)), Error);
}

TEST(MetricsTest, RmseOfThreeAndFourMillimetres) {
  const auto ref = Points({{0, 0, 0}, {0, 0, 0}});
  const auto got = Points({{0.003, 0, 0}, {0, 0.004, 0}});
  EXPECT_NEAR(Rmse(got, ref, 0) * 1e3, 3.5355339059327378, 1e-12);
  EXPECT_NEAR(Rmse(got, ref, 1) * 1e3, 4.0, 1e-12);
  EXPECT_THROW(Rmse(got, ref, 2), Error);
  const std::vector<double> e = PositionErrors(got, ref);
  EXPECT_DOUBLE_EQ(e[0], 0.003);
  EXPECT_DOUBLE_EQ(e[1], 0.004);
}

TEST(MetricsTest, DefaultSkipIsTenPercent) {
  EXPECT_EQ(DefaultSkip(1101), 110u);
  EXPECT_EQ(DefaultSkip(9), 0u);
}

TEST(MetricsTest, InputEnergy) {
  const std::vector<Actuation> ones(100, Actuation(1.0, 1.0));
  EXPECT_NEAR(InputEnergy(ones, 0.01), 2.0, 1e-12);
  const std::vector<Actuation> twos(100, Actuation(2.0, 2.0));
  EXPECT_NEAR(InputEnergy(twos, 0.01), 8.0, 1e-12);
  EXPECT_EQ(InputEnergy(std::vector<Actuation>(), 0.01), 0.0);
}

std::vector<TaskState> Sinusoid(size_t n, double dt, double delay) {
  std::vector<TaskState> out(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt - delay;
    out[i].position =
        Eigen::Vector3d(std::cos(2 * kPi * t / 2.0), std::sin(2 * kPi * t / 2.0), 0);
  }
  return out;
}

TEST(MetricsTest, PhaseLagRecoversDelay) {
  const auto ref = Sinusoid(600, 0.01, 0.0);
  const auto late = Sinusoid(600, 0.01, 0.05);
  const PhaseLagResult r = PhaseLag(late, ref, 0.01, 0.5);
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.lag, 0.05, 1e-12);
  EXPECT_EQ(PhaseLag(ref, ref, 0.01, 0.5).lag, 0.0);
}

TEST(MetricsTest, PhaseLagDegenerateAndBounds) {
  const auto still = Points({{0, 0, 0.4}, {0, 0, 0.4}, {0, 0, 0.4},
                             {0, 0, 0.4}});
  const auto moving = Points({{0, 0, 0}, {1, 0, 0}, {0, 0, 0}, {1, 0, 0}});
  EXPECT_TRUE(PhaseLag(still, moving, 0.01, 0.01).degenerate);
  EXPECT_THROW(PhaseLag(moving, moving, 0.01, 0.02), Error);
}

TEST(MetricsTest, SpeedAndRadius) {
  std::vector<TaskState> s(2);
  s[0].velocity = Eigen::Vector3d(3, 4, 0);
  s[1].position = Eigen::Vector3d(0.3, -0.4, 9);
  EXPECT_DOUBLE_EQ(PeakSpeed(s), 5.0);
  EXPECT_DOUBLE_EQ(MaxLateralRadius(s), 0.5);
}

TEST_F(RolloutTest, ScoreUsesDefaultWindow) {
  ReferenceParams p;
  p.duration = 2.0;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  std::vector<TaskState> shifted = ref.states;
  for (auto& s : shifted) s.position.y() += 0.002;
  const std::vector<Actuation> u(ref.states.size() - 1, Actuation(1, 0));
  const MetricsReport r = ScoreRollout(shifted, ref, u);
  EXPECT_NEAR(r.rmse, 0.002, 1e-12);
  EXPECT_EQ(r.phase_lag, 0.0);
  EXPECT_NEAR(r.input_energy, 0.01 * u.size(), 1e-12);
  EXPECT_EQ(r.errors.size(), ref.states.size());
}

TEST(CsvTest, MetricsRoundTrip) {
  std::vector<MetricsRow> rows(2);
  rows[0] = {"models/rf.fmnn", "rf", "circle", 3, 5.25, 0.01, 123.5, 0.6};
  rows[1] = {"m", "mlp", "burst", 4, 1.0 / 3.0, 0.0, 1e-9, 2.0};
  const std::vector<MetricsRow> back = ParseMetricsCsv(MetricsCsv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].model, "models/rf.fmnn");
  EXPECT_EQ(back[1].seed, 4u);
  EXPECT_EQ(back[1].rmse_mm, 1.0 / 3.0);
  EXPECT_EQ(back[1].input_energy, 1e-9);
  EXPECT_TRUE(ParseMetricsCsv(MetricsCsv({})).empty());
  EXPECT_THROW(ParseMetricsCsv("model,variant\nx,y\n"), Error);
}

TEST_F(RolloutTest, TrajectoryCsvRows) {
  ReferenceParams p;
  p.duration = 0.2;
  const ReferenceTrajectory ref = Make(TrajectoryKind::kCircle, p);
  const std::vector<Actuation> u(ref.states.size() - 1, Actuation(1.5, -2));
  const CsvTable t = ParseCsv(TrajectoryCsv(ref, ref.states, u));
  const std::vector<std::string> header = {"t", "ref_x", "ref_y", "ref_z", "x",
                                           "y", "z", "u1", "u2"};
  EXPECT_EQ(t.header, header);
  ASSERT_EQ(t.rows.size(), ref.states.size());
  EXPECT_EQ(ParseDouble(t.rows[3][7]), 1.5);
  EXPECT_EQ(t.rows.back()[7], "");
  EXPECT_THROW(TrajectoryCsv(ref, ref.states, std::vector<Actuation>(3)),
               Error);
}

}  // namespace
}  // namespace flowdyn

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

#include "flowdyn/flowmatch.h"

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "flowdyn/csv.h"
#include "flowdyn/error.h"
#include "flowdyn/rng.h"
#include "support/test_util.h"

namespace flowdyn {
namespace {

using testing::ConstantNet;

Eigen::MatrixXd RandomMatrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal();
  return m;
}

FlowBatch RandomBatch(Variant variant, int n, Rng& rng) {
  FlowBatch b;
  b.condition = RandomMatrix(ConditionDim(variant), n, rng);
  b.target = RandomMatrix(kActuationDim, n, rng);
  b.state = b.condition.topRows(kStateDim);
  b.delta = RandomMatrix(kStateDim, n, rng);
  return b;
}

Mlp SmallFlowNet(Variant variant, uint64_t seed) {
  const std::vector<int> dims = {NetworkInputDim(variant), 10, 10,
                                 kActuationDim};
  return MlpInit(dims, seed);
}

Surrogate SmallSurrogate(uint64_t seed) {
  const std::vector<int> dims = {kStateDim + kActuationDim, 8, kStateDim};
  return Surrogate{MlpInit(dims, seed), ChannelStats::Identity(kStateDim)};
}

FlowTrainConfig TinyConfig(Variant variant) {
  FlowTrainConfig c;
  c.variant = variant;
  c.epochs = 2;
  c.surrogate_epochs = 2;
  c.batch_size = 32;
  c.hidden_layers = 2;
  c.hidden_width = 16;
  c.surrogate_layers = 1;
  c.surrogate_width = 16;
  c.seed = 3;
  return c;
}

const Dataset& SharedDataset() {
  static const Dataset* ds = new Dataset(testing::TinyRodDataset(4, 21));
  return *ds;
}

TEST(InterpolateTest, Midpoint) {
  const Eigen::VectorXd out = FmInterpolate(Eigen::Vector2d(0.5, -0.5),
                                            Eigen::Vector2d(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(out[0], 0.75);
  EXPECT_DOUBLE_EQ(out[1], 0.25);
}

TEST(InterpolateTest, Endpoints) {
  const Eigen::Vector2d z(0.3, 2.0), x(-1.0, 4.0);
  EXPECT_EQ(FmInterpolate(z, x, 0.0), Eigen::VectorXd(z));
  EXPECT_EQ(FmInterpolate(z, x, 1.0), Eigen::VectorXd(x));
}

TEST(InterpolateTest, RejectsBadInputs) {
  EXPECT_THROW(FmInterpolate(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 1.5),
               Error);
  EXPECT_THROW(FmInterpolate(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1),
                             std::nan("")),
               Error);
  EXPECT_THROW(FmInterpolate(Eigen::Vector2d(0, 0), Eigen::Vector3d(1, 1, 1),
                             0.5),
               Error);
}

TEST(FmLossTest, ZeroWhenVelocityMatchesTarget) {
  Rng rng(1);
  FlowBatch b = RandomBatch(Variant::kRf, 16, rng);
  const Eigen::Vector2d c(0.7, -1.3);
  FlowDraws d{Eigen::MatrixXd(2, 16), Eigen::VectorXd(16)};
  for (int i = 0; i < 16; ++i) {
    d.z.col(i) = b.target.col(i) - c;
    d.tau[i] = rng.Uniform01();
  }
  const Mlp net = ConstantNet(NetworkInputDim(Variant::kRf), c);
  const GradBundle g = FmLoss(net, b, d);
  EXPECT_NEAR(g.loss, 0.0, 1e-28);
}

TEST(FmLossTest, NoiseEqualToTargetGivesZeroRegressionTarget) {
  Rng rng(2);
  FlowBatch b = RandomBatch(Variant::kRf, 8, rng);
  FlowDraws d{b.target, Eigen::VectorXd::Constant(8, 0.4)};
  const Mlp zero = ConstantNet(NetworkInputDim(Variant::kRf),
                               Eigen::Vector2d::Zero());
  EXPECT_EQ(FmLoss(zero, b, d).loss, 0.0);
}

TEST(FmLossTest, MatchesPerSampleRecomputation) {
  Rng rng(3);
  const FlowBatch b = RandomBatch(Variant::kRfPhysical, 5, rng);
  Rng draw_rng(4);
  const FlowDraws d = DrawFlowNoise(5, draw_rng);
  const Mlp net = SmallFlowNet(Variant::kRfPhysical, 9);
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd in(NetworkInputDim(Variant::kRfPhysical));
    in.head(2) = FmInterpolate(d.z.col(i), b.target.col(i), d.tau[i]);
    in[2] = d.tau[i];
    in.tail(14) = b.condition.col(i);
    const Eigen::VectorXd v = Forward(net, in);
    total += (v - (b.target.col(i) - d.z.col(i))).squaredNorm();
  }
  EXPECT_NEAR(FmLoss(net, b, d).loss, total / 5.0, 1e-12);
}

TEST(FlowNoiseTest, DrawOrderIsZThenTau) {
  Rng a(17), b(17);
  const FlowDraws d = DrawFlowNoise(3, a);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(d.z(0, i), b.Normal());
    EXPECT_EQ(d.z(1, i), b.Normal());
    EXPECT_EQ(d.tau[i], b.Uniform01());
  }
}

TEST(ConsistencyTest, PerfectSurrogateGivesZero) {
  Rng rng(5);
  FlowBatch b = RandomBatch(Variant::kRfFwd, 12, rng);
  const Eigen::VectorXd dconst = RandomMatrix(kStateDim, 1, rng).col(0);
  for (int i = 0; i < 12; ++i) b.delta.col(i) = dconst;
  const Surrogate s{ConstantNet(kStateDim + kActuationDim, dconst),
                    ChannelStats::Identity(kStateDim)};
  const Mlp net = SmallFlowNet(Variant::kRfFwd, 1);
  Rng dr(6);
  const FlowDraws d = DrawFlowNoise(12, dr);
  for (auto est : {ConsistencyEstimator::kTerminalEstimate,
                   ConsistencyEstimator::kUnrolled}) {
    const GradBundle g = ConsistencyLoss(net, s, b, d, est, 4);
    EXPECT_EQ(g.loss, 0.0);
    for (size_t i = 0; i < net.ParameterCount(); ++i) {
      ASSERT_EQ(g.Gradient(i), 0.0);
    }
  }
}

TEST(ConsistencyTest, TerminalEstimateAtTauOneIsTarget) {
  Rng rng(7);
  const FlowBatch b = RandomBatch(Variant::kRfFwd, 6, rng);
  const Surrogate s = SmallSurrogate(2);
  const Mlp net = SmallFlowNet(Variant::kRfFwd, 3);
  const FlowDraws d{RandomMatrix(2, 6, rng), Eigen::VectorXd::Ones(6)};
  double expect = 0.0;
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd in(8);
    in << b.state.col(i), b.target.col(i);
    expect += (Forward(s.net, in) - b.delta.col(i)).squaredNorm();
  }
  const GradBundle g = ConsistencyLoss(
      net, s, b, d, ConsistencyEstimator::kTerminalEstimate, 1);
  EXPECT_NEAR(g.loss, expect / 6.0, 1e-12);
  for (size_t i = 0; i < net.ParameterCount(); ++i) {
    ASSERT_EQ(g.Gradient(i), 0.0);
  }
}

TEST(ConsistencyTest, TerminalMatchesRecomputation) {
  Rng rng(8);
  const FlowBatch b = RandomBatch(Variant::kRfFwd, 4, rng);
  const Surrogate s = SmallSurrogate(4);
  const Mlp net = SmallFlowNet(Variant::kRfFwd, 5);
  Rng dr(9);
  const FlowDraws d = DrawFlowNoise(4, dr);
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd in(NetworkInputDim(Variant::kRfFwd));
    const Eigen::VectorXd xi =
        FmInterpolate(d.z.col(i), b.target.col(i), d.tau[i]);
    in << xi, d.tau[i], b.condition.col(i);
    const Eigen::VectorXd u_hat = xi + (1.0 - d.tau[i]) * Forward(net, in);
    Eigen::VectorXd s_in(8);
    s_in << b.state.col(i), u_hat;
    expect += (Forward(s.net, s_in) - b.delta.col(i)).squaredNorm();
  }
  EXPECT_NEAR(ConsistencyLoss(net, s, b, d,
                              ConsistencyEstimator::kTerminalEstimate, 1)
                  .loss,
              expect / 4.0, 1e-10);
}

TEST(ConsistencyTest, UnrolledMatchesIntegrateFlow) {
  Rng rng(10);
  const FlowBatch b = RandomBatch(Variant::kRfFwd, 4, rng);
  const Surrogate s = SmallSurrogate(6);
  const Mlp net = SmallFlowNet(Variant::kRfFwd, 7);
  Rng dr(11);
  const FlowDraws d = DrawFlowNoise(4, dr);
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d u =
        IntegrateFlow(net, b.condition.col(i), d.z.col(i), 4);
    Eigen::VectorXd s_in(8);
    s_in << b.state.col(i), u;
    expect += (Forward(s.net, s_in) - b.delta.col(i)).squaredNorm();
  }
  EXPECT_NEAR(
      ConsistencyLoss(net, s, b, d, ConsistencyEstimator::kUnrolled, 4).loss,
      expect / 4.0, 1e-10);
}

TEST(ConsistencyTest, RequiresSurrogateBatch) {
  Rng rng(12);
  FlowBatch b = RandomBatch(Variant::kRfFwd, 3, rng);
  b.delta.resize(0, 0);
  Rng dr(1);
  EXPECT_THROW(ConsistencyLoss(SmallFlowNet(Variant::kRfFwd, 1),
                               SmallSurrogate(1), b, DrawFlowNoise(3, dr),
                               ConsistencyEstimator::kTerminalEstimate, 1),
               Error);
}

class GradientTest : public ::testing::TestWithParam<int> {};

TEST_P(GradientTest, AnalyticMatchesFiniteDifference) {
  const uint64_t seed = static_cast<uint64_t>(GetParam());
  Rng rng(seed + 50);
  const FlowBatch b = RandomBatch(Variant::kRfFwd, 5, rng);
  const Surrogate s = SmallSurrogate(seed + 1);
  const Mlp net = SmallFlowNet(Variant::kRfFwd, seed + 2);
  Rng dr(seed + 3);
  const FlowDraws d = DrawFlowNoise(5, dr);

  const GradCheckResult fm = FiniteDifferenceCheck(
      net, FmLoss(net, b, d),
      [&](const Mlp& m) { return FmLoss(m, b, d).loss; }, 1e-4);
  EXPECT_LT(fm.max_rel_error, 1e-4) << "fm index " << fm.worst_index;

  for (auto est : {ConsistencyEstimator::kTerminalEstimate,
                   ConsistencyEstimator::kUnrolled}) {
    const GradCheckResult r = FiniteDifferenceCheck(
        net, ConsistencyLoss(net, s, b, d, est, 3),
        [&](const Mlp& m) { return ConsistencyLoss(m, s, b, d, est, 3).loss; },
        1e-4);
    EXPECT_LT(r.max_rel_error, 1e-4)
        << EstimatorName(est) << " index " << r.worst_index << " analytic "
        << r.analytic << " numeric " << r.numeric;

    const GradCheckResult t = FiniteDifferenceCheck(
        net, FlowObjective(net, b, d, &s, 0.3, est, 3).grads,
        [&](const Mlp& m) {
          return FlowObjective(m, b, d, &s, 0.3, est, 3).loss_total;
        },
        1e-4);
    EXPECT_LT(t.max_rel_error, 1e-4)
        << "objective " << EstimatorName(est) << " index " << t.worst_index;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientTest, ::testing::Range(0, 4));

TEST(ObjectiveTest, CombinesTerms) {
  Rng rng(13);
  const FlowBatch b = RandomBatch(Variant::kRfFwd, 7, rng);
  const Surrogate s = SmallSurrogate(3);
  const Mlp net = SmallFlowNet(Variant::kRfFwd, 4);
  Rng dr(2);
  const FlowDraws d = DrawFlowNoise(7, dr);
  const ObjectiveValue o = FlowObjective(
      net, b, d, &s, 0.25, ConsistencyEstimator::kTerminalEstimate, 1);
  const double fm = FmLoss(net, b, d).loss;
  const double cons =
      ConsistencyLoss(net, s, b, d, ConsistencyEstimator::kTerminalEstimate, 1)
          .loss;
  EXPECT_NEAR(o.loss_fm, fm, 1e-14);
  EXPECT_NEAR(o.loss_cons, cons, 1e-14);
  EXPECT_NEAR(o.loss_total, fm + 0.25 * cons, 1e-14);

  const ObjectiveValue off = FlowObjective(
      net, b, d, &s, 0.0, ConsistencyEstimator::kTerminalEstimate, 1);
  EXPECT_EQ(off.loss_cons, 0.0);
  const GradBundle g = FmLoss(net, b, d);
  for (size_t i = 0; i < net.ParameterCount(); ++i) {
    ASSERT_EQ(off.grads.Gradient(i), g.Gradient(i));
  }
}

TEST(IntegrateTest, ConstantFieldIsExactForAnyStepCount) {
  const Eigen::Vector2d c(0.8, -2.5);
  const Mlp net = ConstantNet(NetworkInputDim(Variant::kRf), c);
  Rng rng(14);
  const Eigen::VectorXd cond = RandomMatrix(12, 1, rng).col(0);
  const Eigen::Vector2d z(0.3, 1.1);
  for (int k : {1, 10, 100}) {
    const Eigen::Vector2d out = IntegrateFlow(net, cond, z, k);
    EXPECT_NEAR(out[0], z[0] + c[0], 1e-12) << "K=" << k;
    EXPECT_NEAR(out[1], z[1] + c[1], 1e-12) << "K=" << k;
  }
}

TEST(IntegrateTest, RejectsBadArguments) {
  const Mlp net = ConstantNet(NetworkInputDim(Variant::kRf),
                              Eigen::Vector2d::Zero());
  EXPECT_THROW(IntegrateFlow(net, Eigen::VectorXd::Zero(12),
                             Eigen::Vector2d::Zero(), 0),
               Error);
  EXPECT_THROW(IntegrateFlow(net, Eigen::VectorXd::Zero(14),
                             Eigen::Vector2d::Zero(), 1),
               Error);
}

TEST(IntegrateTest, LinearFieldMatchesExplicitEuler) {
  // v = a * xi_0 (first component only), so Euler gives (1 + a/K)^K.
  const int in_dim = NetworkInputDim(Variant::kRf);
  const std::vector<int> dims = {in_dim, 2, 2};
  Mlp net = MlpInit(dims, 0);
  for (auto& w : net.weights) w.setZero();
  net.weights[0](0, 0) = 1.0;
  net.biases[0][0] = 10.0;  // keeps the ReLU active
  net.weights[1](0, 0) = 0.5;
  net.biases[1][0] = -5.0;
  for (int k : {1, 4, 10}) {
    const Eigen::Vector2d out =
        IntegrateFlow(net, Eigen::VectorXd::Zero(12), Eigen::Vector2d(1, 0), k);
    EXPECT_NEAR(out[0], std::pow(1.0 + 0.5 / k, k), 1e-12);
  }
}

InverseModel PhysicalModel(const StaticTable& table) {
  InverseModel m;
  m.variant = Variant::kRfPhysical;
  m.net = ConstantNet(NetworkInputDim(Variant::kRfPhysical),
                      Eigen::Vector2d::Zero());
  m.prior_table = table;
  return m;
}

TEST(SampleTest, ZeroResidualGivesPhysicsPrior) {
  const RodParams p;
  const StaticTable table = BuildStaticTable(p, 9);
  const InverseModel m = PhysicalModel(table);
  const TaskState x0 = TipState(RestState(p), p);
  const TaskState x1 =
      TipState(StaticEquilibrium(Actuation(12.0, -7.0), p), p);
  const ControlSample s =
      SampleControl(m, x0, x1, Eigen::Vector2d::Zero(), 10);
  const PriorResult prior = PhysicsPrior(x1.position, table);
  EXPECT_EQ(s.u_phys, prior.u);
  EXPECT_EQ(s.residual, Actuation::Zero());
  EXPECT_EQ(s.u, prior.u);
  EXPECT_NEAR(s.u[0], 12.0, 0.5);
  EXPECT_NEAR(s.u[1], -7.0, 0.5);
}

TEST(SampleTest, PhysicalOutputIsPriorPlusResidual) {
  const RodParams p;
  const StaticTable table = BuildStaticTable(p, 9);
  InverseModel m = PhysicalModel(table);
  m.net = SmallFlowNet(Variant::kRfPhysical, 5);
  m.scaler.residual.stddev = Eigen::Vector2d(3.0, 2.0);
  Rng rng(15);
  for (int i = 0; i < 10; ++i) {
    const TaskState a = testing::RandomTaskState(rng, 0.02);
    TaskState b = testing::RandomTaskState(rng, 0.02);
    b.position.z() += 0.38;
    const ControlSample s = SampleControl(m, a, b, StepNoise(1, i), 10);
    EXPECT_EQ(s.raw, s.u_phys + s.residual);
  }
}

TEST(SampleTest, ClampsToTensionLimit) {
  InverseModel m;
  m.variant = Variant::kMlpBaseline;
  m.net = ConstantNet(NetworkInputDim(Variant::kMlpBaseline),
                      Eigen::Vector2d(80.0, -20.0));
  const TaskState x;
  const ControlSample s =
      SampleControl(m, x, x, Eigen::Vector2d::Zero(), 10);
  EXPECT_TRUE(s.clamped);
  EXPECT_EQ(s.u, Actuation(50.0, -20.0));
  EXPECT_EQ(s.raw, Actuation(80.0, -20.0));
}

TEST(SampleTest, BaselineIgnoresNoise) {
  InverseModel m;
  m.variant = Variant::kMlpBaseline;
  const std::vector<int> dims = {12, 8, 2};
  m.net = MlpInit(dims, 2);
  Rng rng(16);
  const TaskState a = testing::RandomTaskState(rng);
  const TaskState b = testing::RandomTaskState(rng);
  EXPECT_EQ(SampleControl(m, a, b, StepNoise(1, 0), 10).u,
            SampleControl(m, a, b, StepNoise(2, 5), 3).u);
}

TEST(SampleTest, StepNoiseIsCounterBased) {
  EXPECT_EQ(StepNoise(3, 7), StepNoise(3, 7));
  EXPECT_NE(StepNoise(3, 7), StepNoise(3, 8));
  EXPECT_NE(StepNoise(3, 7), StepNoise(4, 7));
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const Eigen::Vector2d z = StepNoise(9, i);
    sum += z.sum();
    sq += z.squaredNorm();
  }
  EXPECT_NEAR(sum / 40000.0, 0.0, 0.03);
  EXPECT_NEAR(sq / 40000.0, 1.0, 0.05);
}

TEST(VariantTest, NamesRoundTrip) {
  for (Variant v : {Variant::kRf, Variant::kRfFwd, Variant::kRfPhysical,
                    Variant::kMlpBaseline}) {
    EXPECT_EQ(ParseVariant(VariantName(v)), v);
  }
  EXPECT_EQ(ParseVariant("RF_FWD"), Variant::kRfFwd);
  EXPECT_EQ(ParseVariant("mlp-baseline"), Variant::kMlpBaseline);
  EXPECT_THROW(ParseVariant("diffusion"), Error);
  EXPECT_EQ(ParseEstimator("unrolled"), ConsistencyEstimator::kUnrolled);
  EXPECT_THROW(ParseEstimator("exact"), Error);
}

TEST(VariantTest, InputDimensions) {
  EXPECT_EQ(NetworkInputDim(Variant::kRf), 15);
  EXPECT_EQ(NetworkInputDim(Variant::kRfFwd), 15);
  EXPECT_EQ(NetworkInputDim(Variant::kRfPhysical), 17);
  EXPECT_EQ(NetworkInputDim(Variant::kMlpBaseline), 12);
}

TEST(ConfigTest, ValidationRejectsBadValues) {
  FlowTrainConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.lambda_cons = -0.1;
  EXPECT_THROW(c.Validate(), Error);
  c = FlowTrainConfig();
  c.inference_steps = 0;
  EXPECT_THROW(c.Validate(), Error);
  c = FlowTrainConfig();
  c.batch_size = 0;
  EXPECT_THROW(c.Validate(), Error);
  c = FlowTrainConfig();
  c.lr = 0.0;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(BatchTest, PhysicalTargetsAreNormalizedResiduals) {
  const Dataset& ds = SharedDataset();
  std::vector<size_t> idx = {0, 5, 9};
  const FlowBatch b = MakeFlowBatch(ds.tuples, idx, ds.scaler,
                                    Variant::kRfPhysical, nullptr);
  ASSERT_EQ(b.condition.rows(), 14);
  for (int c = 0; c < 3; ++c) {
    const TransitionTuple& t = ds.tuples[idx[c]];
    const Eigen::VectorXd eta =
        Transform(b.target.col(c), ds.scaler.residual, Direction::kInverse);
    EXPECT_NEAR((eta - t.eta).norm(), 0.0, 1e-10);
    const Eigen::VectorXd uphys = Transform(
        b.condition.col(c).tail(2), ds.scaler.actuation, Direction::kInverse);
    EXPECT_NEAR((uphys - t.u_phys).norm(), 0.0, 1e-10);
  }
  std::vector<size_t> bad = {ds.tuples.size()};
  EXPECT_THROW(
      MakeFlowBatch(ds.tuples, bad, ds.scaler, Variant::kRf, nullptr), Error);
}

TEST(TrainTest, LogShapeAndEpochZero) {
  const FlowTrainConfig c = TinyConfig(Variant::kRf);
  const TrainResult r = TrainInverse(SharedDataset(), c);
  ASSERT_EQ(r.log.size(), 3u);
  for (int e = 0; e < 3; ++e) EXPECT_EQ(r.log[e].epoch, e);
  EXPECT_EQ(r.log[0].loss_cons, 0.0);
  EXPECT_EQ(r.log[0].loss_total, r.log[0].loss_fm);
  const CsvTable t = ParseCsv(LossLogCsv(r.log));
  const std::vector<std::string> header = {"epoch", "loss_fm", "loss_cons",
                                           "loss_total"};
  EXPECT_EQ(t.header, header);
  EXPECT_EQ(t.rows.size(), 3u);
  EXPECT_NO_THROW(r.model.Validate());
}

TEST(TrainTest, DeterministicForFixedSeed) {
  const FlowTrainConfig c = TinyConfig(Variant::kRfPhysical);
  const TrainResult a = TrainInverse(SharedDataset(), c);
  const TrainResult b = TrainInverse(SharedDataset(), c);
  for (size_t i = 0; i < a.model.net.ParameterCount(); ++i) {
    ASSERT_EQ(a.model.net.Parameter(i), b.model.net.Parameter(i));
  }
  EXPECT_EQ(LossLogCsv(a.log), LossLogCsv(b.log));
}

TEST(TrainTest, ZeroLambdaForwardVariantEqualsPlainFlow) {
  FlowTrainConfig c = TinyConfig(Variant::kRfFwd);
  c.lambda_cons = 0.0;
  const TrainResult fwd = TrainInverse(SharedDataset(), c);
  c.variant = Variant::kRf;
  const TrainResult rf = TrainInverse(SharedDataset(), c);
  ASSERT_EQ(fwd.model.net.ParameterCount(), rf.model.net.ParameterCount());
  for (size_t i = 0; i < rf.model.net.ParameterCount(); ++i) {
    ASSERT_EQ(fwd.model.net.Parameter(i), rf.model.net.Parameter(i));
  }
  for (size_t e = 0; e < rf.log.size(); ++e) {
    EXPECT_EQ(fwd.log[e].loss_fm, rf.log[e].loss_fm);
  }
}

TEST(TrainTest, ForwardVariantLogsConsistency) {
  const TrainResult r =
      TrainInverse(SharedDataset(), TinyConfig(Variant::kRfFwd));
  ASSERT_TRUE(r.surrogate.has_value());
  ASSERT_TRUE(r.model.surrogate.has_value());
  for (const LossRow& row : r.log) {
    EXPECT_GT(row.loss_cons, 0.0);
    EXPECT_NEAR(row.loss_total, row.loss_fm + 0.1 * row.loss_cons, 1e-12);
  }
}

TEST(TrainTest, NonFiniteDataIsNumericalFailure) {
  Dataset ds = SharedDataset();
  ds.tuples[3].x_next.position.x() = std::nan("");
  try {
    TrainInverse(ds, TinyConfig(Variant::kRf));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericalFailure);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos)
        << e.what();
  }
}

TEST(SurrogateTest, FinalLossIsFullPassLoss) {
  const Dataset& ds = SharedDataset();
  FlowTrainConfig c = TinyConfig(Variant::kRfFwd);
  c.surrogate_epochs = 3;
  const SurrogateResult r = TrainSurrogate(ds, c);
  ASSERT_EQ(r.epoch_loss.size(), 3u);
  EXPECT_EQ(r.final_loss, r.epoch_loss.back());
  EXPECT_NEAR(SurrogateLoss(r.surrogate, ds.tuples, ds.scaler), r.final_loss,
              1e-12);
}

TEST(SurrogateTest, PredictDenormalizesIncrement) {
  const RodParams p;
  Scaler scaler = Scaler::Identity();
  ChannelStats delta = ChannelStats::Identity(kStateDim);
  delta.mean.setConstant(0.01);
  delta.stddev.setConstant(2.0);
  Eigen::VectorXd out(kStateDim);
  out << 1, 0, 0, 0, 0, -1;
  const Surrogate s{ConstantNet(8, out), delta};
  TaskState x;
  x.position = Eigen::Vector3d(0.1, 0.2, 0.3);
  const TaskState y = s.Predict(x, Actuation(1.0, 2.0), scaler);
  EXPECT_NEAR(y.position.x(), 0.1 + 2.01, 1e-15);
  EXPECT_NEAR(y.position.y(), 0.2 + 0.01, 1e-15);
  EXPECT_NEAR(y.velocity.z(), -1.99, 1e-15);
}

TEST(ModelIoTest, RoundTripAllVariants) {
  testing::TempDir dir("flowmatch");
  const Dataset& ds = SharedDataset();
  for (Variant v : {Variant::kRf, Variant::kRfFwd, Variant::kRfPhysical,
                    Variant::kMlpBaseline}) {
    FlowTrainConfig c = TinyConfig(v);
    c.epochs = 1;
    c.surrogate_epochs = 1;
    c.inference_steps = 7;
    const TrainResult r = TrainInverse(ds, c);
    const std::string path = dir.File(std::string(VariantName(v)) + ".fmnn");
    SaveModel(path, r.model);
    const InverseModel back = LoadModel(path);
    EXPECT_EQ(back.variant, v);
    EXPECT_EQ(back.inference_steps, 7);
    EXPECT_EQ(back.params.Hash(), ds.params.Hash());
    EXPECT_EQ(back.surrogate.has_value(), v == Variant::kRfFwd);
    EXPECT_EQ(back.prior_table.has_value(), v == Variant::kRfPhysical);
    const TaskState a = ds.tuples[4].x_t, b = ds.tuples[4].x_next;
    EXPECT_EQ(SampleControl(back, a, b, StepNoise(0, 0), 7).u,
              SampleControl(r.model, a, b, StepNoise(0, 0), 7).u);
  }
}

TEST(ModelIoTest, ValidateRejectsMissingParts) {
  InverseModel m;
  m.variant = Variant::kRfFwd;
  m.net = SmallFlowNet(Variant::kRfFwd, 1);
  EXPECT_THROW(m.Validate(), Error);
  m.variant = Variant::kRfPhysical;
  EXPECT_THROW(m.Validate(), Error);
  m.variant = Variant::kRf;
  EXPECT_NO_THROW(m.Validate());
  m.variant = Variant::kMlpBaseline;
  EXPECT_THROW(m.Validate(), Error);
}

TEST(ModelIoTest, DatasetFileIsNotAModel) {
  testing::TempDir dir("flowmatch");
  SaveDataset(dir.File("d.fdyn"), SharedDataset());
  try {
    LoadModel(dir.File("d.fdyn"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataError);
  }
}

}  // namespace
}  // namespace flowdyn

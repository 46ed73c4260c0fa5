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

// Checks on the trained desk-scale artifacts produced by desk_pipeline.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "flowdyn/atomic_file.h"
#include "flowdyn/csv.h"
#include "flowdyn/dataio.h"
#include "flowdyn/flowmatch.h"
#include "flowdyn/rng.h"
#include "flowdyn/rollout.h"

namespace flowdyn {
namespace {

std::string g_dir;

std::string DeskFile(const std::string& name) { return g_dir + "/" + name; }

const Dataset& DeskData() {
  static const Dataset* ds = new Dataset(LoadDataset(DeskFile("data.fdyn")));
  return *ds;
}

const InverseModel& DeskModel(const std::string& variant) {
  static std::map<std::string, InverseModel>* cache =
      new std::map<std::string, InverseModel>();
  auto it = cache->find(variant);
  if (it == cache->end()) {
    it = cache->emplace(variant, LoadModel(DeskFile(variant + ".fmnn"))).first;
  }
  return it->second;
}

std::vector<double> LossColumn(const std::string& variant) {
  const CsvTable t = ParseCsv(ReadFile(DeskFile(variant + ".loss.csv")));
  const size_t c = t.Column("loss_fm");
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(ParseDouble(row[c]));
  return out;
}

class DeskVariantTest : public ::testing::TestWithParam<std::string> {};

TEST_P(DeskVariantTest, TrainingReducesLossFourfold) {
  const std::vector<double> loss = LossColumn(GetParam());
  ASSERT_EQ(loss.size(), 51u);
  EXPECT_LT(loss.back(), 0.25 * loss.front())
      << "epoch 0 " << loss.front() << ", epoch 50 " << loss.back();
}

TEST_P(DeskVariantTest, StepRefinementChangesLittle) {
  const InverseModel& model = DeskModel(GetParam());
  if (!IsFlowVariant(model.variant)) GTEST_SKIP() << "no flow to refine";
  const Dataset& ds = DeskData();
  Rng rng(2024);
  const double range = 2.0 * model.params.tension_limit;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto& t = ds.tuples[rng.Index(ds.tuples.size())];
    const Eigen::Vector2d z(rng.Normal(), rng.Normal());
    const Actuation a = SampleControl(model, t.x_t, t.x_next, z, 10).u;
    const Actuation b = SampleControl(model, t.x_t, t.x_next, z, 100).u;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  RecordProperty("worst_newtons", std::to_string(worst));
  EXPECT_LT(worst, 0.01 * range);
}

INSTANTIATE_TEST_SUITE_P(Variants, DeskVariantTest,
                         ::testing::Values("mlp", "rf", "rf-fwd",
                                           "rf-physical"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(DeskTrainingTest, UntrainedFlowLossIsNearFour) {
  for (const std::string v : {"rf", "rf-fwd", "rf-physical"}) {
    const double l0 = LossColumn(v).front();
    EXPECT_GT(l0, 4.0 * 0.7) << v;
    EXPECT_LT(l0, 4.0 * 1.3) << v;
  }
}

TEST(DeskSurrogateTest, FiftyEpochsBeatOne) {
  const Dataset& ds = DeskData();
  const InverseModel& fwd = DeskModel("rf-fwd");
  ASSERT_TRUE(fwd.surrogate.has_value());
  FlowTrainConfig c;
  c.seed = 1;
  c.surrogate_epochs = 1;
  const SurrogateResult one = TrainSurrogate(ds, c);
  const double fifty = SurrogateLoss(*fwd.surrogate, ds.tuples, ds.scaler);
  EXPECT_LT(fifty, one.final_loss);
}

TEST(DeskSurrogateTest, HeldOutOneStepError) {
  const Dataset& ds = DeskData();
  const InverseModel& fwd = DeskModel("rf-fwd");
  ASSERT_TRUE(fwd.surrogate.has_value());
  // Pooled position standard deviation of the training states.
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& t : ds.tuples) mean += t.x_t.position;
  mean /= static_cast<double>(ds.tuples.size());
  double var = 0.0;
  for (const auto& t : ds.tuples) var += (t.x_t.position - mean).squaredNorm();
  const double pos_std = std::sqrt(var / (3.0 * ds.tuples.size()));

  double sq = 0.0;
  size_t n = 0;
  for (uint64_t seed = 1000000; seed < 1000010; ++seed) {
    ExcitationSpec spec;
    spec.seed = seed;
    const Episode ep = RolloutEpisode(spec, ds.params);
    for (size_t t = 0; t < ep.controls.size(); ++t) {
      const TaskState pred =
          fwd.surrogate->Predict(ep.states[t], ep.controls[t], ds.scaler);
      sq += (pred.position - ep.states[t + 1].position).squaredNorm() / 3.0;
      ++n;
    }
  }
  const double rms = std::sqrt(sq / static_cast<double>(n));
  RecordProperty("rms_over_std", std::to_string(rms / pos_std));
  EXPECT_LT(rms, 0.05 * pos_std) << "rms " << rms << ", std " << pos_std;
}

double MedianRmse(const std::vector<MetricsRow>& rows,
                  const std::string& variant) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.variant == variant && r.trajectory == "circle") v.push_back(r.rmse_mm);
  }
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

TEST(DeskOrderingTest, ForwardBeatsFlowBeatsRegression) {
  const auto rows = ParseMetricsCsv(ReadFile(DeskFile("metrics.csv")));
  const double fwd = MedianRmse(rows, "rf-fwd");
  const double rf = MedianRmse(rows, "rf");
  const double mlp = MedianRmse(rows, "mlp");
  EXPECT_LT(fwd, rf) << "rf-fwd " << fwd << " mm, rf " << rf << " mm";
  EXPECT_LT(rf, mlp) << "rf " << rf << " mm, mlp " << mlp << " mm";
}

}  // namespace
}  // namespace flowdyn

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  if (argc != 2) {
    std::cerr << "usage: desk_test <desk-dir>\n";
    return 1;
  }
  flowdyn::g_dir = argv[1];
  return RUN_ALL_TESTS();
}

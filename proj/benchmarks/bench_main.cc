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

#include <vector>

#include <benchmark/benchmark.h>

#include "flowdyn/flowmatch.h"
#include "flowdyn/neural.h"
#include "flowdyn/rng.h"
#include "flowdyn/rod_sim.h"
#include "flowdyn/static_table.h"

namespace flowdyn {
namespace {

void BM_RodStep(benchmark::State& state) {
  const RodParams p;
  RodState s = StaticEquilibrium(Actuation(10.0, -5.0), p);
  const Actuation u(20.0, 15.0);
  for (auto _ : state) {
    s = Step(s, u, p, kControlDt);
    benchmark::DoNotOptimize(s.angles.data());
  }
}
BENCHMARK(BM_RodStep);

void BM_StaticSolve(benchmark::State& state) {
  const RodParams p;
  Rng rng(1);
  for (auto _ : state) {
    const Actuation u(rng.Uniform(-40, 40), rng.Uniform(-40, 40));
    benchmark::DoNotOptimize(SolveStatic(u, p).state.angles.data());
  }
}
BENCHMARK(BM_StaticSolve);

void BM_PhysicsPrior(benchmark::State& state) {
  const RodParams p;
  const StaticTable table = BuildStaticTable(p, 21);
  const Eigen::Vector3d target =
      TipState(StaticEquilibrium(Actuation(17.0, -23.0), p), p).position;
  for (auto _ : state) {
    benchmark::DoNotOptimize(PhysicsPrior(target, table).u.data());
  }
}
BENCHMARK(BM_PhysicsPrior);

void BM_ForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const std::vector<int> dims = {15, 256, 256, 256, 2};
  const Mlp net = MlpInit(dims, 1);
  Rng rng(2);
  Eigen::MatrixXd x(15, batch), y(2, batch);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
  for (int i = 0; i < y.size(); ++i) y.data()[i] = rng.Normal();
  for (auto _ : state) {
    const GradBundle g = MseGrads(net, x, y);
    benchmark::DoNotOptimize(g.loss);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(256);

void BM_SampleControl(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  InverseModel m;
  m.variant = Variant::kRfFwd;
  const std::vector<int> dims = {NetworkInputDim(m.variant), 256, 256, 256, 2};
  m.net = MlpInit(dims, 3);
  Rng rng(4);
  TaskState a, b;
  a.position = Eigen::Vector3d(0.01, 0.02, 0.39);
  b.position = Eigen::Vector3d(0.012, 0.021, 0.39);
  for (auto _ : state) {
    const Eigen::Vector2d z(rng.Normal(), rng.Normal());
    benchmark::DoNotOptimize(SampleControl(m, a, b, z, k).u.data());
  }
}
BENCHMARK(BM_SampleControl)->Arg(1)->Arg(10)->Arg(100);

}  // namespace
}  // namespace flowdyn

BENCHMARK_MAIN();

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

// Conditional rectified-flow inverse models, the forward surrogate used by
// the consistency regularizer, and the deterministic regression baseline.
//
// All learning happens in normalized coordinates. The flow variable xi is
// the normalized actuation (RF, RF-FWD) or the normalized residual against
// the static prior (RF-Physical). The velocity network input is
// [xi_tau, tau, condition] with condition [x_t, x_next] or
// [x_t, x_next, u_phys].

#ifndef FLOWDYN_FLOWMATCH_H_
#define FLOWDYN_FLOWMATCH_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "flowdyn/dataio.h"
#include "flowdyn/neural.h"
#include "flowdyn/rng.h"
#include "flowdyn/rod_sim.h"
#include "flowdyn/scaler.h"
#include "flowdyn/static_table.h"

namespace flowdyn {

enum class Variant { kRf, kRfFwd, kRfPhysical, kMlpBaseline };

// "rf", "rf-fwd", "rf-physical", "mlp".
std::string_view VariantName(Variant variant);
// Accepts the names above, case-insensitive, with '_' for '-' and
// "mlp-baseline". Throws kInvalidArgument otherwise.
Variant ParseVariant(std::string_view name);
bool IsFlowVariant(Variant variant);

enum class ConsistencyEstimator { kTerminalEstimate, kUnrolled };
std::string_view EstimatorName(ConsistencyEstimator estimator);
ConsistencyEstimator ParseEstimator(std::string_view name);

struct FlowTrainConfig {
  Variant variant = Variant::kRf;
  double lambda_cons = 0.1;
  int inference_steps = 10;  // K
  int epochs = 50;
  int batch_size = 256;
  double lr = 1e-3;
  uint64_t seed = 0;
  ConsistencyEstimator estimator = ConsistencyEstimator::kTerminalEstimate;
  int unroll_steps = 4;      // K_train for kUnrolled
  int hidden_layers = 3;
  int hidden_width = 256;
  int surrogate_layers = 2;
  int surrogate_width = 128;
  int surrogate_epochs = 50;

  void Validate() const;
};

constexpr int kActuationDim = 2;
constexpr int kStateDim = 6;

// Frozen one-step predictor. Input [x_t, u_t] normalized with the dataset
// scaler; output is the state increment x_next - x_t normalized by `delta`.
struct Surrogate {
  Mlp net;
  ChannelStats delta;

  TaskState Predict(const TaskState& x_t, const Actuation& u,
                    const Scaler& scaler) const;
};

struct SurrogateResult {
  Surrogate surrogate;
  std::vector<double> epoch_loss;  // full-pass MSE after each epoch
  double final_loss = 0.0;         // == epoch_loss.back()
};

SurrogateResult TrainSurrogate(const Dataset& dataset,
                               const FlowTrainConfig& config);

// Full-pass normalized MSE of a surrogate over `tuples`.
double SurrogateLoss(const Surrogate& surrogate,
                     std::span<const TransitionTuple> tuples,
                     const Scaler& scaler);

struct InverseModel {
  Variant variant = Variant::kRf;
  Mlp net;  // v_theta, or the regression net for kMlpBaseline
  Scaler scaler = Scaler::Identity();
  RodParams params;
  int inference_steps = 10;
  std::optional<StaticTable> prior_table;  // required for kRfPhysical
  std::optional<Surrogate> surrogate;      // required for kRfFwd

  // Throws kInvalidArgument when a required component is missing or the
  // network shape does not match the variant.
  void Validate() const;
};

int ConditionDim(Variant variant);
int NetworkInputDim(Variant variant);

// xi_tau = (1 - tau) z + tau xi_t.
Eigen::VectorXd FmInterpolate(const Eigen::VectorXd& z,
                              const Eigen::VectorXd& target, double tau);

// Normalized minibatch, one sample per column.
struct FlowBatch {
  Eigen::MatrixXd condition;  // ConditionDim x B
  Eigen::MatrixXd target;     // 2 x B: xi_t, or u_t for kMlpBaseline
  Eigen::MatrixXd state;      // 6 x B normalized x_t
  Eigen::MatrixXd delta;      // 6 x B normalized x_next - x_t (if surrogate)
  int size() const { return static_cast<int>(target.cols()); }
};

FlowBatch MakeFlowBatch(std::span<const TransitionTuple> tuples,
                        std::span<const size_t> indices, const Scaler& scaler,
                        Variant variant, const Surrogate* surrogate);

struct FlowDraws {
  Eigen::MatrixXd z;    // 2 x B
  Eigen::VectorXd tau;  // B
};

// Per sample: z0, z1 ~ N(0, 1), then tau ~ U[0, 1].
FlowDraws DrawFlowNoise(int batch, Rng& rng);

// [xi_tau; tau; condition] for every column.
Eigen::MatrixXd FlowInputs(const FlowBatch& batch, const FlowDraws& draws);

// mean_b |v(xi_tau, tau, c) - (xi_t - z)|^2 with exact parameter gradients.
GradBundle FmLoss(const Mlp& net, const FlowBatch& batch,
                  const FlowDraws& draws);

// mean_b |f(x_t, u_hat) - delta|^2 in surrogate output coordinates with
// gradients into net only. u_hat comes from the terminal estimate
// xi_tau + (1 - tau) v at the given draws, or from unroll_steps Euler steps
// starting at z.
GradBundle ConsistencyLoss(const Mlp& net, const Surrogate& surrogate,
                           const FlowBatch& batch, const FlowDraws& draws,
                           ConsistencyEstimator estimator, int unroll_steps);

struct ObjectiveValue {
  GradBundle grads;  // gradient of loss_total
  double loss_fm = 0.0;
  double loss_cons = 0.0;
  double loss_total = 0.0;
};

// L_FM + lambda L_cons. The consistency term is only evaluated when
// lambda > 0 and a surrogate is given.
ObjectiveValue FlowObjective(const Mlp& net, const FlowBatch& batch,
                             const FlowDraws& draws, const Surrogate* surrogate,
                             double lambda, ConsistencyEstimator estimator,
                             int unroll_steps);

struct LossRow {
  int epoch = 0;  // 0 is the untrained network
  double loss_fm = 0.0;
  double loss_cons = 0.0;
  double loss_total = 0.0;
};

// Header epoch,loss_fm,loss_cons,loss_total.
std::string LossLogCsv(std::span<const LossRow> rows);

struct TrainResult {
  InverseModel model;
  std::vector<LossRow> log;
  std::optional<SurrogateResult> surrogate;  // set when trained here
};

// Minibatch Adam on the variant's objective. kRfFwd trains a surrogate first
// unless `surrogate` is given. For kMlpBaseline loss_fm holds the
// regression loss. Aborts with kNumericalFailure naming the epoch on a
// non-finite loss.
TrainResult TrainInverse(const Dataset& dataset, const FlowTrainConfig& config,
                         const Surrogate* surrogate = nullptr);

struct ControlSample {
  Actuation u = Actuation::Zero();         // clamped command
  Actuation u_phys = Actuation::Zero();    // zero unless kRfPhysical
  Actuation residual = Actuation::Zero();  // denormalized eta_hat
  Actuation raw = Actuation::Zero();       // before clamping
  bool clamped = false;
  bool prior_out_of_range = false;
};

// Integrates xi from z with K uniform Euler steps and maps the result to a
// physical actuation clamped to +/- tension_limit.
ControlSample SampleControl(const InverseModel& model, const TaskState& x_t,
                            const TaskState& x_next, const Eigen::Vector2d& z,
                            int steps);

// Euler integration in normalized coordinates; exposed for testing.
Eigen::Vector2d IntegrateFlow(const Mlp& net,
                              const Eigen::VectorXd& condition,
                              const Eigen::Vector2d& z, int steps);

// Normalized condition vector for a query.
Eigen::VectorXd QueryCondition(const InverseModel& model,
                               const TaskState& x_t, const TaskState& x_next,
                               const Actuation& u_phys);

// Noise for control step `step` of a rollout seeded with `seed`.
Eigen::Vector2d StepNoise(uint64_t seed, uint64_t step);

// FMNN container: NETW, SCLR, MNFT, PRMS, and STBL / SURR when present.
void SaveModel(const std::string& path, const InverseModel& model);
InverseModel LoadModel(const std::string& path);

}  // namespace flowdyn

#endif  // FLOWDYN_FLOWMATCH_H_

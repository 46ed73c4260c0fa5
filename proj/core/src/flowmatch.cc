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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "flowdyn/atomic_file.h"
#include "flowdyn/csv.h"
#include "flowdyn/error.h"

namespace flowdyn {
namespace {

constexpr uint64_t kInitSalt = 0x5f1a7e0d2c4b9e31ULL;
constexpr uint64_t kSurrogateSalt = 0x9c3d41f8a2e67b05ULL;
constexpr uint64_t kEpochZeroSalt = 0x2b7e151628aed2a6ULL;
constexpr uint32_t kManifestVersion = 1;

// Untrained inverse nets start with a small output layer so the initial
// velocity is near zero and the first FM loss reflects the data alone.
constexpr double kOutputInitScale = 0.1;

std::string Normalize(std::string_view name) {
  std::string s(name);
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  return s;
}

std::vector<int> HiddenDims(int input, int layers, int width, int output) {
  std::vector<int> dims = {input};
  for (int i = 0; i < layers; ++i) dims.push_back(width);
  dims.push_back(output);
  return dims;
}

FlowBatch Gather(const FlowBatch& all, std::span<const size_t> idx) {
  FlowBatch b;
  const auto n = static_cast<Eigen::Index>(idx.size());
  auto take = [&](const Eigen::MatrixXd& src, Eigen::MatrixXd& dst) {
    dst.resize(src.rows(), src.cols() == 0 ? 0 : n);
    if (src.cols() == 0) return;
    for (Eigen::Index c = 0; c < n; ++c) {
      dst.col(c) = src.col(static_cast<Eigen::Index>(idx[c]));
    }
  };
  take(all.condition, b.condition);
  take(all.target, b.target);
  take(all.state, b.state);
  take(all.delta, b.delta);
  return b;
}

std::vector<size_t> Iota(size_t n) {
  std::vector<size_t> v(n);
  std::iota(v.begin(), v.end(), size_t{0});
  return v;
}

void CheckFinite(double loss, const std::string& what, int epoch) {
  if (!std::isfinite(loss)) {
    ThrowNumericalFailure(what + ": non-finite loss at epoch " +
                          std::to_string(epoch));
  }
}

// Terminal-estimate consistency term for an already evaluated velocity v.
// Returns the loss and writes dL/dv.
double TerminalConsistency(const Surrogate& surrogate, const FlowBatch& batch,
                           const FlowDraws& draws, const Eigen::MatrixXd& v,
                           Eigen::MatrixXd* d_v) {
  const Eigen::Index n = batch.target.cols();
  const Eigen::RowVectorXd tau = draws.tau.transpose();
  const Eigen::RowVectorXd rest = (1.0 - tau.array()).matrix();
  Eigen::MatrixXd xi_tau = draws.z.array().rowwise() * (1.0 - tau.array()) +
                           batch.target.array().rowwise() * tau.array();
  Eigen::MatrixXd s_in(kStateDim + kActuationDim, n);
  s_in.topRows(kStateDim) = batch.state;
  s_in.bottomRows(kActuationDim) =
      xi_tau + (v.array().rowwise() * rest.array()).matrix();
  const ForwardCache cache = ForwardTrace(surrogate.net, s_in);
  const Eigen::MatrixXd err = cache.output() - batch.delta;
  const double count = static_cast<double>(n);
  const Eigen::MatrixXd d_in =
      Backward(surrogate.net, cache, (2.0 / count) * err, nullptr);
  *d_v = d_in.bottomRows(kActuationDim).array().rowwise() * rest.array();
  return err.squaredNorm() / count;
}

GradBundle UnrolledConsistency(const Mlp& net, const Surrogate& surrogate,
                               const FlowBatch& batch, const FlowDraws& draws,
                               int steps) {
  const Eigen::Index n = batch.target.cols();
  const double h = 1.0 / steps;
  Eigen::MatrixXd inputs(net.input_dim(), n);
  inputs.bottomRows(batch.condition.rows()) = batch.condition;
  Eigen::MatrixXd xi = draws.z;
  std::vector<ForwardCache> caches;
  for (int k = 0; k < steps; ++k) {
    inputs.topRows(kActuationDim) = xi;
    inputs.row(kActuationDim).setConstant(k * h);
    caches.push_back(ForwardTrace(net, inputs));
    xi += h * caches.back().output();
  }
  Eigen::MatrixXd s_in(kStateDim + kActuationDim, n);
  s_in.topRows(kStateDim) = batch.state;
  s_in.bottomRows(kActuationDim) = xi;
  const ForwardCache s_cache = ForwardTrace(surrogate.net, s_in);
  const Eigen::MatrixXd err = s_cache.output() - batch.delta;
  const double count = static_cast<double>(n);
  GradBundle grads = GradBundle::ZerosLike(net);
  grads.loss = err.squaredNorm() / count;
  Eigen::MatrixXd g =
      Backward(surrogate.net, s_cache, (2.0 / count) * err, nullptr)
          .bottomRows(kActuationDim);
  for (int k = steps - 1; k >= 0; --k) {
    const Eigen::MatrixXd d_in = Backward(net, caches[k], h * g, &grads);
    g += d_in.topRows(kActuationDim);
  }
  return grads;
}

}  // namespace

std::string_view VariantName(Variant variant) {
  switch (variant) {
    case Variant::kRf: return "rf";
    case Variant::kRfFwd: return "rf-fwd";
    case Variant::kRfPhysical: return "rf-physical";
    case Variant::kMlpBaseline: return "mlp";
  }
  return "unknown";
}

Variant ParseVariant(std::string_view name) {
  const std::string s = Normalize(name);
  if (s == "rf") return Variant::kRf;
  if (s == "rf-fwd") return Variant::kRfFwd;
  if (s == "rf-physical") return Variant::kRfPhysical;
  if (s == "mlp" || s == "mlp-baseline") return Variant::kMlpBaseline;
  ThrowInvalidArgument("unknown variant '" + std::string(name) +
                       "' (expected rf, rf-fwd, rf-physical, mlp)");
}

bool IsFlowVariant(Variant variant) { return variant != Variant::kMlpBaseline; }

std::string_view EstimatorName(ConsistencyEstimator estimator) {
  return estimator == ConsistencyEstimator::kUnrolled ? "unrolled"
                                                      : "terminal";
}

ConsistencyEstimator ParseEstimator(std::string_view name) {
  const std::string s = Normalize(name);
  if (s == "terminal" || s == "terminal-estimate") {
    return ConsistencyEstimator::kTerminalEstimate;
  }
  if (s == "unrolled") return ConsistencyEstimator::kUnrolled;
  ThrowInvalidArgument("unknown consistency estimator '" + std::string(name) +
                       "' (expected terminal, unrolled)");
}

void FlowTrainConfig::Validate() const {
  if (!(lambda_cons >= 0.0) || !std::isfinite(lambda_cons)) {
    ThrowInvalidArgument("lambda_cons must be finite and >= 0");
  }
  if (inference_steps < 1) ThrowInvalidArgument("inference_steps must be >= 1");
  if (epochs < 0) ThrowInvalidArgument("epochs must be >= 0");
  if (surrogate_epochs < 0) ThrowInvalidArgument("surrogate_epochs must be >= 0");
  if (batch_size < 1) ThrowInvalidArgument("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) ThrowInvalidArgument("lr must be > 0");
  if (unroll_steps < 1) ThrowInvalidArgument("unroll_steps must be >= 1");
  if (hidden_layers < 1 || hidden_width < 1 || surrogate_layers < 1 ||
      surrogate_width < 1) {
    ThrowInvalidArgument("network layer counts and widths must be >= 1");
  }
}

TaskState Surrogate::Predict(const TaskState& x_t, const Actuation& u,
                             const Scaler& scaler) const {
  Eigen::VectorXd in(kStateDim + kActuationDim);
  in.head(kStateDim) =
      Transform(x_t.AsVector(), scaler.state, Direction::kForward);
  in.tail(kActuationDim) = Transform(u, scaler.actuation, Direction::kForward);
  const Eigen::VectorXd d =
      Transform(Forward(net, in), delta, Direction::kInverse);
  return TaskState::FromVector(x_t.AsVector() + Vector6d(d));
}

namespace {

struct SurrogateData {
  Eigen::MatrixXd inputs;   // 8 x N
  Eigen::MatrixXd targets;  // 6 x N
};

SurrogateData SurrogateArrays(std::span<const TransitionTuple> tuples,
                              const Scaler& scaler,
                              const ChannelStats& delta) {
  const auto n = static_cast<Eigen::Index>(tuples.size());
  SurrogateData d{Eigen::MatrixXd(kStateDim + kActuationDim, n),
                  Eigen::MatrixXd(kStateDim, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const TransitionTuple& t = tuples[i];
    const Vector6d x = t.x_t.AsVector();
    d.inputs.col(i).head(kStateDim) =
        Transform(x, scaler.state, Direction::kForward);
    d.inputs.col(i).tail(kActuationDim) =
        Transform(t.u_t, scaler.actuation, Direction::kForward);
    d.targets.col(i) = Transform(t.x_next.AsVector() - x, delta,
                                 Direction::kForward);
  }
  return d;
}

double FullPassMse(const Mlp& net, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets) {
  constexpr Eigen::Index kChunk = 4096;
  double total = 0.0;
  for (Eigen::Index c = 0; c < inputs.cols(); c += kChunk) {
    const Eigen::Index m = std::min(kChunk, inputs.cols() - c);
    total += (ForwardBatch(net, inputs.middleCols(c, m)) -
              targets.middleCols(c, m))
                 .squaredNorm();
  }
  return total / static_cast<double>(inputs.cols());
}

}  // namespace

double SurrogateLoss(const Surrogate& surrogate,
                     std::span<const TransitionTuple> tuples,
                     const Scaler& scaler) {
  if (tuples.empty()) ThrowInvalidArgument("SurrogateLoss: no tuples");
  const SurrogateData d = SurrogateArrays(tuples, scaler, surrogate.delta);
  return FullPassMse(surrogate.net, d.inputs, d.targets);
}

SurrogateResult TrainSurrogate(const Dataset& dataset,
                               const FlowTrainConfig& config) {
  config.Validate();
  const auto& tuples = dataset.tuples;
  if (tuples.size() < 2) {
    ThrowInvalidArgument("TrainSurrogate: dataset needs at least 2 tuples");
  }
  Eigen::MatrixXd deltas(kStateDim, static_cast<Eigen::Index>(tuples.size()));
  for (size_t i = 0; i < tuples.size(); ++i) {
    deltas.col(static_cast<Eigen::Index>(i)) =
        tuples[i].x_next.AsVector() - tuples[i].x_t.AsVector();
  }
  SurrogateResult result;
  result.surrogate.delta = FitChannels(deltas);
  const SurrogateData data =
      SurrogateArrays(tuples, dataset.scaler, result.surrogate.delta);

  const std::vector<int> dims =
      HiddenDims(kStateDim + kActuationDim, config.surrogate_layers,
                 config.surrogate_width, kStateDim);
  Mlp net = MlpInit(dims, Mix64(config.seed ^ kSurrogateSalt ^ kInitSalt));
  AdamState adam = AdamState::For(net, config.lr);
  Rng rng(Mix64(config.seed ^ kSurrogateSalt));
  std::vector<size_t> order = Iota(tuples.size());
  Eigen::MatrixXd x, y;
  for (int epoch = 1; epoch <= config.surrogate_epochs; ++epoch) {
    rng.Shuffle(std::span<size_t>(order));
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      const auto m = static_cast<Eigen::Index>(end - start);
      x.resize(data.inputs.rows(), m);
      y.resize(data.targets.rows(), m);
      for (Eigen::Index c = 0; c < m; ++c) {
        const auto src = static_cast<Eigen::Index>(order[start + c]);
        x.col(c) = data.inputs.col(src);
        y.col(c) = data.targets.col(src);
      }
      const GradBundle g = MseGrads(net, x, y);
      CheckFinite(g.loss, "surrogate training", epoch);
      AdamStep(net, g, adam);
    }
    const double loss = FullPassMse(net, data.inputs, data.targets);
    CheckFinite(loss, "surrogate training", epoch);
    result.epoch_loss.push_back(loss);
  }
  if (result.epoch_loss.empty()) {
    result.epoch_loss.push_back(FullPassMse(net, data.inputs, data.targets));
  }
  result.final_loss = result.epoch_loss.back();
  result.surrogate.net = std::move(net);
  return result;
}

int ConditionDim(Variant variant) {
  return variant == Variant::kRfPhysical ? 2 * kStateDim + kActuationDim
                                         : 2 * kStateDim;
}

int NetworkInputDim(Variant variant) {
  if (variant == Variant::kMlpBaseline) return ConditionDim(variant);
  return kActuationDim + 1 + ConditionDim(variant);
}

void InverseModel::Validate() const {
  if (net.dims.size() < 2 || net.input_dim() != NetworkInputDim(variant) ||
      net.output_dim() != kActuationDim) {
    ThrowInvalidArgument("network shape does not match variant " +
                         std::string(VariantName(variant)));
  }
  if (variant == Variant::kRfPhysical &&
      (!prior_table || prior_table->empty())) {
    ThrowInvalidArgument("rf-physical model requires a prior table");
  }
  if (variant == Variant::kRfFwd && !surrogate) {
    ThrowInvalidArgument("rf-fwd model requires a surrogate");
  }
  if (inference_steps < 1) ThrowInvalidArgument("inference_steps must be >= 1");
}

Eigen::VectorXd FmInterpolate(const Eigen::VectorXd& z,
                              const Eigen::VectorXd& target, double tau) {
  if (z.size() != target.size()) {
    ThrowInvalidArgument("FmInterpolate: dimension mismatch");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    ThrowInvalidArgument("FmInterpolate: tau outside [0, 1]");
  }
  return (1.0 - tau) * z + tau * target;
}

FlowBatch MakeFlowBatch(std::span<const TransitionTuple> tuples,
                        std::span<const size_t> indices, const Scaler& scaler,
                        Variant variant, const Surrogate* surrogate) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  FlowBatch b;
  b.condition.resize(ConditionDim(variant), n);
  b.target.resize(kActuationDim, n);
  b.state.resize(kStateDim, n);
  if (surrogate) b.delta.resize(kStateDim, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (indices[c] >= tuples.size()) {
      ThrowInvalidArgument("MakeFlowBatch: index out of range");
    }
    const TransitionTuple& t = tuples[indices[c]];
    const Vector6d x = t.x_t.AsVector();
    const Vector6d xn = t.x_next.AsVector();
    b.state.col(c) = Transform(x, scaler.state, Direction::kForward);
    b.condition.col(c).head(kStateDim) = b.state.col(c);
    b.condition.col(c).segment(kStateDim, kStateDim) =
        Transform(xn, scaler.state, Direction::kForward);
    if (variant == Variant::kRfPhysical) {
      b.condition.col(c).tail(kActuationDim) =
          Transform(t.u_phys, scaler.actuation, Direction::kForward);
      b.target.col(c) = Transform(t.eta, scaler.residual, Direction::kForward);
    } else {
      b.target.col(c) = Transform(t.u_t, scaler.actuation, Direction::kForward);
    }
    if (surrogate) {
      b.delta.col(c) = Transform(xn - x, surrogate->delta, Direction::kForward);
    }
  }
  return b;
}

FlowDraws DrawFlowNoise(int batch, Rng& rng) {
  FlowDraws d{Eigen::MatrixXd(kActuationDim, batch), Eigen::VectorXd(batch)};
  for (int c = 0; c < batch; ++c) {
    d.z(0, c) = rng.Normal();
    d.z(1, c) = rng.Normal();
    d.tau(c) = rng.Uniform01();
  }
  return d;
}

Eigen::MatrixXd FlowInputs(const FlowBatch& batch, const FlowDraws& draws) {
  const Eigen::Index n = batch.target.cols();
  if (draws.z.cols() != n || draws.tau.size() != n) {
    ThrowInvalidArgument("FlowInputs: draws do not match batch size");
  }
  Eigen::MatrixXd in(kActuationDim + 1 + batch.condition.rows(), n);
  in.topRows(kActuationDim) =
      draws.z.array().rowwise() * (1.0 - draws.tau.transpose().array()) +
      batch.target.array().rowwise() * draws.tau.transpose().array();
  in.row(kActuationDim) = draws.tau.transpose();
  in.bottomRows(batch.condition.rows()) = batch.condition;
  return in;
}

GradBundle FmLoss(const Mlp& net, const FlowBatch& batch,
                  const FlowDraws& draws) {
  const ForwardCache cache = ForwardTrace(net, FlowInputs(batch, draws));
  const double n = static_cast<double>(batch.size());
  const Eigen::MatrixXd err = cache.output() - (batch.target - draws.z);
  GradBundle grads = GradBundle::ZerosLike(net);
  grads.loss = err.squaredNorm() / n;
  Backward(net, cache, (2.0 / n) * err, &grads);
  return grads;
}

GradBundle ConsistencyLoss(const Mlp& net, const Surrogate& surrogate,
                           const FlowBatch& batch, const FlowDraws& draws,
                           ConsistencyEstimator estimator, int unroll_steps) {
  if (batch.delta.cols() != batch.target.cols()) {
    ThrowInvalidArgument("ConsistencyLoss: batch built without a surrogate");
  }
  if (estimator == ConsistencyEstimator::kUnrolled) {
    if (unroll_steps < 1) ThrowInvalidArgument("unroll_steps must be >= 1");
    return UnrolledConsistency(net, surrogate, batch, draws, unroll_steps);
  }
  const ForwardCache cache = ForwardTrace(net, FlowInputs(batch, draws));
  Eigen::MatrixXd d_v;
  GradBundle grads = GradBundle::ZerosLike(net);
  grads.loss = TerminalConsistency(surrogate, batch, draws, cache.output(), &d_v);
  Backward(net, cache, d_v, &grads);
  return grads;
}

ObjectiveValue FlowObjective(const Mlp& net, const FlowBatch& batch,
                             const FlowDraws& draws, const Surrogate* surrogate,
                             double lambda, ConsistencyEstimator estimator,
                             int unroll_steps) {
  const bool cons = surrogate != nullptr && lambda > 0.0;
  if (cons && batch.delta.cols() != batch.target.cols()) {
    ThrowInvalidArgument("FlowObjective: batch built without a surrogate");
  }
  const ForwardCache cache = ForwardTrace(net, FlowInputs(batch, draws));
  const double n = static_cast<double>(batch.size());
  const Eigen::MatrixXd err = cache.output() - (batch.target - draws.z);
  ObjectiveValue out;
  out.grads = GradBundle::ZerosLike(net);
  out.loss_fm = err.squaredNorm() / n;
  Eigen::MatrixXd d_out = (2.0 / n) * err;
  if (cons && estimator == ConsistencyEstimator::kTerminalEstimate) {
    Eigen::MatrixXd d_v;
    out.loss_cons =
        TerminalConsistency(*surrogate, batch, draws, cache.output(), &d_v);
    d_out += lambda * d_v;
  }
  Backward(net, cache, d_out, &out.grads);
  if (cons && estimator == ConsistencyEstimator::kUnrolled) {
    const GradBundle g =
        UnrolledConsistency(net, *surrogate, batch, draws, unroll_steps);
    out.loss_cons = g.loss;
    out.grads.AddScaled(g, lambda);
  }
  out.loss_total = out.loss_fm + lambda * out.loss_cons;
  out.grads.loss = out.loss_total;
  return out;
}

std::string LossLogCsv(std::span<const LossRow> rows) {
  std::ostringstream os;
  os << "epoch,loss_fm,loss_cons,loss_total\n";
  for (const LossRow& r : rows) {
    os << r.epoch << ',' << FormatDouble(r.loss_fm) << ','
       << FormatDouble(r.loss_cons) << ',' << FormatDouble(r.loss_total)
       << '\n';
  }
  return os.str();
}

TrainResult TrainInverse(const Dataset& dataset, const FlowTrainConfig& config,
                         const Surrogate* surrogate) {
  config.Validate();
  const Variant variant = config.variant;
  const auto& tuples = dataset.tuples;
  if (tuples.empty()) ThrowInvalidArgument("TrainInverse: empty dataset");
  if (variant == Variant::kRfPhysical && dataset.table.empty()) {
    ThrowInvalidArgument("rf-physical training requires the dataset prior table");
  }

  TrainResult result;
  const Surrogate* sur = nullptr;
  if (variant == Variant::kRfFwd) {
    if (surrogate) {
      sur = surrogate;
    } else {
      result.surrogate = TrainSurrogate(dataset, config);
      sur = &result.surrogate->surrogate;
    }
  }

  Mlp net = MlpInit(HiddenDims(NetworkInputDim(variant), config.hidden_layers,
                               config.hidden_width, kActuationDim),
                    Mix64(config.seed ^ kInitSalt));
  net.weights.back() *= kOutputInitScale;

  const std::vector<size_t> all_idx = Iota(tuples.size());
  const FlowBatch all =
      MakeFlowBatch(tuples, all_idx, dataset.scaler, variant, sur);
  const bool regression = variant == Variant::kMlpBaseline;
  const bool cons = sur != nullptr && config.lambda_cons > 0.0;
  const size_t bs = static_cast<size_t>(config.batch_size);

  // One epoch over `order`: trains when `adam` is set, otherwise only
  // evaluates. Returns batch-size weighted mean losses.
  auto run_epoch = [&](const std::vector<size_t>& order, Rng& rng, Mlp& m,
                       AdamState* adam, int epoch) {
    LossRow row;
    row.epoch = epoch;
    for (size_t start = 0; start < order.size(); start += bs) {
      const size_t end = std::min(order.size(), start + bs);
      const FlowBatch b = Gather(
          all, std::span<const size_t>(order.data() + start, end - start));
      const double w = static_cast<double>(end - start);
      if (regression) {
        const GradBundle g = MseGrads(m, b.condition, b.target);
        CheckFinite(g.loss, "inverse training", epoch);
        row.loss_fm += w * g.loss;
        if (adam) AdamStep(m, g, *adam);
      } else {
        const FlowDraws d = DrawFlowNoise(b.size(), rng);
        const ObjectiveValue o =
            FlowObjective(m, b, d, cons ? sur : nullptr, config.lambda_cons,
                          config.estimator, config.unroll_steps);
        CheckFinite(o.loss_total, "inverse training", epoch);
        row.loss_fm += w * o.loss_fm;
        row.loss_cons += w * o.loss_cons;
        if (adam) AdamStep(m, o.grads, *adam);
      }
    }
    const double n = static_cast<double>(order.size());
    row.loss_fm /= n;
    row.loss_cons /= n;
    row.loss_total = row.loss_fm + (cons ? config.lambda_cons : 0.0) * row.loss_cons;
    return row;
  };

  {
    Rng eval_rng(Mix64(config.seed ^ kEpochZeroSalt));
    result.log.push_back(run_epoch(all_idx, eval_rng, net, nullptr, 0));
  }
  AdamState adam = AdamState::For(net, config.lr);
  Rng rng(config.seed);
  std::vector<size_t> order = all_idx;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.Shuffle(std::span<size_t>(order));
    result.log.push_back(run_epoch(order, rng, net, &adam, epoch));
  }

  InverseModel& model = result.model;
  model.variant = variant;
  model.net = std::move(net);
  model.scaler = dataset.scaler;
  model.params = dataset.params;
  model.inference_steps = config.inference_steps;
  if (variant == Variant::kRfPhysical) model.prior_table = dataset.table;
  if (sur) model.surrogate = *sur;
  return result;
}

Eigen::Vector2d IntegrateFlow(const Mlp& net, const Eigen::VectorXd& condition,
                              const Eigen::Vector2d& z, int steps) {
  if (steps < 1) ThrowInvalidArgument("flow integration needs K >= 1");
  if (net.input_dim() != kActuationDim + 1 + condition.size()) {
    ThrowInvalidArgument("IntegrateFlow: condition size does not match net");
  }
  const double h = 1.0 / steps;
  Eigen::VectorXd in(net.input_dim());
  in.tail(condition.size()) = condition;
  Eigen::Vector2d xi = z;
  for (int k = 0; k < steps; ++k) {
    in.head(kActuationDim) = xi;
    in(kActuationDim) = k * h;
    xi += h * Forward(net, in);
  }
  return xi;
}

Eigen::VectorXd QueryCondition(const InverseModel& model, const TaskState& x_t,
                               const TaskState& x_next,
                               const Actuation& u_phys) {
  Eigen::VectorXd c(ConditionDim(model.variant));
  c.head(kStateDim) =
      Transform(x_t.AsVector(), model.scaler.state, Direction::kForward);
  c.segment(kStateDim, kStateDim) =
      Transform(x_next.AsVector(), model.scaler.state, Direction::kForward);
  if (model.variant == Variant::kRfPhysical) {
    c.tail(kActuationDim) =
        Transform(u_phys, model.scaler.actuation, Direction::kForward);
  }
  return c;
}

ControlSample SampleControl(const InverseModel& model, const TaskState& x_t,
                            const TaskState& x_next, const Eigen::Vector2d& z,
                            int steps) {
  if (steps < 1) ThrowInvalidArgument("SampleControl: K must be >= 1");
  ControlSample out;
  if (model.variant == Variant::kRfPhysical) {
    if (!model.prior_table || model.prior_table->empty()) {
      ThrowInvalidArgument("rf-physical sampling requires a prior table");
    }
    const PriorResult prior = PhysicsPrior(x_next.position, *model.prior_table);
    out.u_phys = prior.u;
    out.prior_out_of_range = prior.out_of_range;
  }
  const Eigen::VectorXd cond = QueryCondition(model, x_t, x_next, out.u_phys);
  switch (model.variant) {
    case Variant::kMlpBaseline:
      out.raw = Transform(Forward(model.net, cond), model.scaler.actuation,
                          Direction::kInverse);
      break;
    case Variant::kRf:
    case Variant::kRfFwd:
      out.raw = Transform(IntegrateFlow(model.net, cond, z, steps),
                          model.scaler.actuation, Direction::kInverse);
      break;
    case Variant::kRfPhysical:
      out.residual = Transform(IntegrateFlow(model.net, cond, z, steps),
                               model.scaler.residual, Direction::kInverse);
      out.raw = out.u_phys + out.residual;
      break;
  }
  const double limit = model.params.tension_limit;
  out.u = out.raw.cwiseMax(-limit).cwiseMin(limit);
  out.clamped = out.u != out.raw;
  return out;
}

Eigen::Vector2d StepNoise(uint64_t seed, uint64_t step) {
  return Eigen::Vector2d(CounterNormal(seed, step, 0),
                         CounterNormal(seed, step, 1));
}

void SaveModel(const std::string& path, const InverseModel& model) {
  model.Validate();
  std::vector<Record> records;
  BinaryWriter netw;
  EncodeMlp(model.net, netw);
  records.push_back({kTagNetwork, netw.Take()});
  BinaryWriter sclr;
  EncodeScaler(model.scaler, sclr);
  records.push_back({kTagScaler, sclr.Take()});
  BinaryWriter mnft;
  mnft.U32(kManifestVersion);
  mnft.U32(static_cast<uint32_t>(model.variant));
  mnft.U32(static_cast<uint32_t>(model.inference_steps));
  records.push_back({kTagManifest, mnft.Take()});
  BinaryWriter prms;
  EncodeRodParams(model.params, prms);
  records.push_back({kTagRodParams, prms.Take()});
  if (model.prior_table) {
    BinaryWriter stbl;
    EncodeStaticTable(*model.prior_table, stbl);
    records.push_back({kTagStaticTable, stbl.Take()});
  }
  if (model.surrogate) {
    BinaryWriter surr;
    EncodeMlp(model.surrogate->net, surr);
    EncodeChannels(model.surrogate->delta, surr);
    records.push_back({kTagSurrogate, surr.Take()});
  }
  WriteFileAtomic(path, EncodeContainer(kModelMagic, records));
}

InverseModel LoadModel(const std::string& path) {
  const std::string bytes = ReadFile(path);
  const std::vector<Record> records = DecodeContainer(bytes, kModelMagic, path);
  auto need = [&](uint32_t tag) {
    const auto r = FindRecord(records, tag);
    if (!r) ThrowDataError(path + ": no " + TagName(tag) + " record");
    return *r;
  };
  InverseModel model;
  {
    BinaryReader in(need(kTagManifest), path + " MNFT");
    const uint32_t version = in.U32();
    if (version != kManifestVersion) {
      ThrowDataError(path + ": unsupported manifest version " +
                     std::to_string(version));
    }
    const uint32_t v = in.U32();
    if (v > static_cast<uint32_t>(Variant::kMlpBaseline)) {
      ThrowDataError(path + ": unknown variant id " + std::to_string(v));
    }
    model.variant = static_cast<Variant>(v);
    model.inference_steps = static_cast<int>(in.U32());
  }
  {
    BinaryReader in(need(kTagNetwork), path + " NETW");
    model.net = DecodeMlp(in);
  }
  {
    BinaryReader in(need(kTagScaler), path + " SCLR");
    model.scaler = DecodeScaler(in);
  }
  {
    BinaryReader in(need(kTagRodParams), path + " PRMS");
    model.params = DecodeRodParams(in);
  }
  if (const auto r = FindRecord(records, kTagStaticTable)) {
    BinaryReader in(*r, path + " STBL");
    model.prior_table = DecodeStaticTable(in);
  }
  if (const auto r = FindRecord(records, kTagSurrogate)) {
    BinaryReader in(*r, path + " SURR");
    Surrogate s;
    s.net = DecodeMlp(in);
    s.delta = DecodeChannels(in);
    model.surrogate = std::move(s);
  }
  try {
    model.Validate();
  } catch (const Error& e) {
    ThrowDataError(path + ": " + e.what());
  }
  return model;
}

}  // namespace flowdyn

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

#include "flowdyn/neural.h"

#include <algorithm>
#include <cmath>

#include "flowdyn/atomic_file.h"
#include "flowdyn/error.h"
#include "flowdyn/rng.h"

namespace flowdyn {
namespace {

// Locates flat parameter `index`: returns layer and offset within it, with
// offsets past the weight block addressing the biases.
std::pair<int, size_t> Locate(const std::vector<int>& dims, size_t index) {
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const size_t block = static_cast<size_t>(dims[l + 1]) * (dims[l] + 1);
    if (index < block) return {static_cast<int>(l), index};
    index -= block;
  }
  ThrowInvalidArgument("parameter index out of range");
}

void CheckBatch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim()) {
    ThrowInvalidArgument("network expects input dim " +
                         std::to_string(net.input_dim()) + ", got " +
                         std::to_string(inputs.rows()));
  }
}

}  // namespace

size_t Mlp::ParameterCount() const {
  size_t count = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    count += static_cast<size_t>(dims[l + 1]) * (dims[l] + 1);
  }
  return count;
}

double Mlp::Parameter(size_t index) const {
  const auto [l, offset] = Locate(dims, index);
  const size_t w = weights[l].size();
  return offset < w ? weights[l].data()[offset] : biases[l](offset - w);
}

void Mlp::SetParameter(size_t index, double value) {
  const auto [l, offset] = Locate(dims, index);
  const size_t w = weights[l].size();
  if (offset < w) {
    weights[l].data()[offset] = value;
  } else {
    biases[l](offset - w) = value;
  }
}

Mlp MlpInit(std::span<const int> dims, uint64_t seed) {
  if (dims.size() < 2) ThrowInvalidArgument("MlpInit: need at least 2 dims");
  for (int d : dims) {
    if (d <= 0) ThrowInvalidArgument("MlpInit: zero-width layer");
  }
  Mlp net;
  net.dims.assign(dims.begin(), dims.end());
  Rng rng(seed);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / dims[l]);
    RowMatrix w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = rng.Uniform(-bound, bound);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  return net;
}

ForwardCache ForwardTrace(const Mlp& net, const Eigen::MatrixXd& inputs) {
  CheckBatch(net, inputs);
  ForwardCache cache;
  cache.activations.reserve(net.num_layers() + 1);
  cache.activations.push_back(inputs);
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * cache.activations.back();
    z.colwise() += net.biases[l];
    if (l + 1 < net.num_layers()) z = z.cwiseMax(0.0);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

Eigen::MatrixXd ForwardBatch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  CheckBatch(net, inputs);
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    if (l + 1 < net.num_layers()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd Forward(const Mlp& net, const Eigen::VectorXd& input) {
  return ForwardBatch(net, input);
}

GradBundle GradBundle::ZerosLike(const Mlp& net) {
  GradBundle g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(
        RowMatrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

double GradBundle::Gradient(size_t index) const {
  for (size_t l = 0; l < weights.size(); ++l) {
    const size_t w = weights[l].size();
    const size_t block = w + biases[l].size();
    if (index < block) {
      return index < w ? weights[l].data()[index] : biases[l](index - w);
    }
    index -= block;
  }
  ThrowInvalidArgument("gradient index out of range");
}

void GradBundle::AddScaled(const GradBundle& other, double scale) {
  if (other.weights.size() != weights.size()) {
    ThrowInvalidArgument("GradBundle::AddScaled: layer count mismatch");
  }
  for (size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
  loss += scale * other.loss;
}

bool GradBundle::AllFinite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return std::isfinite(loss);
}

Eigen::MatrixXd Backward(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& d_output, GradBundle* grads) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.activations.size()) != layers + 1 ||
      d_output.rows() != net.output_dim() ||
      d_output.cols() != cache.output().cols()) {
    ThrowInvalidArgument("Backward: cache or gradient shape mismatch");
  }
  Eigen::MatrixXd delta = d_output;
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    if (grads) {
      grads->weights[l].noalias() += delta * a_in.transpose();
      grads->biases[l] += delta.rowwise().sum();
    }
    Eigen::MatrixXd back = net.weights[l].transpose() * delta;
    if (l > 0) {
      // ReLU gate: post-activation > 0 iff pre-activation > 0.
      back = (a_in.array() > 0.0).select(back, 0.0);
    }
    delta = std::move(back);
  }
  return delta;
}

GradBundle MseGrads(const Mlp& net, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets) {
  const ForwardCache cache = ForwardTrace(net, inputs);
  if (targets.rows() != net.output_dim() || targets.cols() != inputs.cols()) {
    ThrowInvalidArgument("MseGrads: target shape mismatch");
  }
  const double batch = static_cast<double>(inputs.cols());
  const Eigen::MatrixXd err = cache.output() - targets;
  GradBundle grads = GradBundle::ZerosLike(net);
  grads.loss = err.squaredNorm() / batch;
  Backward(net, cache, (2.0 / batch) * err, &grads);
  return grads;
}

AdamState AdamState::For(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights[l];
    s.m_weights.push_back(RowMatrix::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(RowMatrix::Zero(w.rows(), w.cols()));
    s.m_biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    s.v_biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return s;
}

void AdamStep(Mlp& net, const GradBundle& grads, AdamState& state) {
  const size_t layers = net.weights.size();
  if (grads.weights.size() != layers || state.m_weights.size() != layers) {
    ThrowInvalidArgument("AdamStep: layer count mismatch");
  }
  for (size_t l = 0; l < layers; ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() ||
        grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size()) {
      ThrowInvalidArgument("AdamStep: gradient shape mismatch in layer " +
                           std::to_string(l));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.lr * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + state.eps);
  };
  for (size_t l = 0; l < layers; ++l) {
    update(net.weights[l], grads.weights[l], state.m_weights[l],
           state.v_weights[l]);
    update(net.biases[l], grads.biases[l], state.m_biases[l],
           state.v_biases[l]);
  }
}

double RelativeError(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult FiniteDifferenceCheck(
    const Mlp& net, const GradBundle& analytic,
    const std::function<double(const Mlp&)>& loss, double h) {
  if (!(h > 0.0)) ThrowInvalidArgument("FiniteDifferenceCheck: h must be > 0");
  GradCheckResult result;
  Mlp probe = net;
  const size_t n = net.ParameterCount();
  for (size_t i = 0; i < n; ++i) {
    const double theta = net.Parameter(i);
    probe.SetParameter(i, theta + h);
    const double up = loss(probe);
    probe.SetParameter(i, theta - h);
    const double down = loss(probe);
    probe.SetParameter(i, theta);
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.Gradient(i);
    const double err = RelativeError(a, numeric);
    if (i == 0 || err > result.max_rel_error) {
      result = {err, i, a, numeric};
    }
  }
  return result;
}

GradCheckResult GradCheck(const Mlp& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, double h) {
  const GradBundle analytic = MseGrads(net, inputs, targets);
  return FiniteDifferenceCheck(
      net, analytic,
      [&](const Mlp& m) {
        return (ForwardBatch(m, inputs) - targets).squaredNorm() /
               static_cast<double>(inputs.cols());
      },
      h);
}

void EncodeMlp(const Mlp& net, BinaryWriter& out) {
  out.U64(net.dims.size());
  for (int d : net.dims) out.U64(static_cast<uint64_t>(d));
  for (int l = 0; l < net.num_layers(); ++l) {
    out.F64s({net.weights[l].data(), static_cast<size_t>(net.weights[l].size())});
    out.F64s({net.biases[l].data(), static_cast<size_t>(net.biases[l].size())});
  }
}

Mlp DecodeMlp(BinaryReader& in) {
  const uint64_t count = in.Count(8);
  if (count < 2) ThrowDataError("network: fewer than 2 layer dims");
  Mlp net;
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t d = in.U64();
    if (d == 0 || d > (1u << 20)) {
      ThrowDataError("network: bad layer width " + std::to_string(d));
    }
    net.dims.push_back(static_cast<int>(d));
  }
  for (size_t l = 0; l + 1 < net.dims.size(); ++l) {
    const size_t need = static_cast<size_t>(net.dims[l + 1]) * (net.dims[l] + 1);
    if (in.remaining() < need * 8) {
      ThrowDataError("network: truncated payload for dims (layer " +
                     std::to_string(l) + ")");
    }
    RowMatrix w(net.dims[l + 1], net.dims[l]);
    in.F64s({w.data(), static_cast<size_t>(w.size())});
    Eigen::VectorXd b(net.dims[l + 1]);
    in.F64s({b.data(), static_cast<size_t>(b.size())});
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

void SaveWeights(const std::string& path, const Mlp& net,
                 const Scaler& scaler) {
  BinaryWriter netw;
  EncodeMlp(net, netw);
  BinaryWriter sclr;
  EncodeScaler(scaler, sclr);
  const std::vector<Record> records = {{kTagNetwork, netw.Take()},
                                       {kTagScaler, sclr.Take()}};
  WriteFileAtomic(path, EncodeContainer(kModelMagic, records));
}

WeightsFile LoadWeights(const std::string& path) {
  const std::string bytes = ReadFile(path);
  const std::vector<Record> records =
      DecodeContainer(bytes, kModelMagic, path);
  const auto netw = FindRecord(records, kTagNetwork);
  const auto sclr = FindRecord(records, kTagScaler);
  if (!netw) ThrowDataError(path + ": no NETW record");
  if (!sclr) ThrowDataError(path + ": no SCLR record");
  WeightsFile file;
  BinaryReader nr(*netw, path + " NETW");
  file.net = DecodeMlp(nr);
  if (!nr.AtEnd()) ThrowDataError(path + ": trailing bytes in NETW record");
  BinaryReader sr(*sclr, path + " SCLR");
  file.scaler = DecodeScaler(sr);
  return file;
}

}  // namespace flowdyn

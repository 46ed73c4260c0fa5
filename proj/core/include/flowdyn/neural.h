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

// Dense ReLU networks with exact reverse-mode gradients and Adam. Batches
// are column-major matrices with one sample per column.

#ifndef FLOWDYN_NEURAL_H_
#define FLOWDYN_NEURAL_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowdyn/binary_io.h"
#include "flowdyn/scaler.h"

namespace flowdyn {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ReLU on hidden layers, identity on the output layer.
struct Mlp {
  std::vector<int> dims;
  std::vector<RowMatrix> weights;       // weights[l] is dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;  // biases[l] has dims[l+1] entries

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }

  // Flat parameter order: per layer, weights row-major then biases.
  size_t ParameterCount() const;
  double Parameter(size_t index) const;
  void SetParameter(size_t index, double value);
};

// He-uniform weights in [-sqrt(6 / fan_in), sqrt(6 / fan_in)], zero biases.
Mlp MlpInit(std::span<const int> dims, uint64_t seed);

Eigen::VectorXd Forward(const Mlp& net, const Eigen::VectorXd& input);
Eigen::MatrixXd ForwardBatch(const Mlp& net, const Eigen::MatrixXd& inputs);

// Post-activation values of every layer; activations[0] is the input.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};
ForwardCache ForwardTrace(const Mlp& net, const Eigen::MatrixXd& inputs);

struct GradBundle {
  std::vector<RowMatrix> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;

  static GradBundle ZerosLike(const Mlp& net);
  double Gradient(size_t index) const;  // same flat order as Mlp
  void AddScaled(const GradBundle& other, double scale);
  bool AllFinite() const;
};

// Accumulates parameter gradients for dL/d(output) = d_output into *grads
// and returns dL/d(input).
Eigen::MatrixXd Backward(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& d_output, GradBundle* grads);

// loss = mean over the batch of the squared-error sum per sample.
GradBundle MseGrads(const Mlp& net, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets);

struct AdamState {
  std::vector<RowMatrix> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState For(const Mlp& net, double lr = 1e-3);
};

// Bias-corrected Adam. Throws kInvalidArgument on shape mismatch.
void AdamStep(Mlp& net, const GradBundle& grads, AdamState& state);

struct GradCheckResult {
  double max_rel_error = 0.0;
  size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Denominator floor of the relative error, so parameters with vanishing
// gradient are judged on absolute agreement.
constexpr double kGradCheckFloor = 1e-6;

double RelativeError(double analytic, double numeric);

// Central differences of `loss` against `analytic` for every parameter.
GradCheckResult FiniteDifferenceCheck(
    const Mlp& net, const GradBundle& analytic,
    const std::function<double(const Mlp&)>& loss, double h);

// FiniteDifferenceCheck on the MSE objective.
GradCheckResult GradCheck(const Mlp& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, double h);

// NETW payload: u64 layer count + 1, u64 dims, then per layer row-major
// weights and biases as f64.
void EncodeMlp(const Mlp& net, BinaryWriter& out);
Mlp DecodeMlp(BinaryReader& in);

// FMNN container holding a NETW record followed by the paired SCLR record.
void SaveWeights(const std::string& path, const Mlp& net, const Scaler& scaler);
struct WeightsFile {
  Mlp net;
  Scaler scaler;
};
WeightsFile LoadWeights(const std::string& path);

}  // namespace flowdyn

#endif  // FLOWDYN_NEURAL_H_

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

#ifndef FLOWDYN_SCALER_H_
#define FLOWDYN_SCALER_H_

#include <vector>

#include <Eigen/Core>

#include "flowdyn/binary_io.h"

namespace flowdyn {

constexpr double kStdFloor = 1e-8;

// Per-dimension affine normalization for one channel group.
struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<bool> floored;  // std hit kStdFloor (constant channel)

  int size() const { return static_cast<int>(mean.size()); }
  bool AnyFloored() const;

  static ChannelStats Identity(int dims);
};

// Population mean/std over the columns of `samples` (dims x count).
ChannelStats FitChannels(const Eigen::MatrixXd& samples);

enum class Direction { kForward, kInverse };

// Forward: (x - mean) / std. Inverse: x * std + mean.
// Throws kInvalidArgument on dimension mismatch.
Eigen::VectorXd Transform(const Eigen::VectorXd& x, const ChannelStats& stats,
                          Direction direction);

// Stats for task state (6), actuation (2) and residual (2) channels. Fit on
// training tuples only, then frozen.
struct Scaler {
  ChannelStats state;
  ChannelStats actuation;
  ChannelStats residual;

  static Scaler Identity();
};

void EncodeChannels(const ChannelStats& stats, BinaryWriter& out);
ChannelStats DecodeChannels(BinaryReader& in);

void EncodeScaler(const Scaler& scaler, BinaryWriter& out);
Scaler DecodeScaler(BinaryReader& in);

}  // namespace flowdyn

#endif  // FLOWDYN_SCALER_H_

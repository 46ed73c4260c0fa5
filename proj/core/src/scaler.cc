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

#include "flowdyn/scaler.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowdyn/error.h"

namespace flowdyn {

bool ChannelStats::AnyFloored() const {
  return std::any_of(floored.begin(), floored.end(), [](bool b) { return b; });
}

ChannelStats ChannelStats::Identity(int dims) {
  return ChannelStats{Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims),
                      std::vector<bool>(dims, false)};
}

ChannelStats FitChannels(const Eigen::MatrixXd& samples) {
  const int dims = static_cast<int>(samples.rows());
  const double count = static_cast<double>(samples.cols());
  if (samples.cols() < 1) ThrowInvalidArgument("FitChannels: no samples");
  ChannelStats s;
  s.mean = samples.rowwise().sum() / count;
  s.stddev.resize(dims);
  s.floored.assign(dims, false);
  for (int d = 0; d < dims; ++d) {
    const double var =
        (samples.row(d).array() - s.mean[d]).square().sum() / count;
    double sd = std::sqrt(var);
    if (!(sd >= kStdFloor)) {
      sd = kStdFloor;
      s.floored[d] = true;
    }
    s.stddev[d] = sd;
  }
  return s;
}

Eigen::VectorXd Transform(const Eigen::VectorXd& x, const ChannelStats& stats,
                          Direction direction) {
  if (x.size() != stats.size()) {
    ThrowInvalidArgument("Transform: dimension " + std::to_string(x.size()) +
                         " does not match scaler dimension " +
                         std::to_string(stats.size()));
  }
  if (direction == Direction::kForward) {
    return ((x - stats.mean).array() / stats.stddev.array()).matrix();
  }
  return (x.array() * stats.stddev.array()).matrix() + stats.mean;
}

Scaler Scaler::Identity() {
  return Scaler{ChannelStats::Identity(6), ChannelStats::Identity(2),
                ChannelStats::Identity(2)};
}

void EncodeChannels(const ChannelStats& s, BinaryWriter& out) {
  out.U64(static_cast<uint64_t>(s.size()));
  out.F64s(std::span<const double>(s.mean.data(), s.mean.size()));
  out.F64s(std::span<const double>(s.stddev.data(), s.stddev.size()));
}

ChannelStats DecodeChannels(BinaryReader& in) {
  const uint64_t n = in.Count(16);
  ChannelStats s;
  s.mean.resize(static_cast<Eigen::Index>(n));
  s.stddev.resize(static_cast<Eigen::Index>(n));
  in.F64s(std::span<double>(s.mean.data(), n));
  in.F64s(std::span<double>(s.stddev.data(), n));
  s.floored.resize(n);
  for (uint64_t i = 0; i < n; ++i) s.floored[i] = s.stddev[i] <= kStdFloor;
  return s;
}

void EncodeScaler(const Scaler& scaler, BinaryWriter& out) {
  EncodeChannels(scaler.state, out);
  EncodeChannels(scaler.actuation, out);
  EncodeChannels(scaler.residual, out);
}

Scaler DecodeScaler(BinaryReader& in) {
  Scaler s;
  s.state = DecodeChannels(in);
  s.actuation = DecodeChannels(in);
  s.residual = DecodeChannels(in);
  if (s.state.size() != 6 || s.actuation.size() != 2 ||
      s.residual.size() != 2) {
    ThrowDataError("scaler record has unexpected channel dimensions");
  }
  return s;
}

}  // namespace flowdyn

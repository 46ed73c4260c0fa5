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

// Tabulated forward statics and the quasi-static actuation prior.

#ifndef FLOWDYN_STATIC_TABLE_H_
#define FLOWDYN_STATIC_TABLE_H_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "flowdyn/rod_sim.h"

namespace flowdyn {

// Equilibrium tip positions on a regular resolution x resolution lattice
// over [-u_max, u_max]^2. Index (i, j) holds u = (u1_i, u2_j). Immutable
// after BuildStaticTable.
class StaticTable {
 public:
  StaticTable() = default;
  StaticTable(int resolution, double u_max, uint64_t params_hash,
              std::vector<Eigen::Vector3d> tips);

  int resolution() const { return resolution_; }
  double u_max() const { return u_max_; }
  double spacing() const { return 2.0 * u_max_ / (resolution_ - 1); }
  uint64_t params_hash() const { return params_hash_; }
  bool empty() const { return tips_.empty(); }

  double LatticeValue(int i) const { return -u_max_ + i * spacing(); }
  Actuation LatticeActuation(int i, int j) const {
    return Actuation(LatticeValue(i), LatticeValue(j));
  }
  const Eigen::Vector3d& Tip(int i, int j) const {
    return tips_[static_cast<size_t>(i) * resolution_ + j];
  }
  const std::vector<Eigen::Vector3d>& tips() const { return tips_; }

  // Bilinear interpolation of the tip over u (clamped to the lattice box);
  // optionally returns d tip / d u.
  Eigen::Vector3d Interpolate(const Actuation& u,
                              Eigen::Matrix<double, 3, 2>* jacobian = nullptr)
      const;

  // Largest lateral (xy) distance of any tabulated tip from the rod axis.
  double ReachableRadius() const;
  // Longest lattice edge in tip space; tolerance used for the hull flag.
  double MaxCellExtent() const { return max_cell_extent_; }

 private:
  int resolution_ = 0;
  double u_max_ = 0.0;
  uint64_t params_hash_ = 0;
  std::vector<Eigen::Vector3d> tips_;
  double max_cell_extent_ = 0.0;
};

// Solves StaticEquilibrium at every lattice point over
// [-tension_limit, tension_limit]^2. resolution >= 5. Throws kNumericalFailure
// naming the failing lattice point.
StaticTable BuildStaticTable(const RodParams& params, int resolution);

struct PriorResult {
  Actuation u = Actuation::Zero();
  double residual = 0.0;      // |tip(u) - target| on the interpolated table, m
  bool out_of_range = false;  // target outside the tabulated tip set
};

constexpr int kPriorNewtonSteps = 10;

// h_stat: actuation whose static tip is nearest to target_pos. Nearest
// lattice seed, then Gauss-Newton on the bilinear interpolant. Targets off
// the tabulated set are clamped and flagged, never rejected.
PriorResult PhysicsPrior(const Eigen::Vector3d& target_pos,
                         const StaticTable& table);

struct StaticLiftResult {
  Actuation u = Actuation::Zero();
  Eigen::Vector3d tip = Eigen::Vector3d::Zero();
  bool out_of_range = false;
};

// Places a lateral (x, y) target on the exact static tip surface: finds u
// with tip_xy(StaticEquilibrium(u)) = xy and returns the full tip. Used to
// lift planar reference shapes into the rod's reachable set.
StaticLiftResult LiftToStaticSurface(const Eigen::Vector2d& xy,
                                     const RodParams& params,
                                     const StaticTable& table);

}  // namespace flowdyn

#endif  // FLOWDYN_STATIC_TABLE_H_

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

#include "flowdyn/static_table.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "flowdyn/error.h"

namespace flowdyn {
namespace {

using Eigen::Vector2d;
using Eigen::Vector3d;

Actuation ClampToBox(const Actuation& u, double u_max) {
  return Actuation(std::clamp(u[0], -u_max, u_max),
                   std::clamp(u[1], -u_max, u_max));
}

// Gauss-Newton refinement of |target - tip(u)| restricted to the first
// `dims` tip coordinates, on the bilinear interpolant.
Actuation RefineOnTable(const StaticTable& table, const Vector3d& target,
                        Actuation u, int dims, int steps) {
  auto residual_of = [&](const Actuation& v) {
    return (target - table.Interpolate(v)).head(dims).norm();
  };
  double best = residual_of(u);
  for (int it = 0; it < steps; ++it) {
    Eigen::Matrix<double, 3, 2> jac;
    const Vector3d tip = table.Interpolate(u, &jac);
    const Eigen::VectorXd r = (target - tip).head(dims);
    const Eigen::MatrixXd j = jac.topRows(dims);
    Eigen::Matrix2d normal = j.transpose() * j;
    normal.diagonal().array() += 1e-12 * (normal.trace() + 1e-30);
    Actuation delta = normal.ldlt().solve(j.transpose() * r);
    bool improved = false;
    for (int ls = 0; ls < 8; ++ls) {
      const Actuation trial = ClampToBox(u + delta, table.u_max());
      const double res = residual_of(trial);
      if (res < best) {
        u = trial;
        best = res;
        improved = true;
        break;
      }
      delta *= 0.5;
    }
    if (!improved) break;
  }
  return u;
}

}  // namespace

StaticTable::StaticTable(int resolution, double u_max, uint64_t params_hash,
                         std::vector<Vector3d> tips)
    : resolution_(resolution),
      u_max_(u_max),
      params_hash_(params_hash),
      tips_(std::move(tips)) {
  if (resolution_ < 2 || !(u_max_ > 0.0) ||
      tips_.size() != static_cast<size_t>(resolution_) * resolution_) {
    ThrowInvalidArgument("StaticTable: inconsistent lattice (resolution " +
                         std::to_string(resolution_) + ", " +
                         std::to_string(tips_.size()) + " samples)");
  }
  for (int i = 0; i < resolution_; ++i) {
    for (int j = 0; j < resolution_; ++j) {
      if (i + 1 < resolution_) {
        max_cell_extent_ =
            std::max(max_cell_extent_, (Tip(i + 1, j) - Tip(i, j)).norm());
      }
      if (j + 1 < resolution_) {
        max_cell_extent_ =
            std::max(max_cell_extent_, (Tip(i, j + 1) - Tip(i, j)).norm());
      }
    }
  }
}

Vector3d StaticTable::Interpolate(const Actuation& u,
                                  Eigen::Matrix<double, 3, 2>* jacobian) const {
  const double h = spacing();
  const Actuation c = ClampToBox(u, u_max_);
  const double f1 = (c[0] + u_max_) / h;
  const double f2 = (c[1] + u_max_) / h;
  const int i = std::clamp(static_cast<int>(std::floor(f1)), 0, resolution_ - 2);
  const int j = std::clamp(static_cast<int>(std::floor(f2)), 0, resolution_ - 2);
  const double t1 = f1 - i;
  const double t2 = f2 - j;
  const Vector3d& p00 = Tip(i, j);
  const Vector3d& p10 = Tip(i + 1, j);
  const Vector3d& p01 = Tip(i, j + 1);
  const Vector3d& p11 = Tip(i + 1, j + 1);
  if (jacobian != nullptr) {
    jacobian->col(0) = ((1.0 - t2) * (p10 - p00) + t2 * (p11 - p01)) / h;
    jacobian->col(1) = ((1.0 - t1) * (p01 - p00) + t1 * (p11 - p10)) / h;
  }
  return (1.0 - t1) * (1.0 - t2) * p00 + t1 * (1.0 - t2) * p10 +
         (1.0 - t1) * t2 * p01 + t1 * t2 * p11;
}

double StaticTable::ReachableRadius() const {
  double r = 0.0;
  for (const Vector3d& p : tips_) r = std::max(r, p.head<2>().norm());
  return r;
}

StaticTable BuildStaticTable(const RodParams& params, int resolution) {
  params.Validate();
  if (resolution < 5) {
    ThrowInvalidArgument("BuildStaticTable: resolution must be >= 5, got " +
                         std::to_string(resolution));
  }
  const double u_max = params.tension_limit;
  const double h = 2.0 * u_max / (resolution - 1);
  std::vector<Vector3d> tips(static_cast<size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const Actuation u(-u_max + i * h, -u_max + j * h);
      try {
        tips[static_cast<size_t>(i) * resolution + j] =
            TipState(StaticEquilibrium(u, params), params).position;
      } catch (const Error& e) {
        throw Error(e.code(), "BuildStaticTable: lattice point (" +
                                  std::to_string(i) + ", " + std::to_string(j) +
                                  ") u = (" + std::to_string(u[0]) + ", " +
                                  std::to_string(u[1]) + "): " + e.what());
      }
    }
  }
  return StaticTable(resolution, u_max, params.Hash(), std::move(tips));
}

PriorResult PhysicsPrior(const Vector3d& target_pos, const StaticTable& table) {
  if (table.empty()) ThrowInvalidArgument("PhysicsPrior: empty static table");
  if (!target_pos.allFinite()) {
    ThrowInvalidArgument("PhysicsPrior: non-finite target");
  }
  const int n = table.resolution();
  int best_i = 0;
  int best_j = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d = (table.Tip(i, j) - target_pos).squaredNorm();
      if (d < best) {
        best = d;
        best_i = i;
        best_j = j;
      }
    }
  }
  PriorResult out;
  out.u = RefineOnTable(table, target_pos, table.LatticeActuation(best_i, best_j),
                        3, kPriorNewtonSteps);
  out.residual = (target_pos - table.Interpolate(out.u)).norm();
  out.out_of_range = out.residual > table.MaxCellExtent();
  return out;
}

StaticLiftResult LiftToStaticSurface(const Vector2d& xy,
                                     const RodParams& params,
                                     const StaticTable& table) {
  if (table.empty()) ThrowInvalidArgument("LiftToStaticSurface: empty table");
  const Vector3d target(xy[0], xy[1], 0.0);
  // Inner-branch seed: walk out from the straight rod on the interpolant.
  Actuation u = RefineOnTable(table, target, Actuation::Zero(), 2, 50);

  const double limit = params.tension_limit;
  const double fd = 1e-4 * limit;
  RodState state = SolveStatic(ClampToBox(u, limit), params).state;
  auto tip_at = [&](const Actuation& v, RodState* warm) {
    StaticSolution s = SolveStatic(ClampToBox(v, limit), params, warm);
    if (warm != nullptr) *warm = s.state;
    return TipState(s.state, params).position;
  };
  Vector3d tip = TipState(state, params).position;
  StaticLiftResult out;
  for (int it = 0; it < 30; ++it) {
    const Vector2d f = tip.head<2>() - xy;
    if (f.norm() < 1e-11) break;
    Eigen::Matrix2d jac;
    for (int c = 0; c < 2; ++c) {
      Actuation up = u;
      Actuation dn = u;
      up[c] += fd;
      dn[c] -= fd;
      RodState warm = state;
      const Vector3d tp = tip_at(up, &warm);
      warm = state;
      const Vector3d tm = tip_at(dn, &warm);
      jac.col(c) = (tp - tm).head<2>() / (2.0 * fd);
    }
    Actuation delta = jac.fullPivLu().solve(-f);
    if (!delta.allFinite()) break;
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 10; ++ls) {
      const Actuation trial = ClampToBox(u + step * delta, limit);
      RodState warm = state;
      const Vector3d t = tip_at(trial, &warm);
      if ((t.head<2>() - xy).norm() < f.norm()) {
        u = trial;
        state = warm;
        tip = t;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  out.u = u;
  out.tip = tip;
  out.out_of_range = (tip.head<2>() - xy).norm() > 1e-6 ||
                     std::abs(u[0]) >= limit || std::abs(u[1]) >= limit;
  return out;
}

}  // namespace flowdyn

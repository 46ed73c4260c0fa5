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

// Forward-dynamics plant for a cable-driven elastic rod.
//
// The rod is a clamped chain of n rigid links joined by two-axis torsional
// springs. Rod frame: base at the origin, undeformed axis along +z, so the
// straight tip sits at (0, 0, L). Per joint the first bending coordinate
// rotates about the local y axis and swings the distal chain toward +x; the
// second rotates about the local -x axis and swings it toward +y. Channel u1
// drives the first coordinate of every joint, u2 the second.

#ifndef FLOWDYN_ROD_SIM_H_
#define FLOWDYN_ROD_SIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace flowdyn {

using Actuation = Eigen::Vector2d;
using Vector6d = Eigen::Matrix<double, 6, 1>;

struct RodParams {
  double length = 0.4;            // L, m
  double diameter = 0.004;        // D, m
  double cable_offset = 0.055;    // W, m
  double youngs_modulus = 2e9;    // E, Pa
  double damping = 5e7;           // eta, Pa*s
  double density = 12000.0;       // rho, kg/m^3
  int n_links = 10;
  // Default: hanging cantilever, gravity along the undeformed axis.
  Eigen::Vector3d gravity = Eigen::Vector3d(0.0, 0.0, 9.81);
  double tension_limit = 50.0;    // N, per channel
  int substeps = 10;              // integrator substeps per control step

  // Throws kInvalidArgument on any violated invariant.
  void Validate() const;

  // Stable 64-bit digest of every field, stored in dataset metadata.
  uint64_t Hash() const;

  int dof() const { return 2 * n_links; }
  double SegmentLength() const { return length / n_links; }
  double AreaMoment() const;        // pi D^4 / 64
  double JointStiffness() const;    // E I / segment
  double JointDamping() const;      // eta I / segment
  double LinkMass() const;          // rho A segment
  // Generalized torque on each joint coordinate per newton of tension.
  double TorquePerNewton() const { return cable_offset / n_links; }
};

// Joint coordinates, interleaved per link: [q1_0, q2_0, q1_1, q2_1, ...].
struct RodState {
  Eigen::VectorXd angles;  // rad
  Eigen::VectorXd rates;   // rad/s
};

struct TaskState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // m
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // m/s

  Vector6d AsVector() const;
  static TaskState FromVector(const Vector6d& x);
};

// Straight rod at rest.
RodState RestState(const RodParams& params);

// One control interval of length dt, integrated with params.substeps
// linearly implicit Euler substeps (spring and damper forces implicit,
// inertial and gravity terms explicit, positions from updated rates).
RodState Step(const RodState& state, const Actuation& u,
              const RodParams& params, double dt);

// output[0] = s0, output[k + 1] = Step(output[k], profile[k]).
std::vector<RodState> Simulate(const RodState& s0,
                               std::span<const Actuation> profile,
                               const RodParams& params, double dt);

// Forward kinematics of the chain tip; velocity is J(q) * qdot.
TaskState TipState(const RodState& state, const RodParams& params);

double KineticEnergy(const RodState& state, const RodParams& params);
// Kinetic + elastic + gravitational potential.
double MechanicalEnergy(const RodState& state, const RodParams& params);

// Joint-space equations of motion at a state: M(q) qddot + bias = tau.
struct ChainDynamics {
  Eigen::MatrixXd mass;
  Eigen::VectorXd bias;  // Coriolis/centrifugal minus gravity
};
ChainDynamics ComputeDynamics(const RodState& state, const RodParams& params);

struct StaticSolution {
  RodState state;
  double residual = 0.0;  // max |net joint torque|, N*m
  int iterations = 0;
};

constexpr double kStaticResidualTol = 1e-8;
constexpr int kStaticMaxIterations = 200;

// Damped Newton on the net joint torque, seeded from the straight rod unless
// a seed is given. Throws kNumericalFailure with the final residual when
// the tolerance is not met.
StaticSolution SolveStatic(const Actuation& u, const RodParams& params,
                           const RodState* seed = nullptr);

inline RodState StaticEquilibrium(const Actuation& u, const RodParams& params) {
  return SolveStatic(u, params).state;
}

// Net static joint torque (elastic + gravity + actuation) at q.
Eigen::VectorXd StaticResidual(const Eigen::VectorXd& angles,
                               const Actuation& u, const RodParams& params);

}  // namespace flowdyn

#endif  // FLOWDYN_ROD_SIM_H_

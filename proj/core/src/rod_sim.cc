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

#include "flowdyn/rod_sim.h"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "flowdyn/error.h"

namespace flowdyn {
namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

Matrix3d RotY(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Matrix3d r;
  r << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return r;
}

// Rotation by +angle about -x.
Matrix3d RotNegX(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Matrix3d r;
  r << 1.0, 0.0, 0.0,
       0.0, c, s,
       0.0, -s, c;
  return r;
}

struct Kinematics {
  std::vector<Vector3d> axis;   // world axis per joint coordinate (2n)
  std::vector<Vector3d> joint;  // joint points P_0..P_n, P_n is the tip
  std::vector<Matrix3d> rot;    // link orientations (n)
  std::vector<Vector3d> com;    // link centres of mass (n)
};

Kinematics ForwardKinematics(const VectorXd& q, const RodParams& p) {
  const int n = p.n_links;
  const double seg = p.SegmentLength();
  Kinematics k;
  k.axis.resize(2 * n);
  k.joint.resize(n + 1);
  k.rot.resize(n);
  k.com.resize(n);
  Matrix3d r = Matrix3d::Identity();
  k.joint[0] = Vector3d::Zero();
  for (int j = 0; j < n; ++j) {
    k.axis[2 * j] = r.col(1);
    const Matrix3d r1 = r * RotY(q[2 * j]);
    k.axis[2 * j + 1] = -r1.col(0);
    r = r1 * RotNegX(q[2 * j + 1]);
    k.rot[j] = r;
    k.com[j] = k.joint[j] + r.col(2) * (0.5 * seg);
    k.joint[j + 1] = k.joint[j] + r.col(2) * seg;
  }
  return k;
}

// Principal inertia of a solid cylinder segment about its centre.
Vector3d LinkInertia(const RodParams& p) {
  const double m = p.LinkMass();
  const double r = 0.5 * p.diameter;
  const double seg = p.SegmentLength();
  const double transverse = m * (3.0 * r * r + seg * seg) / 12.0;
  return Vector3d(transverse, transverse, 0.5 * m * r * r);
}

// Per-link angular velocity/bias acceleration and centre-of-mass
// velocity/bias acceleration for given joint rates (qddot = 0).
struct LinkMotion {
  std::vector<Vector3d> omega;
  std::vector<Vector3d> alpha;
  std::vector<Vector3d> com_vel;
  std::vector<Vector3d> com_acc;
  Vector3d tip_vel;
};

LinkMotion ComputeMotion(const Kinematics& k, const VectorXd& qd, int n) {
  LinkMotion m;
  m.omega.resize(n);
  m.alpha.resize(n);
  m.com_vel.resize(n);
  m.com_acc.resize(n);
  Vector3d omega = Vector3d::Zero();
  Vector3d alpha = Vector3d::Zero();
  Vector3d pv = Vector3d::Zero();
  Vector3d pa = Vector3d::Zero();
  for (int j = 0; j < n; ++j) {
    for (int c = 2 * j; c < 2 * j + 2; ++c) {
      alpha += omega.cross(k.axis[c]) * qd[c];
      omega += k.axis[c] * qd[c];
    }
    m.omega[j] = omega;
    m.alpha[j] = alpha;
    const Vector3d rc = k.com[j] - k.joint[j];
    m.com_vel[j] = pv + omega.cross(rc);
    m.com_acc[j] = pa + alpha.cross(rc) + omega.cross(omega.cross(rc));
    const Vector3d r = k.joint[j + 1] - k.joint[j];
    pa += alpha.cross(r) + omega.cross(omega.cross(r));
    pv += omega.cross(r);
  }
  m.tip_vel = pv;
  return m;
}

VectorXd ActuationTorque(const Actuation& u, const RodParams& p) {
  VectorXd tau(p.dof());
  const double gain = p.TorquePerNewton();
  for (int j = 0; j < p.n_links; ++j) {
    tau[2 * j] = u[0] * gain;
    tau[2 * j + 1] = u[1] * gain;
  }
  return tau;
}

bool AllFinite(const VectorXd& v) { return v.array().isFinite().all(); }

void CheckState(const RodState& s, const RodParams& p, const char* where) {
  if (s.angles.size() != p.dof() || s.rates.size() != p.dof()) {
    ThrowInvalidArgument(std::string(where) + ": state dimension " +
                         std::to_string(s.angles.size()) + "/" +
                         std::to_string(s.rates.size()) + " does not match " +
                         std::to_string(p.dof()) + " joint coordinates");
  }
  if (!AllFinite(s.angles) || !AllFinite(s.rates)) {
    ThrowInvalidArgument(std::string(where) + ": non-finite rod state");
  }
}

void CheckActuation(const Actuation& u, const RodParams& p, const char* where) {
  if (!u.allFinite()) {
    ThrowInvalidArgument(std::string(where) + ": non-finite actuation");
  }
  const double limit = p.tension_limit * (1.0 + 1e-12);
  if (std::abs(u[0]) > limit || std::abs(u[1]) > limit) {
    ThrowInvalidArgument(std::string(where) + ": actuation (" +
                         std::to_string(u[0]) + ", " + std::to_string(u[1]) +
                         ") exceeds tension limit " +
                         std::to_string(p.tension_limit));
  }
}

// Generalized gravity force sum_j J_j^T m g.
VectorXd GravityForce(const Kinematics& k, const RodParams& p) {
  const int n = p.n_links;
  const Vector3d weight = p.LinkMass() * p.gravity;
  VectorXd g = VectorXd::Zero(p.dof());
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < 2 * j + 2; ++c) {
      g[c] += k.axis[c].cross(k.com[j] - k.joint[c / 2]).dot(weight);
    }
  }
  return g;
}

// d(gravity force)/dq; symmetric.
MatrixXd GravityForceJacobian(const Kinematics& k, const RodParams& p) {
  const int n = p.n_links;
  const Vector3d weight = p.LinkMass() * p.gravity;
  MatrixXd d = MatrixXd::Zero(p.dof(), p.dof());
  for (int j = 0; j < n; ++j) {
    for (int hi = 0; hi < 2 * j + 2; ++hi) {
      const Vector3d w = k.axis[hi].cross(k.com[j] - k.joint[hi / 2]);
      const Vector3d wg = w.cross(weight);
      for (int lo = 0; lo <= hi; ++lo) {
        const double v = k.axis[lo].dot(wg);
        d(lo, hi) += v;
        if (lo != hi) d(hi, lo) += v;
      }
    }
  }
  return d;
}

}  // namespace

double RodParams::AreaMoment() const {
  return std::numbers::pi * std::pow(diameter, 4) / 64.0;
}

double RodParams::JointStiffness() const {
  return youngs_modulus * AreaMoment() / SegmentLength();
}

double RodParams::JointDamping() const {
  return damping * AreaMoment() / SegmentLength();
}

double RodParams::LinkMass() const {
  return density * std::numbers::pi * 0.25 * diameter * diameter *
         SegmentLength();
}

void RodParams::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) ThrowInvalidArgument(std::string("RodParams: ") + what);
  };
  require(std::isfinite(length) && length > 0.0, "length must be > 0");
  require(std::isfinite(diameter) && diameter > 0.0, "diameter must be > 0");
  require(std::isfinite(cable_offset) && cable_offset > 0.0,
          "cable_offset must be > 0");
  require(std::isfinite(youngs_modulus) && youngs_modulus > 0.0,
          "youngs_modulus must be > 0");
  require(std::isfinite(damping) && damping >= 0.0, "damping must be >= 0");
  require(std::isfinite(density) && density > 0.0, "density must be > 0");
  require(n_links >= 2, "n_links must be >= 2");
  require(gravity.allFinite(), "gravity must be finite");
  require(std::isfinite(tension_limit) && tension_limit > 0.0,
          "tension_limit must be > 0");
  require(substeps >= 1, "substeps must be >= 1");
}

uint64_t RodParams::Hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (double v : {length, diameter, cable_offset, youngs_modulus, damping,
                   density, gravity[0], gravity[1], gravity[2],
                   tension_limit}) {
    mix(std::bit_cast<uint64_t>(v));
  }
  mix(static_cast<uint64_t>(n_links));
  mix(static_cast<uint64_t>(substeps));
  return h;
}

Vector6d TaskState::AsVector() const {
  Vector6d x;
  x << position, velocity;
  return x;
}

TaskState TaskState::FromVector(const Vector6d& x) {
  TaskState s;
  s.position = x.head<3>();
  s.velocity = x.tail<3>();
  return s;
}

RodState RestState(const RodParams& params) {
  return RodState{VectorXd::Zero(params.dof()), VectorXd::Zero(params.dof())};
}

ChainDynamics ComputeDynamics(const RodState& state, const RodParams& p) {
  const int n = p.n_links;
  const int dof = p.dof();
  const Kinematics k = ForwardKinematics(state.angles, p);
  const LinkMotion motion = ComputeMotion(k, state.rates, n);
  const double m = p.LinkMass();
  const Vector3d inertia = LinkInertia(p);

  ChainDynamics out{MatrixXd::Zero(dof, dof), VectorXd::Zero(dof)};
  Eigen::Matrix<double, 3, Eigen::Dynamic> jv(3, dof);
  Eigen::Matrix<double, 3, Eigen::Dynamic> jw(3, dof);
  for (int j = 0; j < n; ++j) {
    const int nc = 2 * j + 2;
    for (int c = 0; c < nc; ++c) {
      jv.col(c) = k.axis[c].cross(k.com[j] - k.joint[c / 2]);
      jw.col(c) = k.axis[c];
    }
    const Matrix3d iw = k.rot[j] * inertia.asDiagonal() * k.rot[j].transpose();
    const auto jv_c = jv.leftCols(nc);
    const auto jw_c = jw.leftCols(nc);
    out.mass.topLeftCorner(nc, nc).noalias() +=
        m * (jv_c.transpose() * jv_c);
    out.mass.topLeftCorner(nc, nc).noalias() +=
        jw_c.transpose() * (iw * jw_c);

    const Vector3d force = m * (motion.com_acc[j] - p.gravity);
    const Vector3d moment =
        iw * motion.alpha[j] + motion.omega[j].cross(iw * motion.omega[j]);
    out.bias.head(nc).noalias() += jv_c.transpose() * force;
    out.bias.head(nc).noalias() += jw_c.transpose() * moment;
  }
  return out;
}

RodState Step(const RodState& state, const Actuation& u,
              const RodParams& params, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    ThrowInvalidArgument("Step: dt must be finite and > 0, got " +
                         std::to_string(dt));
  }
  CheckState(state, params, "Step");
  CheckActuation(u, params, "Step");

  const double h = dt / params.substeps;
  const double k = params.JointStiffness();
  const double c = params.JointDamping();
  const VectorXd tau = ActuationTorque(u, params);

  RodState s = state;
  for (int i = 0; i < params.substeps; ++i) {
    const ChainDynamics dyn = ComputeDynamics(s, params);
    MatrixXd lhs = dyn.mass;
    lhs.diagonal().array() += h * c + h * h * k;
    const VectorXd rhs =
        dyn.mass * s.rates + h * (tau - k * s.angles - dyn.bias);
    Eigen::LLT<MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success) {
      ThrowNumericalFailure("Step: iteration matrix is not positive definite");
    }
    s.rates = llt.solve(rhs);
    s.angles += h * s.rates;
  }
  if (!AllFinite(s.angles) || !AllFinite(s.rates)) {
    ThrowNumericalFailure("Step: integration produced non-finite state");
  }
  return s;
}

std::vector<RodState> Simulate(const RodState& s0,
                               std::span<const Actuation> profile,
                               const RodParams& params, double dt) {
  if (profile.empty()) ThrowInvalidArgument("Simulate: empty profile");
  std::vector<RodState> out;
  out.reserve(profile.size() + 1);
  out.push_back(s0);
  for (size_t i = 0; i < profile.size(); ++i) {
    try {
      out.push_back(Step(out.back(), profile[i], params, dt));
    } catch (const Error& e) {
      throw Error(e.code(), "Simulate: step " + std::to_string(i) + ": " +
                                e.what());
    }
  }
  return out;
}

TaskState TipState(const RodState& state, const RodParams& params) {
  if (state.angles.size() != params.dof() ||
      state.rates.size() != params.dof()) {
    ThrowInvalidArgument("TipState: state dimension does not match params");
  }
  const Kinematics k = ForwardKinematics(state.angles, params);
  const LinkMotion motion = ComputeMotion(k, state.rates, params.n_links);
  TaskState tip;
  tip.position = k.joint.back();
  tip.velocity = motion.tip_vel;
  return tip;
}

double KineticEnergy(const RodState& state, const RodParams& params) {
  const Kinematics k = ForwardKinematics(state.angles, params);
  const LinkMotion motion = ComputeMotion(k, state.rates, params.n_links);
  const double m = params.LinkMass();
  const Vector3d inertia = LinkInertia(params);
  double t = 0.0;
  for (int j = 0; j < params.n_links; ++j) {
    const Vector3d w_body = k.rot[j].transpose() * motion.omega[j];
    t += 0.5 * m * motion.com_vel[j].squaredNorm() +
         0.5 * w_body.dot(inertia.cwiseProduct(w_body));
  }
  return t;
}

double MechanicalEnergy(const RodState& state, const RodParams& params) {
  const Kinematics k = ForwardKinematics(state.angles, params);
  double potential = 0.5 * params.JointStiffness() * state.angles.squaredNorm();
  for (const Vector3d& c : k.com) {
    potential -= params.LinkMass() * params.gravity.dot(c);
  }
  return KineticEnergy(state, params) + potential;
}

VectorXd StaticResidual(const VectorXd& angles, const Actuation& u,
                        const RodParams& params) {
  const Kinematics k = ForwardKinematics(angles, params);
  return params.JointStiffness() * angles - ActuationTorque(u, params) -
         GravityForce(k, params);
}

StaticSolution SolveStatic(const Actuation& u, const RodParams& params,
                           const RodState* seed) {
  params.Validate();
  CheckActuation(u, params, "SolveStatic");
  VectorXd q = VectorXd::Zero(params.dof());
  if (seed != nullptr) {
    CheckState(*seed, params, "SolveStatic");
    q = seed->angles;
  }
  const double stiffness = params.JointStiffness();
  VectorXd r = StaticResidual(q, u, params);
  double merit = r.squaredNorm();
  StaticSolution sol;
  for (int it = 0; it < kStaticMaxIterations; ++it) {
    const double res = r.cwiseAbs().maxCoeff();
    if (res < kStaticResidualTol) {
      sol.state = RodState{q, VectorXd::Zero(params.dof())};
      sol.residual = res;
      sol.iterations = it;
      return sol;
    }
    const Kinematics k = ForwardKinematics(q, params);
    MatrixXd hessian = -GravityForceJacobian(k, params);
    hessian.diagonal().array() += stiffness;
    Eigen::LDLT<MatrixXd> ldlt(hessian);
    VectorXd dq = ldlt.solve(-r);
    if (ldlt.info() != Eigen::Success || !AllFinite(dq)) {
      dq = -r / stiffness;
    }
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const VectorXd q_try = q + step * dq;
      const VectorXd r_try = StaticResidual(q_try, u, params);
      const double m_try = r_try.squaredNorm();
      if (std::isfinite(m_try) && m_try < merit) {
        q = q_try;
        r = r_try;
        merit = m_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  ThrowNumericalFailure(
      "SolveStatic: no convergence for u = (" + std::to_string(u[0]) + ", " +
      std::to_string(u[1]) + "), final residual " +
      std::to_string(r.cwiseAbs().maxCoeff()) + " N*m");
}

}  // namespace flowdyn

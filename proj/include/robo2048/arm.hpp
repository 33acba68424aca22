// Copyright 2026 The robo2048 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robo2048/game.hpp"
#include "robo2048/lqr.hpp"

namespace robo2048::arm {

using Eigen::Vector3d;
using Eigen::VectorXd;

inline constexpr int kJoints = 7;
inline constexpr int kSteps = 250;               // 3 s at 12 ms
inline constexpr double kDuration = 3.0;
inline constexpr double kDt = kDuration / kSteps;
inline constexpr double kMaxDelta = 0.02;        // rad per step
inline constexpr double kJointLimit = std::numbers::pi;

/// Link lengths in meters. Link 0 rises along the base z axis; every other
/// link extends along the local x axis of its joint frame.
inline constexpr std::array<double, kJoints> kLinkLengths{0.27, 0.07, 0.36, 0.07, 0.37, 0.01, 0.28};

/// Even joints rotate about local z, odd joints about local y.
inline constexpr bool joint_is_yaw(int j) { return j % 2 == 0; }

/// Pose the swipes start from: shoulder, elbow and wrist pitched down, all
/// yaw joints at zero so the arm is symmetric about the x-z plane.
inline VectorXd home_pose() {
  VectorXd q = VectorXd::Zero(kJoints);
  q << 0.0, 0.4, 0.0, 0.8, 0.0, 0.6, 0.0;
  return q;
}

inline Eigen::Matrix3d joint_rotation(int j, double theta) {
  const Vector3d axis = joint_is_yaw(j) ? Vector3d::UnitZ() : Vector3d::UnitY();
  return Eigen::AngleAxisd(theta, axis).toRotationMatrix();
}

/// End-effector position of the serial chain
///   T = prod_j Rot_j(theta_j) * Trans_j(link_j).
inline Vector3d forward_kinematics(const VectorXd& q) {
  if (q.size() != kJoints) throw std::invalid_argument("forward_kinematics: expected 7 joint angles");
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Vector3d p = Vector3d::Zero();
  for (int j = 0; j < kJoints; ++j) {
    R = R * joint_rotation(j, q(j));
    const Vector3d link = (j == 0 ? Vector3d::UnitZ() : Vector3d::UnitX()) * kLinkLengths[j];
    p += R * link;
  }
  return p;
}

inline double total_reach() {
  double s = 0;
  for (double l : kLinkLengths) s += l;
  return s;
}

/// 3x7 position Jacobian by central differences.
inline Eigen::Matrix<double, 3, Eigen::Dynamic> position_jacobian(const VectorXd& q, double h = 1e-7) {
  Eigen::Matrix<double, 3, Eigen::Dynamic> J(3, kJoints);
  for (int j = 0; j < kJoints; ++j) {
    VectorXd qp = q, qm = q;
    qp(j) += h;
    qm(j) -= h;
    J.col(j) = (forward_kinematics(qp) - forward_kinematics(qm)) / (2 * h);
  }
  return J;
}

struct IkOptions {
  double damping = 1e-3;
  double tolerance = 1e-12;  // meters
  int max_iterations = 500;
};

/// Damped least-squares inverse kinematics started from `seed`.
inline VectorXd inverse_kinematics(const Vector3d& target, const VectorXd& seed, const IkOptions& opt = {}) {
  VectorXd q = seed;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vector3d err = target - forward_kinematics(q);
    if (err.norm() < opt.tolerance) return q;
    const auto J = position_jacobian(q);
    const Eigen::Matrix3d JJt = J * J.transpose() + opt.damping * opt.damping * Eigen::Matrix3d::Identity();
    q += J.transpose() * JJt.ldlt().solve(err);
  }
  if ((target - forward_kinematics(q)).norm() > 1e-9)
    throw std::runtime_error("inverse_kinematics: target not reached");
  return q;
}

/// Joint-space integrator x' = clamp(x + clamp(u, +-kMaxDelta), +-pi).
inline VectorXd arm_step(const VectorXd& x, const VectorXd& u) {
  return (x + u.cwiseMax(-kMaxDelta).cwiseMin(kMaxDelta)).cwiseMax(-kJointLimit).cwiseMin(kJointLimit);
}

inline lqr::Dynamics arm_dynamics() { return arm_step; }

// ---------------------------------------------------------------------------
// Swipes

enum class SwipeDirection { Left, Right, Backward, Forward };

inline constexpr std::array<SwipeDirection, 4> kAllSwipes{SwipeDirection::Left, SwipeDirection::Right,
                                                          SwipeDirection::Backward, SwipeDirection::Forward};

inline const char* swipe_name(SwipeDirection d) {
  switch (d) {
    case SwipeDirection::Left: return "left";
    case SwipeDirection::Right: return "right";
    case SwipeDirection::Backward: return "backward";
    case SwipeDirection::Forward: return "forward";
  }
  return "?";
}

/// Up swipes away from the robot, Down toward it.
inline SwipeDirection swipe_for(game::Action a) {
  switch (a) {
    case game::Action::Up: return SwipeDirection::Forward;
    case game::Action::Down: return SwipeDirection::Backward;
    case game::Action::Left: return SwipeDirection::Left;
    case game::Action::Right: return SwipeDirection::Right;
  }
  throw std::invalid_argument("swipe_for: bad action");
}

/// Unit swipe direction in the device plane.
inline Vector3d swipe_vector(SwipeDirection d) {
  switch (d) {
    case SwipeDirection::Left: return Vector3d::UnitY();
    case SwipeDirection::Right: return -Vector3d::UnitY();
    case SwipeDirection::Backward: return -Vector3d::UnitX();
    case SwipeDirection::Forward: return Vector3d::UnitX();
  }
  throw std::invalid_argument("swipe_vector: bad direction");
}

inline constexpr double kSurfaceDrop = 0.1;   // device plane below the home end-effector
inline constexpr double kSwipeTravel = 0.06;  // touch-down to swipe end
inline constexpr double kLiftHeight = 0.05;   // final lift-off above the plane
inline constexpr std::array<int, 5> kWaypointSteps{0, 62, 125, 187, 250};

struct WaypointSpec {
  SwipeDirection direction = SwipeDirection::Left;
  std::array<Vector3d, 5> points;
  std::array<int, 5> steps = kWaypointSteps;
  double surface_z = 0;
};

/// Start at home, touch down half a travel before the centre, swipe through
/// the centre to the end, then lift off.
inline WaypointSpec make_waypoint_spec(SwipeDirection d) {
  WaypointSpec s;
  s.direction = d;
  const Vector3d home = forward_kinematics(home_pose());
  s.surface_z = home.z() - kSurfaceDrop;
  const Vector3d center(home.x(), home.y(), s.surface_z);
  const Vector3d v = swipe_vector(d);
  s.points[0] = home;
  s.points[1] = center - 0.5 * kSwipeTravel * v;
  s.points[2] = center;
  s.points[3] = center + 0.5 * kSwipeTravel * v;
  s.points[4] = s.points[3] + Vector3d(0, 0, kLiftHeight);
  return s;
}

/// Piecewise-linear Cartesian path through the waypoints, one point per step.
inline std::vector<Vector3d> expected_path(const WaypointSpec& s) {
  std::vector<Vector3d> path(kSteps + 1);
  for (int k = 0; k + 1 < 5; ++k) {
    const int t0 = s.steps[k], t1 = s.steps[k + 1];
    for (int t = t0; t <= t1; ++t) {
      const double a = double(t - t0) / double(t1 - t0);
      path[t] = (1 - a) * s.points[k] + a * s.points[k + 1];
    }
  }
  return path;
}

/// Joint-space reference: IK of the expected path, each step seeded by the
/// previous solution, starting from the home pose.
inline std::vector<VectorXd> joint_reference(const WaypointSpec& s) {
  const auto path = expected_path(s);
  std::vector<VectorXd> ref(path.size());
  ref[0] = home_pose();
  for (std::size_t t = 1; t < path.size(); ++t) ref[t] = inverse_kinematics(path[t], ref[t - 1]);
  return ref;
}

struct SwipeCostWeights {
  double state = 100.0;    // Q = state * I on every step after the first
  double terminal = 100.0; // Q_N
  double control = 1.0;    // R = control * I
};

inline lqr::TrackingCost make_tracking_cost(std::vector<VectorXd> reference, const SwipeCostWeights& w) {
  lqr::TrackingCost c;
  const std::size_t n = reference.size();
  c.reference = std::move(reference);
  c.state_weight.assign(n, w.state);
  c.state_weight[0] = 0;
  c.state_weight[n - 1] = w.terminal;
  c.control_weight = w.control * Eigen::MatrixXd::Identity(kJoints, kJoints);
  return c;
}

/// Quadratic deviation from the waypoint-interpolated joint targets plus
/// the control cost of the trajectory.
inline double waypoint_cost(const lqr::Trajectory& tr, const WaypointSpec& spec, const SwipeCostWeights& w = {}) {
  return make_tracking_cost(joint_reference(spec), w)(tr);
}

struct Swipe {
  WaypointSpec spec;
  std::vector<VectorXd> reference;
  lqr::Trajectory trajectory;
  lqr::IlqrResult result;

  /// Max-abs joint error at each waypoint step.
  std::array<double, 5> waypoint_residuals() const {
    std::array<double, 5> r{};
    for (int k = 0; k < 5; ++k) {
      const int t = spec.steps[k];
      r[k] = (trajectory.states[t] - reference[t]).cwiseAbs().maxCoeff();
    }
    return r;
  }
};

inline lqr::Trajectory hold_trajectory(const VectorXd& x0, int steps = kSteps) {
  lqr::Trajectory tr;
  tr.states.assign(steps + 1, x0);
  tr.controls.assign(steps, VectorXd::Zero(x0.size()));
  return tr;
}

/// Optimizes the swipe for `d` from a stationary start at the home pose.
inline Swipe swipe_trajectory(SwipeDirection d, const SwipeCostWeights& w = {}, const lqr::IlqrOptions& opt = {}) {
  Swipe s;
  s.spec = make_waypoint_spec(d);
  s.reference = joint_reference(s.spec);
  const auto cost = make_tracking_cost(s.reference, w);
  s.result = lqr::ilqr_optimize(arm_dynamics(), cost, hold_trajectory(home_pose()), opt);
  s.trajectory = s.result.trajectory;
  return s;
}

struct ContactPoint {
  int t = 0;
  Vector3d position;
};

/// Steps whose end-effector height is within `tol` of the surface plane.
inline std::vector<ContactPoint> contact_points(const lqr::Trajectory& tr, double surface_z, double tol = 1e-3) {
  std::vector<ContactPoint> out;
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    const Vector3d p = forward_kinematics(tr.states[t]);
    if (std::abs(p.z() - surface_z) <= tol) out.push_back({static_cast<int>(t), p});
  }
  return out;
}

/// True when the contact steps form one run with no gaps.
inline bool is_contiguous(const std::vector<ContactPoint>& c) {
  for (std::size_t i = 1; i < c.size(); ++i)
    if (c[i].t != c[i - 1].t + 1) return false;
  return !c.empty();
}

/// CSV: t, theta0..6, u0..6, ee_x, ee_y, ee_z, contact. The last row has zero controls.
inline void write_trajectory_csv(std::ostream& os, const lqr::Trajectory& tr, double surface_z) {
  os << "# robo2048 trajectory v1\n";
  os << "t";
  for (int j = 0; j < kJoints; ++j) os << ",theta" << j;
  for (int j = 0; j < kJoints; ++j) os << ",u" << j;
  os << ",ee_x,ee_y,ee_z,contact\n";
  os.precision(17);
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    os << t;
    for (int j = 0; j < kJoints; ++j) os << ',' << tr.states[t](j);
    for (int j = 0; j < kJoints; ++j) os << ',' << (t < tr.controls.size() ? tr.controls[t](j) : 0.0);
    const Vector3d p = forward_kinematics(tr.states[t]);
    os << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << (std::abs(p.z() - surface_z) <= 1e-3 ? 1 : 0)
       << '\n';
  }
}

}  // namespace robo2048::arm

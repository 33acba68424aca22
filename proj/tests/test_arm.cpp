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

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "robo2048/arm.hpp"

using namespace robo2048;
using namespace robo2048::arm;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Written-out chain: even joints yaw about local z, odd joints pitch about
// local y; the first link points along z, the rest along local x.
std::array<double, 3> reference_fk(const VectorXd& q) {
  const double L[7] = {0.27, 0.07, 0.36, 0.07, 0.37, 0.01, 0.28};
  Mat3 R{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<double, 3> p{0, 0, 0};
  for (int j = 0; j < 7; ++j) {
    const double c = std::cos(q(j)), s = std::sin(q(j));
    const Mat3 J = j % 2 == 0 ? Mat3{{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}} : Mat3{{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
    R = mul(R, J);
    const int axis = j == 0 ? 2 : 0;
    for (int i = 0; i < 3; ++i) p[i] += R[i][axis] * L[j];
  }
  return p;
}

VectorXd random_pose(Rng& rng) {
  VectorXd q(kJoints);
  for (int j = 0; j < kJoints; ++j) q(j) = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return q;
}

const std::vector<Swipe>& all_swipes() {
  static const std::vector<Swipe> s = [] {
    std::vector<Swipe> v;
    for (auto d : kAllSwipes) v.push_back(swipe_trajectory(d));
    return v;
  }();
  return s;
}

}  // namespace

TEST(Arm, ZeroPoseReach) {
  const Vector3d p = forward_kinematics(VectorXd::Zero(kJoints));
  EXPECT_NEAR(p.x(), 0.07 + 0.36 + 0.07 + 0.37 + 0.01 + 0.28, 1e-15);
  EXPECT_NEAR(p.y(), 0.0, 1e-15);
  EXPECT_NEAR(p.z(), 0.27, 1e-15);
  EXPECT_NEAR(total_reach(), 1.43, 1e-12);
}

TEST(ArmProperty, MatchesWrittenOutChain) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const VectorXd q = random_pose(rng);
    const auto want = reference_fk(q);
    const Vector3d got = forward_kinematics(q);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(got(k), want[k], 1e-12);
  }
}

TEST(ArmProperty, BaseYawByPiFlipsXY) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    VectorXd q = random_pose(rng);
    const Vector3d a = forward_kinematics(q);
    q(0) += std::numbers::pi;
    const Vector3d b = forward_kinematics(q);
    EXPECT_NEAR(b.x(), -a.x(), 1e-12);
    EXPECT_NEAR(b.y(), -a.y(), 1e-12);
    EXPECT_NEAR(b.z(), a.z(), 1e-12);
  }
}

TEST(ArmProperty, Lipschitz) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const VectorXd q = random_pose(rng);
    VectorXd dq(kJoints);
    for (int j = 0; j < kJoints; ++j) dq(j) = rng.uniform(-0.1, 0.1);
    const double moved = (forward_kinematics(q + dq) - forward_kinematics(q)).norm();
    EXPECT_LE(moved, total_reach() * dq.norm() + 1e-12);
  }
}

TEST(Arm, DynamicsClampAndLinearize) {
  VectorXd x = VectorXd::Zero(kJoints);
  x(0) = kJointLimit - 0.001;
  VectorXd u = VectorXd::Constant(kJoints, 0.5);
  const VectorXd y = arm_step(x, u);
  EXPECT_DOUBLE_EQ(y(0), kJointLimit);
  EXPECT_DOUBLE_EQ(y(1), kMaxDelta);
  // away from limits the step is an exact integrator
  lqr::Trajectory nom = hold_trajectory(home_pose(), 3);
  const auto lin = lqr::linearize(arm_dynamics(), nom);
  for (int t = 0; t < 3; ++t) {
    EXPECT_LT((lin.A[t] - Eigen::MatrixXd::Identity(kJoints, kJoints)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((lin.B[t] - Eigen::MatrixXd::Identity(kJoints, kJoints)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Arm, InverseKinematicsReachesTarget) {
  const Vector3d home = forward_kinematics(home_pose());
  const Vector3d target = home + Vector3d(0.03, -0.02, -0.08);
  const VectorXd q = inverse_kinematics(target, home_pose());
  EXPECT_LT((forward_kinematics(q) - target).norm(), 1e-9);
}

TEST(Arm, SwipeMapping) {
  EXPECT_EQ(swipe_for(game::Action::Up), SwipeDirection::Forward);
  EXPECT_EQ(swipe_for(game::Action::Down), SwipeDirection::Backward);
  EXPECT_EQ(swipe_for(game::Action::Left), SwipeDirection::Left);
  EXPECT_EQ(swipe_for(game::Action::Right), SwipeDirection::Right);
}

TEST(Arm, WaypointGeometry) {
  const Vector3d home = forward_kinematics(home_pose());
  for (auto d : kAllSwipes) {
    const auto s = make_waypoint_spec(d);
    EXPECT_NEAR(s.surface_z, home.z() - 0.1, 1e-15);
    EXPECT_EQ(s.steps, (std::array<int, 5>{0, 62, 125, 187, 250}));
    EXPECT_GT(s.points[0].z(), s.surface_z + 1e-3);
    EXPECT_GT(s.points[4].z(), s.surface_z + 1e-3);
    for (int k = 1; k <= 3; ++k) EXPECT_NEAR(s.points[k].z(), s.surface_z, 1e-15);
    EXPECT_NEAR((s.points[3] - s.points[1]).norm(), 0.06, 1e-12);
    EXPECT_NEAR((s.points[3] - s.points[1]).normalized().dot(swipe_vector(d)), 1.0, 1e-12);
  }
}

TEST(Arm, WaypointCostBasics) {
  const auto spec = make_waypoint_spec(SwipeDirection::Left);
  const auto ref = joint_reference(spec);
  lqr::Trajectory on;
  on.states = ref;
  on.controls.assign(kSteps, VectorXd::Zero(kJoints));
  EXPECT_EQ(waypoint_cost(on, spec), 0.0);

  Rng rng(4);
  lqr::Trajectory one = on, two = on;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    VectorXd d(kJoints);
    for (int j = 0; j < kJoints; ++j) d(j) = rng.uniform(-0.01, 0.01);
    one.states[t] += d;
    two.states[t] += 2 * d;
  }
  EXPECT_NEAR(waypoint_cost(two, spec), 4 * waypoint_cost(one, spec), 1e-9 * waypoint_cost(two, spec));
}

TEST(Arm, TrackingCostHandExample) {
  // two steps, one joint-space dimension each entry set by hand
  std::vector<VectorXd> ref(3, VectorXd::Zero(kJoints));
  ref[1](0) = 0.5;
  ref[2](1) = -1.0;
  const auto c = make_tracking_cost(ref, SwipeCostWeights{2.0, 3.0, 0.5});
  lqr::Trajectory tr;
  tr.states.assign(3, VectorXd::Zero(kJoints));
  tr.states[0](3) = 9.0;  // initial state is not charged
  tr.states[1](0) = 0.25;
  tr.states[2](1) = -0.5;
  tr.controls.assign(2, VectorXd::Zero(kJoints));
  tr.controls[0](2) = 0.2;
  tr.controls[1](6) = -0.4;
  // 2*(0.25^2) + 3*(0.5^2) + 0.5*(0.04 + 0.16)
  EXPECT_NEAR(c(tr), 0.125 + 0.75 + 0.1, 1e-15);
}

TEST(Swipe, ShapesAndBounds) {
  for (const auto& s : all_swipes()) {
    EXPECT_EQ(s.trajectory.states.size(), 251u);
    EXPECT_EQ(s.trajectory.controls.size(), 250u);
    for (const auto& u : s.trajectory.controls) EXPECT_LE(u.cwiseAbs().maxCoeff(), kMaxDelta);
    for (const auto& x : s.trajectory.states) EXPECT_LE(x.cwiseAbs().maxCoeff(), kJointLimit);
  }
}

TEST(Swipe, WaypointsReachedAndDescent) {
  for (const auto& s : all_swipes()) {
    for (double r : s.waypoint_residuals()) EXPECT_LT(r, 1e-3) << swipe_name(s.spec.direction);
    const auto& c = s.result.accepted_costs;
    for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LE(c[k], c[k - 1]);
  }
}

TEST(Swipe, ContactCoversMiddleWaypoints) {
  for (const auto& s : all_swipes()) {
    const auto c = contact_points(s.trajectory, s.spec.surface_z);
    ASSERT_TRUE(is_contiguous(c)) << swipe_name(s.spec.direction);
    EXPECT_LE(c.front().t, 62);
    EXPECT_GE(c.back().t, 187);
    EXPECT_GT(forward_kinematics(s.trajectory.states[0]).z(), s.spec.surface_z + 1e-3);
    EXPECT_GT(forward_kinematics(s.trajectory.states[250]).z(), s.spec.surface_z + 1e-3);
  }
}

TEST(Swipe, LeftRightMirror) {
  const auto& left = all_swipes()[0];
  const auto& right = all_swipes()[1];
  ASSERT_EQ(left.spec.direction, SwipeDirection::Left);
  ASSERT_EQ(right.spec.direction, SwipeDirection::Right);
  for (std::size_t t = 0; t < left.trajectory.states.size(); ++t) {
    const Vector3d a = forward_kinematics(left.trajectory.states[t]);
    const Vector3d b = forward_kinematics(right.trajectory.states[t]);
    EXPECT_NEAR(a.x(), b.x(), 1e-6);
    EXPECT_NEAR(a.y(), -b.y(), 1e-6);
    EXPECT_NEAR(a.z(), b.z(), 1e-6);
  }
}

TEST(Contact, EmptyAboveSurfaceAndTimeReversal) {
  const auto hold = hold_trajectory(home_pose(), 10);
  const double home_z = forward_kinematics(home_pose()).z();
  EXPECT_TRUE(contact_points(hold, home_z - 0.1).empty());
  EXPECT_FALSE(is_contiguous({}));

  const auto& s = all_swipes()[2];
  lqr::Trajectory rev;
  rev.states.assign(s.trajectory.states.rbegin(), s.trajectory.states.rend());
  const auto fwd = contact_points(s.trajectory, s.spec.surface_z);
  const auto bwd = contact_points(rev, s.spec.surface_z);
  ASSERT_EQ(fwd.size(), bwd.size());
  for (std::size_t k = 0; k < fwd.size(); ++k) EXPECT_EQ(fwd[k].t, 250 - bwd[bwd.size() - 1 - k].t);
}

TEST(Contact, TrajectoryCsv) {
  const auto& s = all_swipes()[3];
  std::ostringstream os;
  write_trajectory_csv(os, s.trajectory, s.spec.surface_z);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# robo2048 trajectory v1");
  std::getline(is, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 1 + 7 + 7 + 3);
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 251);
}

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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace robo2048::lqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Finite-horizon discrete LQR problem
///   x_{t+1} = A_t x_t + B_t u_t,
///   cost = sum_{t<N} (x_t' Q_t x_t + u_t' R_t u_t) + x_N' Q_N x_N.
/// A, B, R hold N entries; Q holds N+1 (Q[N] is the terminal cost).
struct LqrProblem {
  std::vector<MatrixXd> A;
  std::vector<MatrixXd> B;
  std::vector<MatrixXd> Q;
  std::vector<MatrixXd> R;

  int horizon() const { return static_cast<int>(A.size()); }
  Eigen::Index state_dim() const { return A.front().rows(); }
  Eigen::Index control_dim() const { return B.front().cols(); }

  static LqrProblem time_invariant(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                                   const MatrixXd& R, int N) {
    if (N < 1) throw std::invalid_argument("lqr: horizon must be at least 1");
    LqrProblem p;
    p.A.assign(N, A);
    p.B.assign(N, B);
    p.Q.assign(N + 1, Q);
    p.R.assign(N, R);
    return p;
  }

  /// Throws std::invalid_argument on inconsistent shapes, asymmetric or
  /// indefinite Q, or asymmetric or indefinite R.
  void validate() const {
    const int N = horizon();
    if (N < 1) throw std::invalid_argument("lqr: horizon must be at least 1");
    if (B.size() != A.size() || R.size() != A.size() || Q.size() != A.size() + 1)
      throw std::invalid_argument("lqr: sequence lengths do not match the horizon");
    const auto n = state_dim();
    const auto m = control_dim();
    for (int t = 0; t < N; ++t) {
      if (A[t].rows() != n || A[t].cols() != n) throw std::invalid_argument("lqr: A must be n x n");
      if (B[t].rows() != n || B[t].cols() != m) throw std::invalid_argument("lqr: B must be n x m");
      check_psd(R[t], m, "R");
    }
    for (const auto& q : Q) check_psd(q, n, "Q");
  }

 private:
  static void check_psd(const MatrixXd& M, Eigen::Index dim, const char* name) {
    if (M.rows() != dim || M.cols() != dim) throw std::invalid_argument(std::string("lqr: bad shape for ") + name);
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw std::invalid_argument(std::string("lqr: ") + name + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9 * scale)
      throw std::invalid_argument(std::string("lqr: ") + name + " is not positive semidefinite");
  }
};

/// P[t] for t = 0..N (P[N] = Q_N) and gains F[t] for t = 0..N-1.
struct RiccatiSolution {
  std::vector<MatrixXd> P;
  std::vector<MatrixXd> F;
};

class IllPosedProblem : public std::runtime_error {
 public:
  IllPosedProblem() : std::runtime_error("ill-posed problem") {}
};

/// Backward Riccati recursion:
///   F_t     = (R_t + B'P_{t+1}B)^-1 B'P_{t+1}A
///   P_t     = Q_t + A'P_{t+1}A - A'P_{t+1}B F_t
/// Each P_t is symmetrized after the update.
inline RiccatiSolution solve_lqr(const LqrProblem& problem) {
  problem.validate();
  const int N = problem.horizon();
  RiccatiSolution sol;
  sol.P.resize(N + 1);
  sol.F.resize(N);
  sol.P[N] = problem.Q[N];
  for (int t = N - 1; t >= 0; --t) {
    const MatrixXd& A = problem.A[t];
    const MatrixXd& B = problem.B[t];
    const MatrixXd& Pn = sol.P[t + 1];
    const MatrixXd PB = Pn * B;
    const MatrixXd S = problem.R[t] + B.transpose() * PB;
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw IllPosedProblem();
    const double dmin = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
    if (!(dmin > 1e-12 * std::sqrt(std::max(1.0, S.cwiseAbs().maxCoeff())))) throw IllPosedProblem();
    sol.F[t] = llt.solve(PB.transpose() * A);
    MatrixXd P = problem.Q[t] + A.transpose() * Pn * A - A.transpose() * PB * sol.F[t];
    sol.P[t] = 0.5 * (P + P.transpose());
  }
  return sol;
}

/// States x_0..x_N and controls u_0..u_{N-1}.
struct Trajectory {
  std::vector<VectorXd> states;
  std::vector<VectorXd> controls;

  int horizon() const { return static_cast<int>(controls.size()); }
};

/// Closed-loop rollout with u_t = -F_t x_t.
inline Trajectory rollout(const LqrProblem& problem, const RiccatiSolution& sol, const VectorXd& x0) {
  if (x0.size() != problem.state_dim()) throw std::invalid_argument("rollout: x0 dimension mismatch");
  Trajectory tr;
  tr.states.push_back(x0);
  for (int t = 0; t < problem.horizon(); ++t) {
    VectorXd u = -sol.F[t] * tr.states.back();
    tr.states.push_back(problem.A[t] * tr.states.back() + problem.B[t] * u);
    tr.controls.push_back(std::move(u));
  }
  return tr;
}

inline double trajectory_cost(const LqrProblem& problem, const Trajectory& tr) {
  double c = 0;
  const int N = problem.horizon();
  for (int t = 0; t < N; ++t) {
    c += tr.states[t].dot(problem.Q[t] * tr.states[t]);
    c += tr.controls[t].dot(problem.R[t] * tr.controls[t]);
  }
  c += tr.states[N].dot(problem.Q[N] * tr.states[N]);
  return c;
}

/// Step map x_{t+1} = f(x_t, u_t).
using Dynamics = std::function<VectorXd(const VectorXd&, const VectorXd&)>;

struct Linearization {
  std::vector<MatrixXd> A;
  std::vector<MatrixXd> B;
};

/// Central finite-difference Jacobians of `f` at each (x_t, u_t) of `nominal`.
inline Linearization linearize(const Dynamics& f, const Trajectory& nominal, double h = 1e-5) {
  Linearization lin;
  const int N = nominal.horizon();
  for (int t = 0; t < N; ++t) {
    const VectorXd& x = nominal.states[t];
    const VectorXd& u = nominal.controls[t];
    const auto n = x.size();
    const auto m = u.size();
    MatrixXd A(n, n), B(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      A.col(i) = (f(xp, u) - f(xm, u)) / (2 * h);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      VectorXd up = u, um = u;
      up(i) += h;
      um(i) -= h;
      B.col(i) = (f(x, up) - f(x, um)) / (2 * h);
    }
    lin.A.push_back(std::move(A));
    lin.B.push_back(std::move(B));
  }
  return lin;
}

/// Open-loop simulation of `f` from x0 under `controls`.
inline Trajectory simulate(const Dynamics& f, const VectorXd& x0, const std::vector<VectorXd>& controls) {
  Trajectory tr;
  tr.states.push_back(x0);
  for (const auto& u : controls) {
    tr.states.push_back(f(tr.states.back(), u));
    tr.controls.push_back(u);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Iterative LQR on a reference-tracking cost.

/// Tracking cost
///   sum_{t=1}^{N} w_t ||x_t - r_t||^2 + sum_{t<N} u_t' R u_t
/// with per-step state weights w_t (w_0 is ignored since x_0 is fixed).
struct TrackingCost {
  std::vector<VectorXd> reference;  // r_0..r_N
  std::vector<double> state_weight; // w_0..w_N
  MatrixXd control_weight;          // R

  double operator()(const Trajectory& tr) const {
    double c = 0;
    for (std::size_t t = 1; t < tr.states.size(); ++t)
      c += state_weight[t] * (tr.states[t] - reference[t]).squaredNorm();
    for (const auto& u : tr.controls) c += u.dot(control_weight * u);
    return c;
  }
};

struct IlqrOptions {
  int max_iterations = 200;
  double alpha0 = 0.9;
  double alpha_decay = 0.7;    // on accepted iterations
  double alpha_backoff = 1.2;  // on rejected iterations
  double alpha_cap = 0.999;
  double tolerance = 1e-12;    // relative task-cost improvement that ends the loop
  double fd_step = 1e-5;
};

struct IlqrResult {
  Trajectory trajectory;
  std::vector<double> accepted_costs;  // task cost after each accepted iteration; [0] is the initial cost
  std::vector<double> alphas;          // alpha used by each iteration
  int iterations = 0;
  int rejected = 0;
};

class DivergedError : public std::runtime_error {
 public:
  DivergedError() : std::runtime_error("diverged") {}
};

namespace detail {

// One blended-cost LQR step about `nominal`, rolled out through f.
//   (1 - alpha) * task + alpha * (||x - x_nom||^2 + ||u - u_nom||^2)
// The subproblem is posed in deviation coordinates z = [dx; 1] so that the
// linear cost terms and the control offset fit the pure quadratic form.
inline Trajectory blended_step(const Dynamics& f, const Trajectory& nominal, const TrackingCost& cost,
                               double alpha, double fd_step) {
  const int N = nominal.horizon();
  const auto n = nominal.states[0].size();
  const auto m = nominal.controls[0].size();
  const Linearization lin = linearize(f, nominal, fd_step);
  const MatrixXd Rb = (1 - alpha) * cost.control_weight + alpha * MatrixXd::Identity(m, m);
  const Eigen::LLT<MatrixXd> Rb_llt(Rb);
  if (Rb_llt.info() != Eigen::Success) throw IllPosedProblem();

  LqrProblem p;
  std::vector<VectorXd> du_center(N);
  for (int t = 0; t < N; ++t) {
    // (1-a)(u+du)'R(u+du) + a du'du = (du - c)' Rb (du - c) + const
    du_center[t] = -Rb_llt.solve((1 - alpha) * cost.control_weight * nominal.controls[t]);
    MatrixXd A = MatrixXd::Zero(n + 1, n + 1);
    A.topLeftCorner(n, n) = lin.A[t];
    A.topRightCorner(n, 1) = lin.B[t] * du_center[t];
    A(n, n) = 1;
    MatrixXd B = MatrixXd::Zero(n + 1, m);
    B.topRows(n) = lin.B[t];
    p.A.push_back(std::move(A));
    p.B.push_back(std::move(B));
    p.R.push_back(Rb);
  }
  for (int t = 0; t <= N; ++t) {
    MatrixXd Q = MatrixXd::Zero(n + 1, n + 1);
    if (t > 0) {
      // (1-a) w ||x + dx - r||^2 + a ||dx||^2 = dx' (qI) dx + 2 g'dx + const
      const double q = (1 - alpha) * cost.state_weight[t] + alpha;
      const VectorXd g = (1 - alpha) * cost.state_weight[t] * (nominal.states[t] - cost.reference[t]);
      Q.topLeftCorner(n, n) = q * MatrixXd::Identity(n, n);
      Q.topRightCorner(n, 1) = g;
      Q.bottomLeftCorner(1, n) = g.transpose();
      Q(n, n) = g.squaredNorm() / q;
    }
    p.Q.push_back(std::move(Q));
  }
  const RiccatiSolution sol = solve_lqr(p);

  Trajectory out;
  out.states.push_back(nominal.states[0]);
  VectorXd z(n + 1);
  for (int t = 0; t < N; ++t) {
    z.head(n) = out.states[t] - nominal.states[t];
    z(n) = 1;
    VectorXd u = nominal.controls[t] + du_center[t] - sol.F[t] * z;
    out.states.push_back(f(out.states[t], u));
    out.controls.push_back(std::move(u));
  }
  return out;
}

}  // namespace detail

/// Iterative LQR with the alpha-blended trust cost. Accepted iterates never
/// increase the task cost; alpha shrinks by alpha_decay after an accepted
/// iterate and grows by alpha_backoff (capped) after a rejected one.
inline IlqrResult ilqr_optimize(const Dynamics& f, const TrackingCost& cost, const Trajectory& initial,
                                const IlqrOptions& opt = {}) {
  const int N = initial.horizon();
  if (N < 1 || static_cast<int>(initial.states.size()) != N + 1)
    throw std::invalid_argument("ilqr: malformed initial trajectory");
  if (static_cast<int>(cost.reference.size()) != N + 1 || static_cast<int>(cost.state_weight.size()) != N + 1)
    throw std::invalid_argument("ilqr: cost does not match the horizon");
  IlqrResult res;
  res.trajectory = simulate(f, initial.states[0], initial.controls);
  double current = cost(res.trajectory);
  if (!std::isfinite(current)) throw DivergedError();
  res.accepted_costs.push_back(current);
  double alpha = opt.alpha0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    ++res.iterations;
    res.alphas.push_back(alpha);
    Trajectory cand = detail::blended_step(f, res.trajectory, cost, alpha, opt.fd_step);
    const double c = cost(cand);
    if (!std::isfinite(c)) throw DivergedError();
    if (c <= current) {
      const double improvement = current - c;
      res.trajectory = std::move(cand);
      current = c;
      res.accepted_costs.push_back(c);
      alpha *= opt.alpha_decay;
      if (improvement <= opt.tolerance * std::max(1.0, current)) break;
    } else {
      ++res.rejected;
      alpha = std::min(alpha * opt.alpha_backoff, opt.alpha_cap);
    }
  }
  return res;
}

}  // namespace robo2048::lqr
